#include "unirel/relevance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "unirel/error.hpp"
#include "unirel/linalg.hpp"

namespace unirel {

RelevanceScore rel_unified(const Matrix& d_like, const Matrix& q, const AlignmentMatrix& a) {
  if (d_like.rows != q.rows)
    throw contract_error("rel_unified: dimension mismatch, d=" + std::to_string(d_like.rows) +
                         " vs d=" + std::to_string(q.rows));
  if (a.mat.rows != d_like.cols || a.mat.cols != q.cols)
    throw contract_error("rel_unified: alignment is " + std::to_string(a.mat.rows) + "x" +
                         std::to_string(a.mat.cols) + " for " + std::to_string(d_like.cols) +
                         " doc and " + std::to_string(q.cols) + " query positions");
  if (a.z <= 0.0) throw contract_error("rel_unified: normalizer must be positive");

  RelevanceScore score;
  score.doc_contrib.assign(a.mat.rows, 0.0);
  score.query_contrib.assign(a.mat.cols, 0.0);
  const double inv_z = 1.0 / a.z;
  for (std::size_t i = 0; i < a.mat.rows; ++i) {
    for (std::size_t j = 0; j < a.mat.cols; ++j) {
      const double w = a.mat.at(i, j);
      if (w == 0.0) continue;
      double dq = 0.0;
      for (std::size_t r = 0; r < d_like.rows; ++r) dq += d_like.at(r, i) * q.at(r, j);
      const double c = dq * w * inv_z;
      score.doc_contrib[i] += c;
      score.query_contrib[j] += c;
    }
  }
  // totaled per query column: one-hot column alignments then reproduce the
  // native sum-max accumulation order bit for bit
  for (double c : score.query_contrib) score.value += c;
  return score;
}

namespace {

// Ẽ_d = W_V^T E_d: column i is W_V^T e_{d_i}
Matrix value_projected_embeddings(std::span<const TokenId> doc_ids, const DecoderParams& params) {
  const Matrix wvt = transpose(params.w_v);
  Matrix out(params.table.dim, doc_ids.size());
  for (std::size_t i = 0; i < doc_ids.size(); ++i) {
    const std::vector<double> e = matvec(wvt, params.table.vec(doc_ids[i]));
    set_column(out, i, e);
  }
  return out;
}

void require_identifier(std::span<const TokenId> doc_ids) {
  if (doc_ids.empty()) throw contract_error("relevance: empty document identifier");
}

}  // namespace

RelevanceScore rel_gr(std::span<const TokenId> doc_ids, const EncodedSequence& query,
                      const DecoderParams& params, TokenId start) {
  require_identifier(doc_ids);
  const EncodedSequence shifted = embed_static(shift_right(doc_ids, start), params.table);
  const AlignmentMatrix a = align_attention(shifted, query, params.w);
  const Matrix projected = value_projected_embeddings(doc_ids, params);
  RelevanceScore score = rel_unified(projected, query.mat, a);
  return score;
}

std::vector<double> gr_forward_logits(std::span<const TokenId> doc_ids,
                                      const EncodedSequence& query, const DecoderParams& params,
                                      TokenId start) {
  require_identifier(doc_ids);
  const std::size_t d = params.table.dim;
  const std::vector<TokenId> shifted = shift_right(doc_ids, start);
  std::vector<double> logits(doc_ids.size());
  for (std::size_t i = 0; i < doc_ids.size(); ++i) {
    // alpha_i = softmax(Q^T W d̂_{i-1}) over valid query positions
    const std::vector<double> wd = matvec(params.w, params.table.vec(shifted[i]));
    std::vector<double> u(query.length());
    for (std::size_t j = 0; j < query.length(); ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < d; ++r) s += query.mat.at(r, j) * wd[r];
      u[j] = s;
    }
    const std::vector<double> alpha = softmax_masked(u, query.mask);
    // h_i = W_V Q alpha_i
    std::vector<double> q_alpha(d, 0.0);
    for (std::size_t j = 0; j < query.length(); ++j) {
      if (alpha[j] == 0.0) continue;
      for (std::size_t r = 0; r < d; ++r) q_alpha[r] += alpha[j] * query.mat.at(r, j);
    }
    const std::vector<double> h = matvec(params.w_v, q_alpha);
    logits[i] = dot(params.table.vec(doc_ids[i]), h);
  }
  return logits;
}

CeLoss loss_ce_teacher_forcing(std::span<const TokenId> doc_ids, const EncodedSequence& query,
                               const DecoderParams& params, std::span<const TokenId> negatives,
                               TokenId start) {
  require_identifier(doc_ids);
  const std::size_t d = params.table.dim;
  const std::size_t vocab = params.table.vectors.rows;
  const std::vector<TokenId> shifted = shift_right(doc_ids, start);

  CeLoss loss;
  loss.position_loss.resize(doc_ids.size());
  loss.target_logit.resize(doc_ids.size());
  for (std::size_t i = 0; i < doc_ids.size(); ++i) {
    const std::vector<double> wd = matvec(params.w, params.table.vec(shifted[i]));
    std::vector<double> u(query.length());
    for (std::size_t j = 0; j < query.length(); ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < d; ++r) s += query.mat.at(r, j) * wd[r];
      u[j] = s;
    }
    const std::vector<double> alpha = softmax_masked(u, query.mask);
    std::vector<double> q_alpha(d, 0.0);
    for (std::size_t j = 0; j < query.length(); ++j) {
      if (alpha[j] == 0.0) continue;
      for (std::size_t r = 0; r < d; ++r) q_alpha[r] += alpha[j] * query.mat.at(r, j);
    }
    const std::vector<double> h = matvec(params.w_v, q_alpha);

    const double target = dot(params.table.vec(doc_ids[i]), h);
    double mx = target;
    std::vector<double> cand;
    if (negatives.empty()) {
      cand.reserve(vocab);
      for (std::size_t v = 0; v < vocab; ++v) {
        cand.push_back(dot(params.table.vec(static_cast<TokenId>(v)), h));
        mx = std::max(mx, cand.back());
      }
    } else {
      cand.reserve(negatives.size() + 1);
      cand.push_back(target);
      for (TokenId v : negatives) {
        cand.push_back(dot(params.table.vec(v), h));
        mx = std::max(mx, cand.back());
      }
    }
    double sum = 0.0;
    for (double z : cand) sum += std::exp(z - mx);
    const double lse = std::log(sum) + mx;
    loss.target_logit[i] = target;
    loss.position_loss[i] = lse - target;
    loss.total += loss.position_loss[i];
  }
  return loss;
}

double contrastive_from_scores(std::span<const double> scores, std::size_t positive) {
  if (scores.empty()) throw contract_error("contrastive: empty score batch");
  if (positive >= scores.size()) throw contract_error("contrastive: positive index out of range");
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - mx);
  return std::log(sum) + mx - scores[positive];
}

namespace {

double strategy_score(const EncodedSequence& doc, const EncodedSequence& query,
                      AlignStrategy strategy) {
  AlignmentMatrix a;
  switch (strategy) {
    case AlignStrategy::Top1QueryToDoc: a = align_top1_q2d(doc, query); break;
    case AlignStrategy::Top1DocToQuery: a = align_top1_d2q(doc, query); break;
    case AlignStrategy::ExactLexical: a = align_exact_lexical(doc.ids, query.ids); break;
    default:
      throw contract_error("loss_contrastive: unsupported strategy " + to_string(strategy));
  }
  return rel_unified(doc.mat, query.mat, a).value;
}

}  // namespace

double loss_contrastive(const EncodedSequence& doc, const EncodedSequence& query,
                        AlignStrategy strategy, std::span<const EncodedSequence> negatives) {
  std::vector<double> scores;
  scores.reserve(negatives.size() + 1);
  scores.push_back(strategy_score(doc, query, strategy));
  for (const auto& neg : negatives) scores.push_back(strategy_score(neg, query, strategy));
  return contrastive_from_scores(scores, 0);
}

RelevanceScore rel_pawa(std::span<const TokenId> doc_ids, const EncodedSequence& query,
                        const DecoderParams& params, const PawaBank& bank, const Matrix& latents,
                        TokenId start) {
  require_identifier(doc_ids);
  if (bank.positions() < doc_ids.size())
    throw contract_error("rel_pawa: bank covers " + std::to_string(bank.positions()) +
                         " positions for identifier of length " + std::to_string(doc_ids.size()));
  const EncodedSequence shifted = embed_static(shift_right(doc_ids, start), params.table);
  const AlignmentMatrix a = align_attention(shifted, query, params.w);
  // per-position effective embeddings E_{i,d_i} d'_i, then the usual W_V path
  const Matrix effective = pawa_encode(doc_ids, bank, latents);
  const Matrix projected = matmul(transpose(params.w_v), effective);
  return rel_unified(projected, query.mat, a);
}

RelevanceScore rel_np(std::span<const TokenId> doc_ids, const Matrix& stored_doc,
                      const EncodedSequence& query, const DecoderParams& params, TokenId start) {
  require_identifier(doc_ids);
  if (stored_doc.cols != doc_ids.size())
    throw contract_error("rel_np: stored matrix has " + std::to_string(stored_doc.cols) +
                         " columns for identifier of length " + std::to_string(doc_ids.size()));
  const EncodedSequence shifted = embed_static(shift_right(doc_ids, start), params.table);
  const AlignmentMatrix a = align_attention(shifted, query, params.w);
  return rel_unified(stored_doc, query.mat, a);
}

std::vector<double> feature_map_elu1(std::span<const double> x) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = x[i] > 0.0 ? x[i] + 1.0 : std::exp(x[i]);
  return y;
}

Matrix feature_outer(std::span<const double> x) {
  const std::vector<double> phi = feature_map_elu1(x);
  return outer(x, phi);
}

KernelizedScore rel_kernelized(const Matrix& d, const Matrix& q) {
  if (d.rows != q.rows) throw contract_error("rel_kernelized: dimension mismatch");
  KernelizedScore out;
  std::vector<std::vector<double>> phi_q(q.cols);
  for (std::size_t j = 0; j < q.cols; ++j) phi_q[j] = feature_map_elu1(column(q, j));

  for (std::size_t i = 0; i < d.cols; ++i) {
    const std::vector<double> di = column(d, i);
    const std::vector<double> phi_d = feature_map_elu1(di);
    const double self_d = dot(di, di) * dot(phi_d, phi_d);
    // row normalizer p_i = sum_j phi(d_i).phi(q_j)
    double p = 0.0;
    for (std::size_t j = 0; j < q.cols; ++j) p += dot(phi_d, phi_q[j]);
    if (p <= 0.0) throw contract_error("rel_kernelized: normalizer is not positive");
    for (std::size_t j = 0; j < q.cols; ++j) {
      const std::vector<double> qj = column(q, j);
      // tr(F(d)^T F(q)) = (d.q)(phi(d).phi(q))
      const double trace = dot(di, qj) * dot(phi_d, phi_q[j]);
      out.value += trace / p;
      const double self_q = dot(qj, qj) * dot(phi_q[j], phi_q[j]);
      const double bound = std::sqrt(self_d) * std::sqrt(self_q);
      const double violation = trace - bound;
      out.max_violation = std::max(out.max_violation, violation);
      if (violation > 0.0) out.bound_holds = false;
    }
  }
  return out;
}

}  // namespace unirel
