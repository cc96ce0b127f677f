#include "unirel/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "unirel/error.hpp"
#include "unirel/linalg.hpp"

namespace unirel {

std::string to_string(Paradigm p) {
  switch (p) {
    case Paradigm::Mvdr: return "mvdr";
    case Paradigm::Gr: return "gr";
    case Paradigm::GrPawa: return "gr-pawa";
    case Paradigm::GrNp: return "gr-np";
  }
  return "?";
}

Paradigm paradigm_from_string(const std::string& s) {
  if (s == "mvdr") return Paradigm::Mvdr;
  if (s == "gr") return Paradigm::Gr;
  if (s == "gr-pawa") return Paradigm::GrPawa;
  if (s == "gr-np") return Paradigm::GrNp;
  throw config_error("unknown paradigm '" + s + "'");
}

ModelParams ModelParams::init(std::size_t vocab_size, std::size_t dim, Paradigm paradigm,
                              std::size_t pawa_positions, Rng& rng) {
  ModelParams m;
  m.dim = dim;
  m.table = EmbeddingTable::init(vocab_size, dim, rng);
  m.encoder = AttentionParams::init(dim, rng);
  m.w = Matrix(dim, dim);
  m.w_v = Matrix(dim, dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& v : m.w.data) v = rng.uniform(-bound, bound);
  for (double& v : m.w_v.data) v = rng.uniform(-bound, bound);
  if (paradigm == Paradigm::GrPawa)
    m.bank = PawaBank::init(pawa_positions, vocab_size, dim, rng);
  return m;
}

ParamGrads ParamGrads::zeros_like(const ModelParams& m) {
  ParamGrads g;
  g.table = Matrix(m.table.vectors.rows, m.table.vectors.cols);
  g.wk = Matrix(m.dim, m.dim);
  g.wq = Matrix(m.dim, m.dim);
  g.wv = Matrix(m.dim, m.dim);
  g.w = Matrix(m.dim, m.dim);
  g.w_v = Matrix(m.dim, m.dim);
  if (m.bank) g.bank.assign(m.bank->raw().size(), 0.0);
  return g;
}

void ParamGrads::clear() {
  auto zero = [](Matrix& m) { std::fill(m.data.begin(), m.data.end(), 0.0); };
  zero(table);
  zero(wk);
  zero(wq);
  zero(wv);
  zero(w);
  zero(w_v);
  std::fill(bank.begin(), bank.end(), 0.0);
}

std::vector<std::pair<double*, std::size_t>> trainable_views(ModelParams& m, Paradigm p) {
  std::vector<std::pair<double*, std::size_t>> v;
  auto push = [&](Matrix& mat) { v.emplace_back(mat.data.data(), mat.data.size()); };
  push(m.table.vectors);
  push(m.encoder.wk);
  push(m.encoder.wq);
  push(m.encoder.wv);
  if (p != Paradigm::Mvdr) {
    push(m.w);
    push(m.w_v);
  }
  if (p == Paradigm::GrPawa) {
    if (!m.bank) throw contract_error("trainer: gr-pawa model has no projection bank");
    v.emplace_back(m.bank->raw().data(), m.bank->raw().size());
  }
  return v;
}

std::vector<std::pair<double*, std::size_t>> trainable_views(ParamGrads& g, Paradigm p) {
  std::vector<std::pair<double*, std::size_t>> v;
  auto push = [&](Matrix& mat) { v.emplace_back(mat.data.data(), mat.data.size()); };
  push(g.table);
  push(g.wk);
  push(g.wq);
  push(g.wv);
  if (p != Paradigm::Mvdr) {
    push(g.w);
    push(g.w_v);
  }
  if (p == Paradigm::GrPawa) v.emplace_back(g.bank.data(), g.bank.size());
  return v;
}

namespace {

// ---------------------------------------------------------------------------
// contextual encoder with cached intermediates for the backward pass

struct EncCache {
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> mask;
  Matrix x;        // d x L embeddings
  Matrix kx, qx;   // d x L
  Matrix weights;  // L x L, row j = attention of output j over keys k
  Matrix ctx;      // d x L
  Matrix out;      // d x L
};

EncCache enc_forward(const ModelParams& m, std::span<const TokenId> ids) {
  EncCache e;
  e.ids.assign(ids.begin(), ids.end());
  const EncodedSequence base = embed_static(ids, m.table);
  if (base.real_count() == 0) throw contract_error("trainer: all-padding sequence");
  e.mask = base.mask;
  e.x = base.mat;
  e.kx = matmul(m.encoder.wk, e.x);
  e.qx = matmul(m.encoder.wq, e.x);
  const std::size_t d = m.dim;
  const std::size_t len = ids.size();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  e.weights = Matrix(len, len);
  e.ctx = Matrix(d, len);
  e.out = e.x;
  std::vector<double> logits(len);
  for (std::size_t j = 0; j < len; ++j) {
    for (std::size_t k = 0; k < len; ++k) {
      double s = 0.0;
      for (std::size_t r = 0; r < d; ++r) s += e.kx.at(r, j) * e.qx.at(r, k);
      logits[k] = s * inv_sqrt_d;
    }
    const std::vector<double> w = softmax_masked(logits, e.mask);
    for (std::size_t k = 0; k < len; ++k) {
      e.weights.at(j, k) = w[k];
      if (w[k] == 0.0) continue;
      for (std::size_t r = 0; r < d; ++r) e.ctx.at(r, j) += w[k] * e.x.at(r, k);
    }
    for (std::size_t r = 0; r < d; ++r) {
      double s = 0.0;
      for (std::size_t t = 0; t < d; ++t) s += m.encoder.wv.at(r, t) * e.ctx.at(t, j);
      e.out.at(r, j) += s;
    }
  }
  return e;
}

void enc_backward(const ModelParams& m, const EncCache& e, const Matrix& d_out, ParamGrads& g) {
  const std::size_t d = m.dim;
  const std::size_t len = e.ids.size();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  Matrix dx = d_out;                     // residual path
  const Matrix dctx = matmul(transpose(m.encoder.wv), d_out);
  // gWv += dOut * ctx^T
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t t = 0; t < d; ++t) {
      double s = 0.0;
      for (std::size_t j = 0; j < len; ++j) s += d_out.at(r, j) * e.ctx.at(t, j);
      g.wv.at(r, t) += s;
    }

  Matrix dkx(d, len), dqx(d, len);
  std::vector<double> dw(len), ds(len);
  for (std::size_t j = 0; j < len; ++j) {
    double inner = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      const double wjk = e.weights.at(j, k);
      if (wjk == 0.0) {
        dw[k] = 0.0;
        continue;
      }
      double s = 0.0;
      for (std::size_t r = 0; r < d; ++r) s += dctx.at(r, j) * e.x.at(r, k);
      dw[k] = s;
      inner += wjk * s;
      // dX_k += w_jk * dctx_j
      for (std::size_t r = 0; r < d; ++r) dx.at(r, k) += wjk * dctx.at(r, j);
    }
    for (std::size_t k = 0; k < len; ++k) {
      const double wjk = e.weights.at(j, k);
      ds[k] = wjk == 0.0 ? 0.0 : wjk * (dw[k] - inner);
    }
    for (std::size_t k = 0; k < len; ++k) {
      if (ds[k] == 0.0) continue;
      const double c = ds[k] * inv_sqrt_d;
      for (std::size_t r = 0; r < d; ++r) {
        dkx.at(r, j) += c * e.qx.at(r, k);
        dqx.at(r, k) += c * e.kx.at(r, j);
      }
    }
  }

  // gWk += dKX X^T, gWq += dQX X^T; dX += Wk^T dKX + Wq^T dQX
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t t = 0; t < d; ++t) {
      double sk = 0.0, sq = 0.0;
      for (std::size_t l = 0; l < len; ++l) {
        sk += dkx.at(r, l) * e.x.at(t, l);
        sq += dqx.at(r, l) * e.x.at(t, l);
      }
      g.wk.at(r, t) += sk;
      g.wq.at(r, t) += sq;
    }
  const Matrix dx_k = matmul(transpose(m.encoder.wk), dkx);
  const Matrix dx_q = matmul(transpose(m.encoder.wq), dqx);
  for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += dx_k.data[i] + dx_q.data[i];

  for (std::size_t l = 0; l < len; ++l)
    for (std::size_t r = 0; r < d; ++r)
      g.table.at(static_cast<std::size_t>(e.ids[l]), r) += dx.at(r, l);
}

// ---------------------------------------------------------------------------
// teacher-forced decoder

enum class HeadKind { Table, Pawa, Np };

struct DecPosition {
  std::vector<double> alpha;   // over query positions
  std::vector<double> qa;      // Q alpha
  std::vector<double> h;       // W_V Q alpha
  std::vector<TokenId> cands;  // candidate tokens; cands[0] = target in sampled mode
  std::vector<double> probs;   // softmax over cands
};

}  // namespace

EncodedSequence model_encode(const ModelParams& m, std::span<const TokenId> ids) {
  return encode_contextual(ids, m.table, m.encoder);
}

double gr_example_backward(const ModelParams& m, Paradigm paradigm, const Matrix* np_table,
                           std::span<const TokenId> target, std::span<const TokenId> query_ids,
                           std::span<const TokenId> negatives, double scale, ParamGrads& grads) {
  if (target.empty()) throw contract_error("trainer: empty identifier target");
  const std::size_t d = m.dim;
  const std::size_t vocab = m.table.vectors.rows;
  const std::size_t mlen = target.size();
  const HeadKind head = paradigm == Paradigm::GrPawa ? HeadKind::Pawa
                        : paradigm == Paradigm::GrNp ? HeadKind::Np
                                                     : HeadKind::Table;
  if (head == HeadKind::Np && np_table == nullptr)
    throw contract_error("trainer: gr-np backward needs the frozen head table");
  if (head == HeadKind::Pawa && !m.bank)
    throw contract_error("trainer: gr-pawa backward needs the projection bank");

  const EncCache query = enc_forward(m, query_ids);
  const std::vector<TokenId> shifted = shift_right(target);
  // latent vectors for the position-adaptive head
  EncCache latent;
  if (head == HeadKind::Pawa) latent = enc_forward(m, shifted);

  const std::size_t n = query_ids.size();
  std::vector<DecPosition> pos(mlen);
  double loss = 0.0;

  auto head_vec = [&](std::size_t i, TokenId v) -> std::vector<double> {
    switch (head) {
      case HeadKind::Table: {
        auto e = m.table.vec(v);
        return {e.begin(), e.end()};
      }
      case HeadKind::Np: {
        std::vector<double> e(d);
        for (std::size_t r = 0; r < d; ++r) e[r] = np_table->at(static_cast<std::size_t>(v), r);
        return e;
      }
      case HeadKind::Pawa:
        return m.bank->apply(i, v, column(latent.out, i));
    }
    return {};
  };

  for (std::size_t i = 0; i < mlen; ++i) {
    DecPosition& p = pos[i];
    const std::vector<double> wd = matvec(m.w, m.table.vec(shifted[i]));
    std::vector<double> u(n);
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < d; ++r) s += query.out.at(r, j) * wd[r];
      u[j] = s;
    }
    p.alpha = softmax_masked(u, query.mask);
    p.qa.assign(d, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (p.alpha[j] == 0.0) continue;
      for (std::size_t r = 0; r < d; ++r) p.qa[r] += p.alpha[j] * query.out.at(r, j);
    }
    p.h = matvec(m.w_v, p.qa);

    if (negatives.empty()) {
      p.cands.resize(vocab);
      std::iota(p.cands.begin(), p.cands.end(), TokenId{0});
    } else {
      p.cands.clear();
      p.cands.push_back(target[i]);
      p.cands.insert(p.cands.end(), negatives.begin(), negatives.end());
    }
    std::vector<double> z(p.cands.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < p.cands.size(); ++c) {
      z[c] = dot(head_vec(i, p.cands[c]), p.h);
      mx = std::max(mx, z[c]);
    }
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    const double lse = std::log(sum) + mx;
    p.probs.resize(z.size());
    for (std::size_t c = 0; c < z.size(); ++c) p.probs[c] = std::exp(z[c] - lse);
    const std::size_t target_slot =
        negatives.empty() ? static_cast<std::size_t>(target[i]) : std::size_t{0};
    loss += lse - z[target_slot];
  }

  // backward
  Matrix d_query(d, n);
  Matrix d_latent;
  if (head == HeadKind::Pawa) d_latent = Matrix(d, mlen);

  for (std::size_t i = 0; i < mlen; ++i) {
    DecPosition& p = pos[i];
    const std::size_t target_slot =
        negatives.empty() ? static_cast<std::size_t>(target[i]) : std::size_t{0};
    std::vector<double> dh(d, 0.0);
    const std::vector<double> lat =
        head == HeadKind::Pawa ? column(latent.out, i) : std::vector<double>{};
    std::vector<double> dlat(head == HeadKind::Pawa ? d : 0, 0.0);

    for (std::size_t c = 0; c < p.cands.size(); ++c) {
      double dz = p.probs[c];
      if (c == target_slot) dz -= 1.0;
      if (dz == 0.0) continue;
      dz *= scale;
      const TokenId v = p.cands[c];
      switch (head) {
        case HeadKind::Table: {
          auto e = m.table.vec(v);
          for (std::size_t r = 0; r < d; ++r) {
            dh[r] += dz * e[r];
            grads.table.at(static_cast<std::size_t>(v), r) += dz * p.h[r];
          }
          break;
        }
        case HeadKind::Np: {
          for (std::size_t r = 0; r < d; ++r)
            dh[r] += dz * np_table->at(static_cast<std::size_t>(v), r);
          break;
        }
        case HeadKind::Pawa: {
          const double* proj = m.bank->proj(i, v);
          double* gproj =
              grads.bank.data() +
              (i * m.bank->vocab_size() + static_cast<std::size_t>(v)) * d * d;
          // z = (E_{i,v} lat) . h
          for (std::size_t r = 0; r < d; ++r) {
            double y_r = 0.0;
            for (std::size_t t = 0; t < d; ++t) {
              y_r += proj[r * d + t] * lat[t];
              gproj[r * d + t] += dz * p.h[r] * lat[t];
              dlat[t] += dz * p.h[r] * proj[r * d + t];
            }
            dh[r] += dz * y_r;
          }
          break;
        }
      }
    }

    // h = W_V qa
    std::vector<double> dqa(d, 0.0);
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t t = 0; t < d; ++t) {
        grads.w_v.at(r, t) += dh[r] * p.qa[t];
        dqa[t] += m.w_v.at(r, t) * dh[r];
      }
    }
    // qa = Q alpha
    std::vector<double> dalpha(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (p.alpha[j] != 0.0)
        for (std::size_t r = 0; r < d; ++r) d_query.at(r, j) += dqa[r] * p.alpha[j];
      double s = 0.0;
      for (std::size_t r = 0; r < d; ++r) s += query.out.at(r, j) * dqa[r];
      dalpha[j] = s;
    }
    // alpha = softmax_masked(u)
    double inner = 0.0;
    for (std::size_t j = 0; j < n; ++j) inner += p.alpha[j] * dalpha[j];
    std::vector<double> du(n);
    for (std::size_t j = 0; j < n; ++j)
      du[j] = p.alpha[j] == 0.0 ? 0.0 : p.alpha[j] * (dalpha[j] - inner);
    // u_j = q_j . (W dhat)
    const std::vector<double> wd = matvec(m.w, m.table.vec(shifted[i]));
    std::vector<double> v_sum(d, 0.0);  // sum_j du_j q_j
    for (std::size_t j = 0; j < n; ++j) {
      if (du[j] == 0.0) continue;
      for (std::size_t r = 0; r < d; ++r) {
        d_query.at(r, j) += du[j] * wd[r];
        v_sum[r] += du[j] * query.out.at(r, j);
      }
    }
    const auto dhat = m.table.vec(shifted[i]);
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t t = 0; t < d; ++t) grads.w.at(r, t) += v_sum[r] * dhat[t];
    const std::vector<double> ddhat = matvec(transpose(m.w), v_sum);
    for (std::size_t r = 0; r < d; ++r)
      grads.table.at(static_cast<std::size_t>(shifted[i]), r) += ddhat[r];

    if (head == HeadKind::Pawa)
      for (std::size_t r = 0; r < d; ++r) d_latent.at(r, i) += dlat[r];
  }

  enc_backward(m, query, d_query, grads);
  if (head == HeadKind::Pawa) enc_backward(m, latent, d_latent, grads);
  return loss * scale;
}

double mvdr_batch_backward(const ModelParams& m, std::span<const MvdrExample> batch,
                           ParamGrads& grads) {
  if (batch.empty()) throw contract_error("trainer: empty contrastive batch");
  const std::size_t b = batch.size();
  const std::size_t d = m.dim;

  std::vector<EncCache> queries(b), docs(b);
  for (std::size_t i = 0; i < b; ++i) {
    queries[i] = enc_forward(m, batch[i].query_ids);
    docs[i] = enc_forward(m, batch[i].doc_ids);
  }

  // top-1 q2d scores with cached argmax positions
  Matrix scores(b, b);
  std::vector<std::vector<std::vector<std::size_t>>> argmax(b);
  for (std::size_t qi = 0; qi < b; ++qi) {
    argmax[qi].assign(b, {});
    const EncCache& q = queries[qi];
    for (std::size_t di = 0; di < b; ++di) {
      const EncCache& doc = docs[di];
      auto& amax = argmax[qi][di];
      amax.assign(q.ids.size(), doc.ids.size());
      double rel = 0.0;
      for (std::size_t j = 0; j < q.ids.size(); ++j) {
        if (!q.mask[j]) continue;
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_i = doc.ids.size();
        for (std::size_t i = 0; i < doc.ids.size(); ++i) {
          if (!doc.mask[i]) continue;
          double s = 0.0;
          for (std::size_t r = 0; r < d; ++r) s += doc.out.at(r, i) * q.out.at(r, j);
          if (s > best) {
            best = s;
            best_i = i;
          }
        }
        amax[j] = best_i;
        rel += best;
      }
      scores.at(qi, di) = rel;
    }
  }

  double loss = 0.0;
  const double scale = 1.0 / static_cast<double>(b);
  std::vector<Matrix> d_q(b), d_doc(b);
  for (std::size_t i = 0; i < b; ++i) {
    d_q[i] = Matrix(d, queries[i].ids.size());
    d_doc[i] = Matrix(d, docs[i].ids.size());
  }

  for (std::size_t qi = 0; qi < b; ++qi) {
    const std::vector<double> row(scores.data.begin() + static_cast<std::ptrdiff_t>(qi * b),
                                  scores.data.begin() + static_cast<std::ptrdiff_t>((qi + 1) * b));
    loss += contrastive_from_scores(row, qi) * scale;
    double mx = row[0];
    for (double s : row) mx = std::max(mx, s);
    double sum = 0.0;
    for (double s : row) sum += std::exp(s - mx);
    for (std::size_t di = 0; di < b; ++di) {
      double g = std::exp(row[di] - mx) / sum;
      if (di == qi) g -= 1.0;
      g *= scale;
      if (g == 0.0) continue;
      const EncCache& q = queries[qi];
      const EncCache& doc = docs[di];
      const auto& amax = argmax[qi][di];
      for (std::size_t j = 0; j < q.ids.size(); ++j) {
        if (!q.mask[j]) continue;
        const std::size_t i = amax[j];
        for (std::size_t r = 0; r < d; ++r) {
          d_q[qi].at(r, j) += g * doc.out.at(r, i);
          d_doc[di].at(r, i) += g * q.out.at(r, j);
        }
      }
    }
  }

  for (std::size_t i = 0; i < b; ++i) {
    enc_backward(m, queries[i], d_q[i], grads);
    enc_backward(m, docs[i], d_doc[i], grads);
  }
  return loss;
}

NpArtifacts build_np_artifacts(const ModelParams& m, const Corpus& corpus, std::size_t span_len,
                               std::size_t vocab_size, std::uint64_t epoch) {
  NpArtifacts art;
  art.store.refreshed_at = epoch;
  art.store.docs.resize(corpus.size());
  art.np_table = Matrix(vocab_size, m.dim);
  std::vector<std::size_t> counts(vocab_size, 0);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::vector<TokenId> ids = doc_prefix(corpus.docs[i], span_len, false);
    if (ids.empty()) continue;
    const EncodedSequence enc = model_encode(m, ids);
    art.store.docs[i] = enc.mat;
    for (std::size_t p = 0; p < ids.size(); ++p) {
      const auto v = static_cast<std::size_t>(ids[p]);
      ++counts[v];
      for (std::size_t r = 0; r < m.dim; ++r) art.np_table.at(v, r) += enc.mat.at(r, p);
    }
  }
  for (std::size_t v = 0; v < vocab_size; ++v) {
    if (counts[v] == 0) continue;
    for (std::size_t r = 0; r < m.dim; ++r)
      art.np_table.at(v, r) /= static_cast<double>(counts[v]);
  }
  return art;
}

namespace {

std::vector<TokenId> sample_negatives(const ModelParams& m, std::span<const TokenId> targets,
                                      std::size_t count, Rng& rng) {
  const std::size_t vocab = m.table.vectors.rows;
  std::vector<std::uint8_t> is_target(vocab, 0);
  for (TokenId t : targets) is_target[static_cast<std::size_t>(t)] = 1;
  std::vector<TokenId> pool;
  pool.reserve(vocab);
  for (std::size_t v = 0; v < vocab; ++v)
    if (!is_target[v]) pool.push_back(static_cast<TokenId>(v));
  if (pool.empty()) throw contract_error("trainer: no tokens left to sample negatives from");
  std::vector<TokenId> out;
  const std::size_t k = std::min(count, pool.size());
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(pool.size() - i));
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  return out;
}

}  // namespace

TrainResult train(const TrainConfig& config, const Corpus& corpus,
                  std::span<const TrainPair> pairs) {
  if (pairs.empty()) throw contract_error("trainer: empty training set");
  if (config.lr <= 0.0) throw config_error("trainer: learning rate must be positive");
  if (config.paradigm == Paradigm::Mvdr && config.batch_size < 2)
    throw config_error("trainer: contrastive training needs batch size >= 2");

  Rng rng(config.seed);
  TrainResult result;
  // vocab size comes from the widest token id seen plus the reserved range
  std::size_t vocab_size = kReservedTokens;
  for (const auto& doc : corpus.docs)
    for (TokenId t : doc.token_ids)
      vocab_size = std::max(vocab_size, static_cast<std::size_t>(t) + 1);
  for (const auto& p : pairs)
    for (TokenId t : p.query_ids)
      vocab_size = std::max(vocab_size, static_cast<std::size_t>(t) + 1);

  result.model =
      ModelParams::init(vocab_size, config.dim, config.paradigm, config.span_len, rng);
  ModelParams& model = result.model;

  ParamGrads grads = ParamGrads::zeros_like(model);
  auto views = trainable_views(model, config.paradigm);
  std::size_t total = 0;
  for (auto& [p, n] : views) total += n;
  std::vector<double> velocity(total, 0.0);

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.paradigm == Paradigm::GrNp) {
      const bool refresh = epoch == 0 || (config.np_refresh_every != kNeverRefresh &&
                                          epoch % config.np_refresh_every == 0);
      if (refresh) {
        NpArtifacts art =
            build_np_artifacts(model, corpus, config.span_len, vocab_size, epoch);
        result.store = std::move(art.store);
        result.np_table = std::move(art.np_table);
      }
    }

    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t seen = 0;

    std::size_t begin = 0;
    while (begin < order.size()) {
      std::size_t end = std::min(begin + config.batch_size, order.size());
      // fold a trailing singleton into the previous contrastive batch
      if (config.paradigm == Paradigm::Mvdr && end + 1 == order.size()) end = order.size();
      grads.clear();
      double batch_loss = 0.0;
      const std::size_t batch_n = end - begin;

      if (config.paradigm == Paradigm::Mvdr) {
        std::vector<MvdrExample> batch(batch_n);
        for (std::size_t i = 0; i < batch_n; ++i) {
          const TrainPair& pair = pairs[order[begin + i]];
          batch[i].query_ids = pair.query_ids;
          batch[i].doc_ids = doc_prefix(corpus.docs[pair.doc_index], config.max_doc_len, true);
        }
        batch_loss = mvdr_batch_backward(model, batch, grads);
      } else {
        const double scale = 1.0 / static_cast<double>(batch_n);
        for (std::size_t i = 0; i < batch_n; ++i) {
          const TrainPair& pair = pairs[order[begin + i]];
          const std::vector<TokenId> target =
              doc_prefix(corpus.docs[pair.doc_index], config.span_len, false);
          if (target.empty())
            throw contract_error("trainer: document '" + corpus.docs[pair.doc_index].id +
                                 "' yields an empty identifier");
          std::vector<TokenId> negatives;
          if (config.negative_samples > 0)
            negatives = sample_negatives(model, target, config.negative_samples, rng);
          batch_loss += gr_example_backward(
              model, config.paradigm,
              config.paradigm == Paradigm::GrNp ? &result.np_table : nullptr, target,
              pair.query_ids, negatives, scale, grads);
        }
      }

      // momentum step
      auto gviews = trainable_views(grads, config.paradigm);
      std::size_t off = 0;
      for (std::size_t s = 0; s < views.size(); ++s) {
        double* p = views[s].first;
        const double* g = gviews[s].first;
        for (std::size_t i = 0; i < views[s].second; ++i) {
          velocity[off] = config.momentum * velocity[off] - config.lr * g[i];
          p[i] += velocity[off];
          ++off;
        }
      }

      epoch_loss += batch_loss * static_cast<double>(batch_n);
      seen += batch_n;
      begin = end;
    }
    result.loss_curve.push_back(seen ? epoch_loss / static_cast<double>(seen) : 0.0);
  }

  if (config.paradigm == Paradigm::GrNp && result.np_table.rows == 0) {
    NpArtifacts art = build_np_artifacts(model, corpus, config.span_len, vocab_size, 0);
    result.store = std::move(art.store);
    result.np_table = std::move(art.np_table);
  }
  return result;
}

GradCheckReport grad_check(ModelParams& params, Paradigm paradigm,
                           const std::function<double()>& loss_at_params,
                           const ParamGrads& analytic, std::size_t n_coords, Rng& rng,
                           double step) {
  auto views = trainable_views(params, paradigm);
  ParamGrads copy = analytic;  // const views via non-const accessor
  auto gviews = trainable_views(copy, paradigm);
  std::size_t total = 0;
  for (auto& [p, n] : views) total += n;

  GradCheckReport report;
  for (std::size_t c = 0; c < n_coords; ++c) {
    std::size_t idx = static_cast<std::size_t>(rng.uniform_int(total));
    std::size_t seg = 0;
    while (idx >= views[seg].second) {
      idx -= views[seg].second;
      ++seg;
    }
    double* p = views[seg].first + idx;
    const double analytic_g = gviews[seg].first[idx];
    const double saved = *p;
    *p = saved + step;
    const double up = loss_at_params();
    *p = saved - step;
    const double down = loss_at_params();
    *p = saved;
    const double numeric_g = (up - down) / (2.0 * step);
    const double denom = std::max(std::abs(analytic_g), std::abs(numeric_g));
    const double err =
        denom > 1e-6 ? std::abs(analytic_g - numeric_g) / denom : std::abs(analytic_g - numeric_g);
    report.max_rel_err = std::max(report.max_rel_err, err);
    ++report.coords;
  }
  return report;
}

// ---------------------------------------------------------------------------
// checkpoint and loss-curve persistence

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  return nlohmann::json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  m.data = j.at("data").get<std::vector<double>>();
  if (m.data.size() != m.rows * m.cols) throw io_error("checkpoint: matrix size mismatch");
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& model,
                     const TrainConfig& config) {
  nlohmann::json j;
  j["format"] = "unirel-checkpoint";
  j["version"] = 1;
  j["seed"] = config.seed;
  j["config"] = {{"lr", config.lr},
                 {"momentum", config.momentum},
                 {"batch_size", config.batch_size},
                 {"epochs", config.epochs},
                 {"paradigm", to_string(config.paradigm)},
                 {"negative_samples", config.negative_samples},
                 {"np_refresh_every", config.np_refresh_every},
                 {"dim", config.dim},
                 {"max_doc_len", config.max_doc_len},
                 {"max_query_len", config.max_query_len},
                 {"span_len", config.span_len}};
  j["dim"] = model.dim;
  j["params"] = {{"table", matrix_to_json(model.table.vectors)},
                 {"wk", matrix_to_json(model.encoder.wk)},
                 {"wq", matrix_to_json(model.encoder.wq)},
                 {"wv", matrix_to_json(model.encoder.wv)},
                 {"w", matrix_to_json(model.w)},
                 {"w_v", matrix_to_json(model.w_v)}};
  if (model.bank) {
    j["params"]["bank_positions"] = model.bank->positions();
    j["params"]["bank"] = model.bank->raw();
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("checkpoint: cannot write " + path);
  out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("checkpoint: cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw io_error("checkpoint: malformed JSON in " + path + ": " + e.what());
  }
  if (j.value("format", "") != "unirel-checkpoint")
    throw io_error("checkpoint: " + path + " is not a model checkpoint");

  Checkpoint ck;
  const auto& c = j.at("config");
  ck.config.seed = j.at("seed").get<std::uint64_t>();
  ck.config.lr = c.at("lr").get<double>();
  ck.config.momentum = c.at("momentum").get<double>();
  ck.config.batch_size = c.at("batch_size").get<std::size_t>();
  ck.config.epochs = c.at("epochs").get<std::size_t>();
  ck.config.paradigm = paradigm_from_string(c.at("paradigm").get<std::string>());
  ck.config.negative_samples = c.at("negative_samples").get<std::size_t>();
  ck.config.np_refresh_every = c.at("np_refresh_every").get<std::uint64_t>();
  ck.config.dim = c.at("dim").get<std::size_t>();
  ck.config.max_doc_len = c.at("max_doc_len").get<std::size_t>();
  ck.config.max_query_len = c.at("max_query_len").get<std::size_t>();
  ck.config.span_len = c.at("span_len").get<std::size_t>();

  const auto& p = j.at("params");
  ck.model.dim = j.at("dim").get<std::size_t>();
  ck.model.table.dim = ck.model.dim;
  ck.model.table.vectors = matrix_from_json(p.at("table"));
  ck.model.encoder.wk = matrix_from_json(p.at("wk"));
  ck.model.encoder.wq = matrix_from_json(p.at("wq"));
  ck.model.encoder.wv = matrix_from_json(p.at("wv"));
  ck.model.w = matrix_from_json(p.at("w"));
  ck.model.w_v = matrix_from_json(p.at("w_v"));
  if (p.contains("bank")) {
    PawaBank bank(p.at("bank_positions").get<std::size_t>(), ck.model.table.vectors.rows,
                  ck.model.dim);
    bank.raw() = p.at("bank").get<std::vector<double>>();
    if (bank.raw().size() !=
        bank.positions() * bank.vocab_size() * ck.model.dim * ck.model.dim)
      throw io_error("checkpoint: projection bank size mismatch");
    ck.model.bank = std::move(bank);
  }
  return ck;
}

std::uint64_t params_fingerprint(const ModelParams& model) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const double* data, std::size_t n) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const Matrix* m : {&model.table.vectors, &model.encoder.wk, &model.encoder.wq,
                          &model.encoder.wv, &model.w, &model.w_v})
    mix(m->data.data(), m->data.size());
  if (model.bank) mix(model.bank->raw().data(), model.bank->raw().size());
  return h;
}

void save_loss_curve(const std::string& path, std::span<const double> losses) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("loss curve: cannot write " + path);
  out << "epoch,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < losses.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, losses[i]);
    out << buf;
  }
}

}  // namespace unirel
