#include "unirel/alignment.hpp"

#include <cmath>
#include <limits>

#include "unirel/error.hpp"
#include "unirel/linalg.hpp"

namespace unirel {

std::string to_string(AlignStrategy s) {
  switch (s) {
    case AlignStrategy::Top1QueryToDoc: return "top1-q2d";
    case AlignStrategy::Top1DocToQuery: return "top1-d2q";
    case AlignStrategy::Attention: return "attention";
    case AlignStrategy::ExactLexical: return "exact-lexical";
    case AlignStrategy::Salience: return "salience";
    case AlignStrategy::SingleVector: return "single-vector";
  }
  return "?";
}

std::string to_string(AlignDirection d) {
  switch (d) {
    case AlignDirection::QueryToDoc: return "query-to-doc";
    case AlignDirection::DocToQuery: return "doc-to-query";
    case AlignDirection::Symmetric: return "symmetric";
  }
  return "?";
}

AlignStrategy align_strategy_from_string(const std::string& s) {
  if (s == "top1-q2d") return AlignStrategy::Top1QueryToDoc;
  if (s == "top1-d2q") return AlignStrategy::Top1DocToQuery;
  if (s == "attention") return AlignStrategy::Attention;
  if (s == "exact-lexical") return AlignStrategy::ExactLexical;
  if (s == "salience") return AlignStrategy::Salience;
  if (s == "single-vector") return AlignStrategy::SingleVector;
  throw config_error("unknown alignment strategy '" + s + "'");
}

AlignDirection align_direction_from_string(const std::string& s) {
  if (s == "query-to-doc") return AlignDirection::QueryToDoc;
  if (s == "doc-to-query") return AlignDirection::DocToQuery;
  if (s == "symmetric") return AlignDirection::Symmetric;
  throw config_error("unknown alignment direction '" + s + "'");
}

AlignmentMatrix normalized(AlignmentMatrix a) {
  double sum = 0.0;
  for (double v : a.mat.data) sum += v;
  if (sum <= 0.0) throw contract_error("alignment normalizer is not positive");
  a.z = sum;
  return a;
}

namespace {

// d_i . q_j over the shared dimension of two column-per-token matrices
Matrix similarity(const EncodedSequence& doc, const EncodedSequence& query) {
  if (doc.mat.rows != query.mat.rows)
    throw contract_error("alignment: dimension mismatch, d=" + std::to_string(doc.mat.rows) +
                         " vs d=" + std::to_string(query.mat.rows));
  return matmul(transpose(doc.mat), query.mat);
}

void require_real_query(const EncodedSequence& query) {
  if (query.real_count() == 0) throw contract_error("alignment: query has no real tokens");
}

}  // namespace

AlignmentMatrix align_top1_q2d(const EncodedSequence& doc, const EncodedSequence& query) {
  require_real_query(query);
  if (doc.real_count() == 0) throw contract_error("alignment: document has no real tokens");
  const Matrix sim = similarity(doc, query);
  AlignmentMatrix a{Matrix(sim.rows, sim.cols), AlignStrategy::Top1QueryToDoc,
                    AlignDirection::QueryToDoc, 1.0};
  for (std::size_t j = 0; j < sim.cols; ++j) {
    if (!query.mask[j]) continue;
    std::size_t best = sim.rows;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sim.rows; ++i) {
      if (!doc.mask[i]) continue;
      if (sim.at(i, j) > best_score) {
        best_score = sim.at(i, j);
        best = i;
      }
    }
    a.mat.at(best, j) = 1.0;
  }
  return a;
}

AlignmentMatrix align_top1_d2q(const EncodedSequence& doc, const EncodedSequence& query) {
  require_real_query(query);
  if (doc.real_count() == 0) throw contract_error("alignment: document has no real tokens");
  const Matrix sim = similarity(doc, query);
  AlignmentMatrix a{Matrix(sim.rows, sim.cols), AlignStrategy::Top1DocToQuery,
                    AlignDirection::DocToQuery, 1.0};
  for (std::size_t i = 0; i < sim.rows; ++i) {
    if (!doc.mask[i]) continue;
    std::size_t best = sim.cols;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < sim.cols; ++j) {
      if (!query.mask[j]) continue;
      if (sim.at(i, j) > best_score) {
        best_score = sim.at(i, j);
        best = j;
      }
    }
    a.mat.at(i, best) = 1.0;
  }
  return a;
}

AlignmentMatrix align_attention(const EncodedSequence& shifted_doc, const EncodedSequence& query,
                                const Matrix& w) {
  require_real_query(query);
  if (w.rows != shifted_doc.mat.rows || w.cols != query.mat.rows)
    throw contract_error("align_attention: W is " + std::to_string(w.rows) + "x" +
                         std::to_string(w.cols) + " for dimension " +
                         std::to_string(shifted_doc.mat.rows));
  const std::size_t m = shifted_doc.length();
  const std::size_t n = query.length();
  AlignmentMatrix a{Matrix(m, n), AlignStrategy::Attention, AlignDirection::DocToQuery, 1.0};
  std::vector<double> logits(n);
  for (std::size_t i = 0; i < m; ++i) {
    const std::vector<double> dvec = column(shifted_doc.mat, i);
    const std::vector<double> wd = matvec(w, dvec);  // row i of the scores is q_j . W d̂_{i-1}
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < query.mat.rows; ++r) s += query.mat.at(r, j) * wd[r];
      logits[j] = s;
    }
    const std::vector<double> row = softmax_masked(logits, query.mask);
    for (std::size_t j = 0; j < n; ++j) a.mat.at(i, j) = row[j];
  }
  return a;
}

AlignmentMatrix align_exact_lexical(std::span<const TokenId> doc_ids,
                                    std::span<const TokenId> query_ids) {
  AlignmentMatrix a{Matrix(doc_ids.size(), query_ids.size()), AlignStrategy::ExactLexical,
                    AlignDirection::Symmetric, 1.0};
  for (std::size_t i = 0; i < doc_ids.size(); ++i) {
    if (doc_ids[i] == kPad) continue;
    for (std::size_t j = 0; j < query_ids.size(); ++j)
      if (doc_ids[i] == query_ids[j]) a.mat.at(i, j) = 1.0;
  }
  return a;
}

AlignmentMatrix align_salience(const AlignmentMatrix& pairwise, std::span<const double> u_doc,
                               std::span<const double> u_query) {
  if (u_doc.size() != pairwise.mat.rows || u_query.size() != pairwise.mat.cols)
    throw contract_error("align_salience: salience lengths " + std::to_string(u_doc.size()) + "/" +
                         std::to_string(u_query.size()) + " for " +
                         std::to_string(pairwise.mat.rows) + "x" +
                         std::to_string(pairwise.mat.cols) + " alignment");
  for (double v : u_doc)
    if (v < 0.0) throw contract_error("align_salience: negative document salience");
  for (double v : u_query)
    if (v < 0.0) throw contract_error("align_salience: negative query salience");
  AlignmentMatrix a{Matrix(pairwise.mat.rows, pairwise.mat.cols), AlignStrategy::Salience,
                    pairwise.direction, pairwise.z};
  for (std::size_t i = 0; i < a.mat.rows; ++i)
    for (std::size_t j = 0; j < a.mat.cols; ++j)
      a.mat.at(i, j) = pairwise.mat.at(i, j) * u_doc[i] * u_query[j];
  return a;
}

AlignmentMatrix align_single_vector(std::size_t m, std::size_t n, std::size_t cls_doc,
                                    std::size_t cls_query) {
  if (cls_doc >= m || cls_query >= n)
    throw contract_error("align_single_vector: index (" + std::to_string(cls_doc) + "," +
                         std::to_string(cls_query) + ") outside " + std::to_string(m) + "x" +
                         std::to_string(n));
  AlignmentMatrix a{Matrix(m, n), AlignStrategy::SingleVector, AlignDirection::Symmetric, 1.0};
  a.mat.at(cls_doc, cls_query) = 1.0;
  return a;
}

}  // namespace unirel
