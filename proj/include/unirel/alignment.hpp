#pragma once

#include <span>
#include <string>

#include "unirel/encoding.hpp"
#include "unirel/matrix.hpp"

namespace unirel {

enum class AlignStrategy {
  Top1QueryToDoc,  // one-hot per column, MaxSim
  Top1DocToQuery,  // one-hot per row
  Attention,       // row-wise softmax of shifted-doc / query scores
  ExactLexical,    // 1 where token ids are equal
  Salience,        // pairwise matrix times rank-one salience
  SingleVector,    // single nonzero at the CLS/CLS cell
};

enum class AlignDirection { QueryToDoc, DocToQuery, Symmetric };

std::string to_string(AlignStrategy s);
std::string to_string(AlignDirection d);
AlignStrategy align_strategy_from_string(const std::string& s);
AlignDirection align_direction_from_string(const std::string& s);

// M x N nonnegative alignment matrix plus strategy metadata and normalizer.
struct AlignmentMatrix {
  Matrix mat;
  AlignStrategy strategy = AlignStrategy::Top1QueryToDoc;
  AlignDirection direction = AlignDirection::QueryToDoc;
  double z = 1.0;
};

// Sets z = sum of entries (errors when the sum is not positive).
AlignmentMatrix normalized(AlignmentMatrix a);

// A_ij = 1 iff document token i maximizes d_i.q_j in column j; ties go to the
// lowest document index. Padded positions never align. Throws on an all-pad query.
AlignmentMatrix align_top1_q2d(const EncodedSequence& doc, const EncodedSequence& query);

// Row-wise mirror: each document token selects its best query token.
AlignmentMatrix align_top1_d2q(const EncodedSequence& doc, const EncodedSequence& query);

// Row i = softmax over valid query positions j of q_j . (W shifted_doc_i).
AlignmentMatrix align_attention(const EncodedSequence& shifted_doc, const EncodedSequence& query,
                                const Matrix& w);

// A_ij = 1 iff doc id i equals query id j and neither is padding.
AlignmentMatrix align_exact_lexical(std::span<const TokenId> doc_ids,
                                    std::span<const TokenId> query_ids);

// A = pairwise ⊙ u_doc u_query^T; salience entries must be nonnegative.
AlignmentMatrix align_salience(const AlignmentMatrix& pairwise, std::span<const double> u_doc,
                               std::span<const double> u_query);

// Single 1 at (cls_doc, cls_query).
AlignmentMatrix align_single_vector(std::size_t m, std::size_t n, std::size_t cls_doc,
                                    std::size_t cls_query);

}  // namespace unirel
