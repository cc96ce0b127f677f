#pragma once

#include <span>
#include <vector>

#include "unirel/alignment.hpp"
#include "unirel/encoding.hpp"
#include "unirel/matrix.hpp"

namespace unirel {

// Cross-attention decoder parameters: w is the key/query product W_K^T W_Q,
// w_v the value projection, table the shared embedding lookup.
struct DecoderParams {
  Matrix w;    // d x d
  Matrix w_v;  // d x d
  EmbeddingTable table;
};

struct RelevanceScore {
  double value = 0.0;
  std::vector<double> doc_contrib;    // per document position, sums to value
  std::vector<double> query_contrib;  // per query position, sums to value
};

// value = (1/z) * sum_ij d_i.q_j * A_ij, with both marginal decompositions.
RelevanceScore rel_unified(const Matrix& d_like, const Matrix& q, const AlignmentMatrix& a);

// sum(W_V^T E_d ^T Q ⊙ A) with A the cross-attention alignment over the
// right-shifted identifier.  Equals the decoder forward pass sum_i e_{d_i}.h_i.
RelevanceScore rel_gr(std::span<const TokenId> doc_ids, const EncodedSequence& query,
                      const DecoderParams& params, TokenId start = kBos);

// Literal forward pass of the decoder: attention weights, prediction head,
// position logit e_{d_i}.h_i per position.
std::vector<double> gr_forward_logits(std::span<const TokenId> doc_ids,
                                      const EncodedSequence& query, const DecoderParams& params,
                                      TokenId start = kBos);

struct CeLoss {
  double total = 0.0;
  std::vector<double> position_loss;  // one per identifier position
  std::vector<double> target_logit;   // e_{d_i}.h_i per position
};

// Teacher-forced cross-entropy over the identifier. With an empty negative
// sample the denominator runs over the full vocabulary; otherwise over
// {target} ∪ negatives.
CeLoss loss_ce_teacher_forcing(std::span<const TokenId> doc_ids, const EncodedSequence& query,
                               const DecoderParams& params,
                               std::span<const TokenId> negatives = {}, TokenId start = kBos);

// -log( exp(scores[positive]) / sum_b exp(scores[b]) ); scores include the positive.
double contrastive_from_scores(std::span<const double> scores, std::size_t positive);

// Contrastive loss of a positive document against a negative batch under the
// given alignment strategy (top1-q2d or top1-d2q).
double loss_contrastive(const EncodedSequence& doc, const EncodedSequence& query,
                        AlignStrategy strategy, std::span<const EncodedSequence> negatives);

// PAWA relevance: position i contributes (E_{i,d_i} latent_i) . h_i. The
// block-diagonal latent structure is exploited implicitly.
RelevanceScore rel_pawa(std::span<const TokenId> doc_ids, const EncodedSequence& query,
                        const DecoderParams& params, const PawaBank& bank, const Matrix& latents,
                        TokenId start = kBos);

// Nonparametric relevance: stored contextual vectors replace the embedding
// head, alignment still comes from the shifted static embeddings.
RelevanceScore rel_np(std::span<const TokenId> doc_ids, const Matrix& stored_doc,
                      const EncodedSequence& query, const DecoderParams& params,
                      TokenId start = kBos);

// phi(x) = elu(x) + 1 elementwise; strictly positive.
std::vector<double> feature_map_elu1(std::span<const double> x);

// F(x) = x phi(x)^T
Matrix feature_outer(std::span<const double> x);

struct KernelizedScore {
  double value = 0.0;          // sum_ij tr(F(d_i)^T F(q_j)) / p_i, row-normalized
  bool bound_holds = true;     // per-pair Cauchy-Schwarz trace bound
  double max_violation = 0.0;  // largest lhs - rhs over pairs (<= 0 when bound holds)
};

// Kernelized relevance over column-per-token matrices; p_i = sum_j phi(d_i).phi(q_j).
KernelizedScore rel_kernelized(const Matrix& d, const Matrix& q);

}  // namespace unirel
