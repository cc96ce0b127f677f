#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "unirel/matrix.hpp"
#include "unirel/rng.hpp"
#include "unirel/vocab.hpp"

namespace unirel {

// One d-vector per vocabulary token, stored as row `id` of `vectors`.
struct EmbeddingTable {
  std::size_t dim = 0;
  Matrix vectors;  // |V| x d

  std::span<const double> vec(TokenId id) const {
    return {vectors.data.data() + static_cast<std::size_t>(id) * dim, dim};
  }

  static EmbeddingTable init(std::size_t vocab_size, std::size_t dim, Rng& rng);
};

// Token ids plus their column-per-position vector matrix and a padding mask.
struct EncodedSequence {
  std::vector<TokenId> ids;
  Matrix mat;                       // d x len
  std::vector<std::uint8_t> mask;   // 1 = real token, 0 = padding

  std::size_t length() const { return ids.size(); }
  std::size_t real_count() const;
};

// Single-head scaled-dot-product self-attention parameters.
struct AttentionParams {
  Matrix wk, wq, wv;  // each d x d

  static AttentionParams zeros(std::size_t dim);
  static AttentionParams init(std::size_t dim, Rng& rng);
};

// Column i = table vector of ids[i].
EncodedSequence embed_static(std::span<const TokenId> ids, const EmbeddingTable& table);

// One self-attention layer with a residual connection and no nonlinearity:
//   out_j = x_j + Wv * sum_k softmax_k(<Wk x_j, Wq x_k> / sqrt(d)) x_k
// Padded positions are masked out of the softmax. Throws on all-padding input.
EncodedSequence encode_contextual(std::span<const TokenId> ids, const EmbeddingTable& table,
                                  const AttentionParams& params);

// Per-position, per-token d x d projection bank.
class PawaBank {
 public:
  PawaBank(std::size_t positions, std::size_t vocab_size, std::size_t dim);

  std::size_t positions() const { return positions_; }
  std::size_t vocab_size() const { return vocab_; }
  std::size_t dim() const { return dim_; }

  double* proj(std::size_t position, TokenId token);
  const double* proj(std::size_t position, TokenId token) const;  // d x d row-major

  // y = E[position, token] * x
  std::vector<double> apply(std::size_t position, TokenId token, std::span<const double> x) const;

  static PawaBank identity(std::size_t positions, std::size_t vocab_size, std::size_t dim);
  static PawaBank init(std::size_t positions, std::size_t vocab_size, std::size_t dim, Rng& rng);

  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

 private:
  std::size_t positions_, vocab_, dim_;
  std::vector<double> data_;
};

// Column i of the result = bank projection of token ids[i] at position i
// applied to latent column i.
Matrix pawa_encode(std::span<const TokenId> ids, const PawaBank& bank, const Matrix& latents);

// Frozen contextual document matrices used as the decoder's prediction head.
struct ContextualStore {
  std::vector<Matrix> docs;        // indexed by corpus document position
  std::uint64_t refreshed_at = 0;  // epoch of the most recent refresh
};

constexpr std::uint64_t kNeverRefresh = std::numeric_limits<std::uint64_t>::max();

using DocEncoder = std::function<Matrix(std::size_t doc_index)>;

// Re-encodes every document when epoch % every_n == 0; otherwise leaves the
// store untouched. every_n = kNeverRefresh refreshes only at epoch 0.
void np_store_refresh(ContextualStore& store, const DocEncoder& encoder, std::size_t doc_count,
                      std::uint64_t every_n, std::uint64_t epoch);

// [BOS, ids[0], ..., ids[M-2]]; `start` swaps in an alternative first token.
std::vector<TokenId> shift_right(std::span<const TokenId> ids, TokenId start = kBos);

}  // namespace unirel
