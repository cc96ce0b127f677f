#include "unirel/encoding.hpp"

#include <cmath>
#include <string>

#include "unirel/error.hpp"
#include "unirel/linalg.hpp"

namespace unirel {

EmbeddingTable EmbeddingTable::init(std::size_t vocab_size, std::size_t dim, Rng& rng) {
  EmbeddingTable t;
  t.dim = dim;
  t.vectors = Matrix(vocab_size, dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& v : t.vectors.data) v = rng.uniform(-bound, bound);
  return t;
}

std::size_t EncodedSequence::real_count() const {
  std::size_t n = 0;
  for (auto m : mask) n += m;
  return n;
}

AttentionParams AttentionParams::zeros(std::size_t dim) {
  return {Matrix(dim, dim), Matrix(dim, dim), Matrix(dim, dim)};
}

AttentionParams AttentionParams::init(std::size_t dim, Rng& rng) {
  AttentionParams p = zeros(dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  for (Matrix* m : {&p.wk, &p.wq, &p.wv})
    for (double& v : m->data) v = rng.uniform(-bound, bound);
  return p;
}

namespace {

void check_ids(std::span<const TokenId> ids, std::size_t vocab_size, const char* op) {
  for (TokenId id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size)
      throw contract_error(std::string(op) + ": token id " + std::to_string(id) +
                           " outside table of size " + std::to_string(vocab_size));
}

}  // namespace

EncodedSequence embed_static(std::span<const TokenId> ids, const EmbeddingTable& table) {
  check_ids(ids, table.vectors.rows, "embed_static");
  EncodedSequence seq;
  seq.ids.assign(ids.begin(), ids.end());
  seq.mat = Matrix(table.dim, ids.size());
  seq.mask.resize(ids.size());
  for (std::size_t j = 0; j < ids.size(); ++j) {
    seq.mask[j] = ids[j] == kPad ? 0 : 1;
    set_column(seq.mat, j, table.vec(ids[j]));
  }
  return seq;
}

EncodedSequence encode_contextual(std::span<const TokenId> ids, const EmbeddingTable& table,
                                  const AttentionParams& params) {
  EncodedSequence seq = embed_static(ids, table);
  if (seq.real_count() == 0) throw contract_error("encode_contextual: all-padding input");

  const std::size_t d = table.dim;
  const std::size_t len = ids.size();
  const Matrix kx = matmul(params.wk, seq.mat);  // d x len
  const Matrix qx = matmul(params.wq, seq.mat);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  Matrix out = seq.mat;
  std::vector<double> logits(len);
  for (std::size_t j = 0; j < len; ++j) {
    for (std::size_t k = 0; k < len; ++k) {
      double s = 0.0;
      for (std::size_t r = 0; r < d; ++r) s += kx.at(r, j) * qx.at(r, k);
      logits[k] = s * inv_sqrt_d;
    }
    const std::vector<double> w = softmax_masked(logits, seq.mask);
    std::vector<double> ctx(d, 0.0);
    for (std::size_t k = 0; k < len; ++k) {
      if (w[k] == 0.0) continue;
      for (std::size_t r = 0; r < d; ++r) ctx[r] += w[k] * seq.mat.at(r, k);
    }
    const std::vector<double> vctx = matvec(params.wv, ctx);
    for (std::size_t r = 0; r < d; ++r) out.at(r, j) += vctx[r];
  }
  seq.mat = std::move(out);
  return seq;
}

PawaBank::PawaBank(std::size_t positions, std::size_t vocab_size, std::size_t dim)
    : positions_(positions), vocab_(vocab_size), dim_(dim),
      data_(positions * vocab_size * dim * dim, 0.0) {}

double* PawaBank::proj(std::size_t position, TokenId token) {
  if (position >= positions_)
    throw contract_error("pawa: position " + std::to_string(position) + " outside bank of " +
                         std::to_string(positions_) + " positions");
  if (token < 0 || static_cast<std::size_t>(token) >= vocab_)
    throw contract_error("pawa: token id " + std::to_string(token) + " outside bank vocab of " +
                         std::to_string(vocab_));
  return data_.data() + (position * vocab_ + static_cast<std::size_t>(token)) * dim_ * dim_;
}

const double* PawaBank::proj(std::size_t position, TokenId token) const {
  return const_cast<PawaBank*>(this)->proj(position, token);
}

std::vector<double> PawaBank::apply(std::size_t position, TokenId token,
                                    std::span<const double> x) const {
  if (x.size() != dim_) throw contract_error("pawa: latent length mismatch");
  const double* e = proj(position, token);
  std::vector<double> y(dim_, 0.0);
  for (std::size_t i = 0; i < dim_; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) s += e[i * dim_ + j] * x[j];
    y[i] = s;
  }
  return y;
}

PawaBank PawaBank::identity(std::size_t positions, std::size_t vocab_size, std::size_t dim) {
  PawaBank bank(positions, vocab_size, dim);
  for (std::size_t p = 0; p < positions; ++p)
    for (std::size_t v = 0; v < vocab_size; ++v) {
      double* e = bank.proj(p, static_cast<TokenId>(v));
      for (std::size_t i = 0; i < dim; ++i) e[i * dim + i] = 1.0;
    }
  return bank;
}

PawaBank PawaBank::init(std::size_t positions, std::size_t vocab_size, std::size_t dim, Rng& rng) {
  PawaBank bank(positions, vocab_size, dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& v : bank.raw()) v = rng.uniform(-bound, bound);
  return bank;
}

Matrix pawa_encode(std::span<const TokenId> ids, const PawaBank& bank, const Matrix& latents) {
  if (latents.cols != ids.size())
    throw contract_error("pawa_encode: latents have " + std::to_string(latents.cols) +
                         " columns for " + std::to_string(ids.size()) + " positions");
  if (latents.rows != bank.dim()) throw contract_error("pawa_encode: latent dimension mismatch");
  Matrix out(bank.dim(), ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::vector<double> x = column(latents, i);
    const std::vector<double> y = bank.apply(i, ids[i], x);
    set_column(out, i, y);
  }
  return out;
}

void np_store_refresh(ContextualStore& store, const DocEncoder& encoder, std::size_t doc_count,
                      std::uint64_t every_n, std::uint64_t epoch) {
  if (every_n == 0) throw contract_error("np_store_refresh: every_n must be >= 1");
  const bool initial = epoch == 0;
  if (!initial && (every_n == kNeverRefresh || epoch % every_n != 0)) return;
  store.docs.resize(doc_count);
  for (std::size_t i = 0; i < doc_count; ++i) store.docs[i] = encoder(i);
  store.refreshed_at = epoch;
}

std::vector<TokenId> shift_right(std::span<const TokenId> ids, TokenId start) {
  std::vector<TokenId> shifted;
  shifted.reserve(ids.size());
  shifted.push_back(start);
  for (std::size_t i = 0; i + 1 < ids.size(); ++i) shifted.push_back(ids[i]);
  return shifted;
}

}  // namespace unirel
