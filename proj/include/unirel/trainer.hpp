#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "unirel/corpus.hpp"
#include "unirel/encoding.hpp"
#include "unirel/relevance.hpp"
#include "unirel/rng.hpp"

namespace unirel {

enum class Paradigm { Mvdr, Gr, GrPawa, GrNp };

std::string to_string(Paradigm p);
Paradigm paradigm_from_string(const std::string& s);

// Every trainable tensor of the toy models. The embedding table is shared
// between encoder input and the generative prediction head.
struct ModelParams {
  std::size_t dim = 0;
  EmbeddingTable table;
  AttentionParams encoder;
  Matrix w;    // decoder W_K^T W_Q
  Matrix w_v;  // decoder value projection
  std::optional<PawaBank> bank;

  DecoderParams decoder() const { return {w, w_v, table}; }

  static ModelParams init(std::size_t vocab_size, std::size_t dim, Paradigm paradigm,
                          std::size_t pawa_positions, Rng& rng);
};

struct ParamGrads {
  Matrix table;
  Matrix wk, wq, wv;
  Matrix w, w_v;
  std::vector<double> bank;

  static ParamGrads zeros_like(const ModelParams& m);
  void clear();
};

// Flat (pointer, length) views over the tensors a paradigm trains, in a fixed
// order shared between parameters and gradients.
std::vector<std::pair<double*, std::size_t>> trainable_views(ModelParams& m, Paradigm p);
std::vector<std::pair<double*, std::size_t>> trainable_views(ParamGrads& g, Paradigm p);

struct TrainConfig {
  std::uint64_t seed = 1;
  double lr = 1e-2;        // desk-scale default; full-scale runs use 1e-3 at batch 256
  double momentum = 0.9;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  Paradigm paradigm = Paradigm::Mvdr;
  std::size_t negative_samples = 0;  // 0 = full-vocabulary softmax
  std::uint64_t np_refresh_every = 1;
  std::size_t dim = 16;
  std::size_t max_doc_len = 16;   // M for mvdr document encoding
  std::size_t max_query_len = 8;  // N
  std::size_t span_len = 10;      // generative identifier length
};

struct TrainPair {
  std::vector<TokenId> query_ids;  // padded to max_query_len
  std::size_t doc_index = 0;
};

struct TrainResult {
  ModelParams model;
  std::vector<double> loss_curve;  // mean loss per epoch
  ContextualStore store;           // gr-np only
  Matrix np_table;                 // gr-np head, |V| x d
};

// Mini-batch gradient descent with momentum; deterministic under a fixed
// seed. Throws on an empty training set.
TrainResult train(const TrainConfig& config, const Corpus& corpus, std::span<const TrainPair> pairs);

// Teacher-forced CE loss of one example with analytic gradients accumulated
// into `grads`, scaled by `scale`. np_table supplies the frozen head for
// gr-np; nullptr otherwise.
double gr_example_backward(const ModelParams& m, Paradigm paradigm, const Matrix* np_table,
                           std::span<const TokenId> target, std::span<const TokenId> query_ids,
                           std::span<const TokenId> negatives, double scale, ParamGrads& grads);

// In-batch contrastive loss over (query, doc) pairs with top-1 q2d alignment;
// mean over the batch, gradients accumulated into `grads`.
struct MvdrExample {
  std::vector<TokenId> query_ids;
  std::vector<TokenId> doc_ids;
};
double mvdr_batch_backward(const ModelParams& m, std::span<const MvdrExample> batch,
                           ParamGrads& grads);

// Contextual encoding through the model's encoder (query and mvdr documents).
EncodedSequence model_encode(const ModelParams& m, std::span<const TokenId> ids);

// Contextual store over identifier spans plus the per-token mean head matrix.
struct NpArtifacts {
  ContextualStore store;
  Matrix np_table;  // |V| x d
};
NpArtifacts build_np_artifacts(const ModelParams& m, const Corpus& corpus, std::size_t span_len,
                               std::size_t vocab_size, std::uint64_t epoch);

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t coords = 0;
  bool ok(double tol) const { return max_rel_err < tol; }
};

// Central finite differences (step 1e-5) on n_coords randomly chosen
// coordinates of the paradigm's trainable tensors.
GradCheckReport grad_check(ModelParams& params, Paradigm paradigm,
                           const std::function<double()>& loss_at_params,
                           const ParamGrads& analytic, std::size_t n_coords, Rng& rng,
                           double step = 1e-5);

void save_checkpoint(const std::string& path, const ModelParams& model, const TrainConfig& config);
struct Checkpoint {
  ModelParams model;
  TrainConfig config;
};
Checkpoint load_checkpoint(const std::string& path);

void save_loss_curve(const std::string& path, std::span<const double> losses);

// Order-fixed FNV-1a over every parameter byte; identifies the exact
// parameters an artifact (e.g. the token-vector pool) was derived from.
std::uint64_t params_fingerprint(const ModelParams& model);

}  // namespace unirel
