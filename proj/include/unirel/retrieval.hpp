#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "unirel/bm25.hpp"
#include "unirel/corpus.hpp"
#include "unirel/trainer.hpp"
#include "unirel/trie.hpp"

namespace unirel {

struct ScorerConfig {
  Paradigm paradigm = Paradigm::Mvdr;
  AlignStrategy strategy = AlignStrategy::Top1QueryToDoc;  // mvdr alignment
  std::size_t max_doc_len = 16;
  std::size_t max_query_len = 8;
  std::size_t span_len = 10;
};

// Bundles trained parameters with the paradigm's exact scoring rule. All
// scoring is pure; instances are safe to share across threads.
class RelevanceModel {
 public:
  RelevanceModel(ModelParams model, ScorerConfig config);

  // gr-np prediction head (store + per-token table); required for that paradigm
  void set_np(NpArtifacts np);

  const ModelParams& params() const { return model_; }
  const ScorerConfig& config() const { return config_; }
  const NpArtifacts& np() const { return np_; }

  EncodedSequence encode_query(std::span<const TokenId> ids) const;
  EncodedSequence encode_doc_mvdr(const Document& doc) const;

  // identifier token sequence used by the generative paradigms
  std::vector<TokenId> identifier(const Document& doc) const;

  // document-side matrix entering the unified scorer (D, Ẽ_d, projected
  // PAWA embeddings or the stored contextual matrix)
  Matrix doc_representation(const Document& doc, std::size_t doc_index) const;

  AlignmentMatrix alignment(const EncodedSequence& query, const Document& doc,
                            std::size_t doc_index) const;

  RelevanceScore score(const EncodedSequence& query, const Document& doc,
                       std::size_t doc_index) const;

  // next-token logits over the vocabulary given the generated prefix
  std::vector<double> step_logits(const EncodedSequence& query,
                                  std::span<const TokenId> prefix) const;

 private:
  ModelParams model_;
  ScorerConfig config_;
  NpArtifacts np_;
};

struct TokenVectorPool {
  Matrix vectors;                                              // n x d, one row per occurrence
  std::vector<std::pair<std::uint32_t, std::uint32_t>> owner;  // (doc position, token position)
  std::uint64_t params_hash = 0;  // fingerprint of the producing parameters

  static TokenVectorPool build(const RelevanceModel& model, const Corpus& corpus);
  void save(const std::string& path) const;
  static TokenVectorPool load(const std::string& path);
};

struct RankedDoc {
  std::size_t doc_index = 0;
  std::string doc_id;
  double score = 0.0;
};

// Exact multi-vector retrieval: k_token nearest pool vectors per query token
// (brute force), candidate union, exact top-1 q2d rerank.
std::vector<RankedDoc> retrieve_mvdr(const RelevanceModel& model, const Corpus& corpus,
                                     const TokenVectorPool& pool, const EncodedSequence& query,
                                     std::size_t k_token, std::size_t k_final);

struct GeneratedSpan {
  std::vector<TokenId> tokens;
  double log_score = 0.0;
};

struct GrRetrieval {
  std::vector<RankedDoc> ranking;
  std::vector<GeneratedSpan> spans;  // every completed beam, for soundness checks
};

// Constrained beam search over the span trie; document score = best beam
// log-score among its generated spans.
GrRetrieval retrieve_gr(const RelevanceModel& model, const NgramTrie& trie, const Corpus& corpus,
                        const EncodedSequence& query, std::size_t beam, std::size_t span_len);

// Exact scoring of an explicit candidate set; descending score, ties by
// ascending document id.
std::vector<RankedDoc> rerank(const RelevanceModel& model, const Corpus& corpus,
                              const EncodedSequence& query, std::span<const std::size_t> candidates);

// BM25 top-k plus the ground truth, the rerank-protocol candidate set.
std::vector<std::size_t> rerank_candidates(const Bm25Index& bm25, const Corpus& corpus,
                                           std::span<const TokenId> query_ids, std::size_t k,
                                           const std::string& ground_truth_id);

struct RankedQuery {
  std::string qid;
  std::vector<RankedDoc> ranking;
};

using Qrels = std::map<std::string, std::set<std::string>>;

struct EvalReport {
  double recall1 = 0.0;
  double recall10 = 0.0;
  double mrr10 = 0.0;
  std::vector<std::pair<std::string, std::size_t>> per_query_rank;  // 0 = no relevant found
};

// recall@k = fraction of queries with a relevant document in the top k;
// MRR@10 = mean reciprocal rank, 0 past depth 10. Every query must appear in
// the qrels.
EvalReport evaluate(std::span<const RankedQuery> runs, const Qrels& qrels);

// ---- file formats ----

struct QueryFile {
  std::vector<std::pair<std::string, std::string>> queries;  // qid, text
};
QueryFile load_queries(const std::string& path);  // TSV qid<TAB>text
Qrels load_qrels(const std::string& path);        // TSV qid<TAB>docid

// TSV qid<TAB>rank<TAB>docid<TAB>score, scores with 6 decimals.
void save_run(const std::string& path, std::span<const RankedQuery> runs);
std::vector<RankedQuery> load_run(const std::string& path);

}  // namespace unirel
