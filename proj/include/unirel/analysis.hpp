#pragma once

#include <span>
#include <string>
#include <vector>

#include "unirel/retrieval.hpp"

namespace unirel {

// Hard/soft exact-match rates per IDF bucket; numerators and denominators are
// kept so reports merge exactly across queries.
struct AlignmentReport {
  std::string direction;
  std::vector<double> bucket_edges;  // size buckets + 1
  std::vector<double> hard_num, soft_num;
  std::vector<std::size_t> denom;  // (token, candidate) pairs per bucket

  std::size_t buckets() const { return denom.size(); }
  double hard_rate(std::size_t b) const { return denom[b] ? hard_num[b] / denom[b] : 0.0; }
  double soft_rate(std::size_t b) const { return denom[b] ? soft_num[b] / denom[b] : 0.0; }
  void merge(const AlignmentReport& other);
};

// Equal-width bucket edges over the vocabulary's observed idf range.
std::vector<double> default_bucket_edges(const Vocab& vocab, std::size_t buckets);

// Query-to-document direction: for each non-pad query token and candidate,
// hard = top-1 aligned document token carries the same id; soft = column
// softmax mass of the similarity matrix on id-matching document tokens.
AlignmentReport match_rate_q2d(const RelevanceModel& model, const Vocab& vocab,
                               const EncodedSequence& query, const Corpus& corpus,
                               std::span<const std::size_t> candidates,
                               std::span<const double> bucket_edges);

// Document-to-query mirror, bucketed by document-token idf; rows of the
// generative alignment are already softmax rows, mvdr rows are softmaxed over
// the similarity matrix.
AlignmentReport match_rate_d2q(const RelevanceModel& model, const Vocab& vocab,
                               const EncodedSequence& query, const Corpus& corpus,
                               std::span<const std::size_t> candidates,
                               std::span<const double> bucket_edges);

struct LowRankRecord {
  double w_norm_one = 0.0;        // ||W||_1
  double resid_frobenius = 0.0;   // ||A - R||_F
  double resid_one_inf = 0.0;     // ||A - R||_(1,inf)
  double relative_error = 0.0;    // ||A - R||_F / ||A||_F
};

struct LowRankReport {
  std::vector<LowRankRecord> records;
  double mean_relative_error = 0.0;
  double median_relative_error = 0.0;
  double max_relative_error = 0.0;
};

struct LowRankInstance {
  EncodedSequence query;
  std::size_t doc_index = 0;
};

// Row-constant rank-one diagnostics of the attention alignment per instance.
LowRankReport lowrank_scan(const RelevanceModel& model, const Corpus& corpus,
                           std::span<const LowRankInstance> instances);

// CSV with labeled axes plus a JSON sidecar {strategy, direction, z}; the
// optional PGM is 8-bit grayscale with min-max scaling (constant matrices map
// to mid-gray).
void export_heatmap(const AlignmentMatrix& a, std::span<const std::string> doc_tokens,
                    std::span<const std::string> query_tokens, const std::string& path,
                    bool write_pgm = false);

struct HeatmapData {
  Matrix mat;
  std::vector<std::string> doc_tokens;
  std::vector<std::string> query_tokens;
};
HeatmapData read_heatmap_csv(const std::string& path);

void save_alignment_report_json(const std::string& path, const AlignmentReport& q2d,
                                const AlignmentReport& d2q);
void save_alignment_report_text(const std::string& path, const AlignmentReport& q2d,
                                const AlignmentReport& d2q);
void save_lowrank_report(const std::string& csv_path, const std::string& json_path,
                         const LowRankReport& report);

}  // namespace unirel
