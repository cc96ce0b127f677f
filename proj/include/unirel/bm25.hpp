#pragma once

#include <span>
#include <string>
#include <vector>

#include "unirel/corpus.hpp"
#include "unirel/vocab.hpp"

namespace unirel {

// Okapi BM25 inverted index; k1 = 0.9, b = 0.4 unless overridden.
class Bm25Index {
 public:
  struct Posting {
    std::uint32_t doc = 0;  // corpus position
    std::uint32_t tf = 0;
  };

  static Bm25Index build(const Corpus& corpus, const Vocab& vocab, double k1 = 0.9,
                         double b = 0.4);

  // Descending score; ties broken by ascending document id. Queries with no
  // in-corpus terms return an empty list.
  std::vector<std::pair<std::size_t, double>> topk(std::span<const TokenId> query_ids,
                                                   std::size_t k) const;

  double score(std::size_t doc, std::span<const TokenId> query_ids) const;

  double k1() const { return k1_; }
  double b() const { return b_; }

  void save(const std::string& path) const;
  static Bm25Index load(const std::string& path);

 private:
  double k1_ = 0.9;
  double b_ = 0.4;
  double avg_len_ = 0.0;
  std::vector<double> idf_;                        // by token id
  std::vector<std::uint32_t> doc_len_;             // by corpus position
  std::vector<std::string> doc_ids_;               // by corpus position
  std::vector<std::vector<Posting>> postings_;     // by token id, sorted by doc
};

}  // namespace unirel
