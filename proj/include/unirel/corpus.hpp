#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "unirel/vocab.hpp"

namespace unirel {

struct Document {
  std::string id;
  std::string text;
  std::vector<TokenId> token_ids;  // full document, no padding
};

struct Corpus {
  std::vector<Document> docs;
  std::unordered_map<std::string, std::size_t> index;  // document id -> position

  std::size_t size() const { return docs.size(); }
  const Document& by_id(const std::string& id) const;
  double avg_token_count() const;
  std::vector<std::string> texts() const;
};

// JSON-lines ingestion, one {"id": ..., "text": ...} object per line.
// Malformed lines are reported with their line number; duplicate ids and
// empty files are rejected.
Corpus ingest(const std::string& path);

// Fills token_ids for every document (kUnk for out-of-vocabulary terms).
void tokenize_corpus(Corpus& corpus, const Vocab& vocab);

// First `len` token ids, right-padded with kPad when requested.
std::vector<TokenId> doc_prefix(const Document& doc, std::size_t len, bool pad);

}  // namespace unirel
