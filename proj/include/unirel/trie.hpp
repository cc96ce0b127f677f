#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "unirel/corpus.hpp"
#include "unirel/vocab.hpp"

namespace unirel {

// Trie over corpus token n-grams of span length L. Every stored path is a
// verbatim corpus span. Nodes carry the set of containing documents, capped;
// over-cap lookups fall back to an exact corpus scan.
class NgramTrie {
 public:
  struct Node {
    std::vector<std::pair<TokenId, std::unique_ptr<Node>>> children;  // sorted by token
    std::vector<std::uint32_t> docs;  // containing documents, capped
    std::uint32_t doc_count = 0;      // true count (may exceed docs.size())

    const Node* child(TokenId t) const;
  };

  static NgramTrie build(const Corpus& corpus, std::size_t span_len, std::size_t doc_cap = 64);

  const Node* root() const { return root_.get(); }
  std::size_t span_len() const { return span_len_; }

  // Valid continuations after `prefix`; empty when the prefix leaves the trie.
  std::vector<TokenId> continuations(std::span<const TokenId> prefix) const;

  // Documents containing `span` verbatim. Uses the node payload when complete,
  // otherwise scans the corpus (over-cap fallback).
  std::vector<std::size_t> docs_for_span(std::span<const TokenId> span, const Corpus& corpus) const;

  // True when `span` occurs verbatim in the document's token stream.
  static bool contains_span(const Document& doc, std::span<const TokenId> span);

  void save(const std::string& path) const;
  static NgramTrie load(const std::string& path);

 private:
  std::unique_ptr<Node> root_ = std::make_unique<Node>();
  std::size_t span_len_ = 0;
  std::size_t doc_cap_ = 64;
};

}  // namespace unirel
