#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace unirel {

using TokenId = std::int32_t;

constexpr TokenId kPad = 0;
constexpr TokenId kUnk = 1;
constexpr TokenId kBos = 2;
constexpr TokenId kEos = 3;
constexpr TokenId kCls = 4;
constexpr std::size_t kReservedTokens = 5;

// lowercase text split into alphanumeric runs
std::vector<std::string> split_terms(const std::string& text);

// Token-string <-> dense-id mapping with idf = ln(corpus size / df).
// Ids 0..4 are reserved; real tokens start at 5.
class Vocab {
 public:
  Vocab();  // reserved tokens only

  // Keeps the max_tokens most frequent terms; ties broken alphabetically.
  static Vocab build(std::span<const std::string> texts, std::size_t max_tokens);

  TokenId id(const std::string& token) const;  // kUnk when absent
  const std::string& token(TokenId id) const;
  bool is_reserved(TokenId id) const { return id >= 0 && id < static_cast<TokenId>(kReservedTokens); }
  double idf(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }

  // one token per line; line number = id - kReservedTokens
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);
  // idf is not persisted; recompute it against a corpus after load
  void recompute_idf(std::span<const std::string> texts);

 private:
  std::vector<std::string> tokens_;
  std::vector<double> idf_;
  std::unordered_map<std::string, TokenId> index_;
};

// Lowercase, split on non-alphanumeric runs, map to ids (kUnk for
// out-of-vocabulary), then truncate or right-pad with kPad to max_len.
std::vector<TokenId> tokenize(const std::string& text, const Vocab& vocab, std::size_t max_len);

// Space-joined token strings, skipping padding.
std::string detokenize(std::span<const TokenId> ids, const Vocab& vocab);

}  // namespace unirel
