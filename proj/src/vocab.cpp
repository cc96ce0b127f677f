#include "unirel/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>

#include "unirel/error.hpp"

namespace unirel {

namespace {
const char* kReservedNames[kReservedTokens] = {"[PAD]", "[UNK]", "[BOS]", "[EOS]", "[CLS]"};
}

std::vector<std::string> split_terms(const std::string& text) {
  std::vector<std::string> terms;
  std::string cur;
  for (char c : text) {
    const unsigned char u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      terms.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) terms.push_back(std::move(cur));
  return terms;
}

Vocab::Vocab() {
  for (const char* name : kReservedNames) {
    index_.emplace(name, static_cast<TokenId>(tokens_.size()));
    tokens_.emplace_back(name);
    idf_.push_back(0.0);
  }
}

Vocab Vocab::build(std::span<const std::string> texts, std::size_t max_tokens) {
  if (max_tokens == 0) throw config_error("vocab: max_tokens must be >= 1");
  // ordered map gives the alphabetical tie-break for free
  std::map<std::string, std::size_t> freq;
  for (const auto& text : texts)
    for (auto& term : split_terms(text)) ++freq[term];

  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_tokens) ranked.resize(max_tokens);
  std::sort(ranked.begin(), ranked.end());  // id order independent of corpus order

  Vocab v;
  for (auto& [term, count] : ranked) {
    v.index_.emplace(term, static_cast<TokenId>(v.tokens_.size()));
    v.tokens_.push_back(term);
    v.idf_.push_back(0.0);
  }
  v.recompute_idf(texts);
  return v;
}

void Vocab::recompute_idf(std::span<const std::string> texts) {
  std::vector<std::size_t> df(tokens_.size(), 0);
  for (const auto& text : texts) {
    std::vector<bool> seen(tokens_.size(), false);
    for (auto& term : split_terms(text)) {
      auto it = index_.find(term);
      if (it == index_.end()) continue;
      if (!seen[static_cast<std::size_t>(it->second)]) {
        seen[static_cast<std::size_t>(it->second)] = true;
        ++df[static_cast<std::size_t>(it->second)];
      }
    }
  }
  const double n = static_cast<double>(texts.size());
  for (std::size_t i = kReservedTokens; i < tokens_.size(); ++i) {
    if (df[i] == 0) throw contract_error("vocab: token '" + tokens_[i] + "' has df = 0");
    idf_[i] = std::log(n / static_cast<double>(df[i]));
  }
}

TokenId Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw contract_error("vocab: token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

double Vocab::idf(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= idf_.size())
    throw contract_error("vocab: token id " + std::to_string(id) + " out of range");
  return idf_[static_cast<std::size_t>(id)];
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("vocab: cannot write " + path);
  for (std::size_t i = kReservedTokens; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("vocab: cannot read " + path);
  Vocab v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    v.index_.emplace(line, static_cast<TokenId>(v.tokens_.size()));
    v.tokens_.push_back(line);
    v.idf_.push_back(0.0);
  }
  return v;
}

std::vector<TokenId> tokenize(const std::string& text, const Vocab& vocab, std::size_t max_len) {
  if (max_len == 0) throw contract_error("tokenize: max_len must be >= 1");
  std::vector<TokenId> ids;
  ids.reserve(max_len);
  for (auto& term : split_terms(text)) {
    if (ids.size() == max_len) break;
    ids.push_back(vocab.id(term));
  }
  ids.resize(max_len, kPad);
  return ids;
}

std::string detokenize(std::span<const TokenId> ids, const Vocab& vocab) {
  std::string out;
  for (TokenId id : ids) {
    if (id == kPad) continue;
    if (!out.empty()) out.push_back(' ');
    out += vocab.token(id);
  }
  return out;
}

}  // namespace unirel
