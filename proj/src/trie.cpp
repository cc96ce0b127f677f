#include "unirel/trie.hpp"

#include <algorithm>
#include <fstream>

#include "unirel/error.hpp"

namespace unirel {

const NgramTrie::Node* NgramTrie::Node::child(TokenId t) const {
  const auto it = std::lower_bound(children.begin(), children.end(), t,
                                   [](const auto& c, TokenId t) { return c.first < t; });
  if (it == children.end() || it->first != t) return nullptr;
  return it->second.get();
}

namespace {

NgramTrie::Node* child_or_insert(NgramTrie::Node* node, TokenId t) {
  auto it = std::lower_bound(node->children.begin(), node->children.end(), t,
                             [](const auto& c, TokenId t) { return c.first < t; });
  if (it != node->children.end() && it->first == t) return it->second.get();
  it = node->children.emplace(it, t, std::make_unique<NgramTrie::Node>());
  return it->second.get();
}

void add_doc(NgramTrie::Node* node, std::uint32_t doc, std::size_t cap) {
  // docs stay sorted and unique; count remains exact past the cap
  auto it = std::lower_bound(node->docs.begin(), node->docs.end(), doc);
  if (it != node->docs.end() && *it == doc) return;
  ++node->doc_count;
  if (node->docs.size() < cap) node->docs.insert(it, doc);
}

}  // namespace

NgramTrie NgramTrie::build(const Corpus& corpus, std::size_t span_len, std::size_t doc_cap) {
  if (span_len == 0) throw contract_error("trie: span length must be >= 1");
  NgramTrie trie;
  trie.span_len_ = span_len;
  trie.doc_cap_ = doc_cap;
  for (std::size_t di = 0; di < corpus.size(); ++di) {
    const auto& ids = corpus.docs[di].token_ids;
    if (ids.empty()) continue;
    const std::size_t n_spans = ids.size() >= span_len ? ids.size() - span_len + 1 : 1;
    for (std::size_t start = 0; start < n_spans; ++start) {
      const std::size_t len = std::min(span_len, ids.size() - start);
      Node* node = trie.root_.get();
      add_doc(node, static_cast<std::uint32_t>(di), doc_cap);
      for (std::size_t k = 0; k < len; ++k) {
        node = child_or_insert(node, ids[start + k]);
        add_doc(node, static_cast<std::uint32_t>(di), doc_cap);
      }
    }
  }
  return trie;
}

std::vector<TokenId> NgramTrie::continuations(std::span<const TokenId> prefix) const {
  const Node* node = root_.get();
  for (TokenId t : prefix) {
    node = node->child(t);
    if (!node) return {};
  }
  std::vector<TokenId> out;
  out.reserve(node->children.size());
  for (const auto& [t, c] : node->children) out.push_back(t);
  return out;
}

bool NgramTrie::contains_span(const Document& doc, std::span<const TokenId> span) {
  if (span.empty() || span.size() > doc.token_ids.size()) return false;
  const auto& ids = doc.token_ids;
  for (std::size_t start = 0; start + span.size() <= ids.size(); ++start) {
    bool match = true;
    for (std::size_t k = 0; k < span.size(); ++k) {
      if (ids[start + k] != span[k]) {
        match = false;
        break;
      }
    }
    if (match) return true;
  }
  return false;
}

std::vector<std::size_t> NgramTrie::docs_for_span(std::span<const TokenId> span,
                                                  const Corpus& corpus) const {
  const Node* node = root_.get();
  for (TokenId t : span) {
    node = node->child(t);
    if (!node) return {};
  }
  if (node->doc_count == node->docs.size()) {
    return {node->docs.begin(), node->docs.end()};
  }
  // payload truncated at the cap: exact scan
  std::vector<std::size_t> out;
  for (std::size_t di = 0; di < corpus.size(); ++di)
    if (contains_span(corpus.docs[di], span)) out.push_back(di);
  return out;
}

namespace {

void save_node(std::ofstream& out, const NgramTrie::Node& node) {
  auto put_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  put_u32(node.doc_count);
  put_u32(static_cast<std::uint32_t>(node.docs.size()));
  for (std::uint32_t d : node.docs) put_u32(d);
  put_u32(static_cast<std::uint32_t>(node.children.size()));
  for (const auto& [t, c] : node.children) {
    put_u32(static_cast<std::uint32_t>(t));
    save_node(out, *c);
  }
}

void load_node(std::ifstream& in, NgramTrie::Node& node) {
  auto get_u32 = [&] {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  node.doc_count = get_u32();
  node.docs.resize(get_u32());
  for (auto& d : node.docs) d = get_u32();
  const std::uint32_t n = get_u32();
  node.children.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const TokenId t = static_cast<TokenId>(get_u32());
    auto child = std::make_unique<NgramTrie::Node>();
    load_node(in, *child);
    node.children.emplace_back(t, std::move(child));
  }
}

}  // namespace

void NgramTrie::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("trie: cannot write " + path);
  out.write("URTRIE\x01\x00", 8);
  const std::uint64_t sl = span_len_, cap = doc_cap_;
  out.write(reinterpret_cast<const char*>(&sl), 8);
  out.write(reinterpret_cast<const char*>(&cap), 8);
  save_node(out, *root_);
}

NgramTrie NgramTrie::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("trie: cannot read " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string_view(magic, 6) != "URTRIE")
    throw io_error("trie: " + path + " is not an n-gram trie");
  NgramTrie trie;
  std::uint64_t sl = 0, cap = 0;
  in.read(reinterpret_cast<char*>(&sl), 8);
  in.read(reinterpret_cast<char*>(&cap), 8);
  trie.span_len_ = sl;
  trie.doc_cap_ = cap;
  load_node(in, *trie.root_);
  if (!in) throw io_error("trie: " + path + " is truncated");
  return trie;
}

}  // namespace unirel
