#include "unirel/bm25.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include "unirel/error.hpp"

namespace unirel {

Bm25Index Bm25Index::build(const Corpus& corpus, const Vocab& vocab, double k1, double b) {
  Bm25Index index;
  index.k1_ = k1;
  index.b_ = b;
  index.idf_.resize(vocab.size(), 0.0);
  for (std::size_t t = kReservedTokens; t < vocab.size(); ++t)
    index.idf_[t] = vocab.idf(static_cast<TokenId>(t));
  index.doc_len_.resize(corpus.size(), 0);
  index.doc_ids_.reserve(corpus.size());
  for (const auto& doc : corpus.docs) index.doc_ids_.push_back(doc.id);
  index.postings_.resize(vocab.size());

  std::size_t total_len = 0;
  for (std::size_t di = 0; di < corpus.size(); ++di) {
    std::map<TokenId, std::uint32_t> tf;  // ordered: postings sorted by construction
    std::uint32_t len = 0;
    for (TokenId t : corpus.docs[di].token_ids) {
      if (t == kPad) continue;
      ++len;
      if (!vocab.is_reserved(t)) ++tf[t];
    }
    index.doc_len_[di] = len;
    total_len += len;
    for (auto [t, f] : tf)
      index.postings_[static_cast<std::size_t>(t)].push_back(
          {static_cast<std::uint32_t>(di), f});
  }
  index.avg_len_ = corpus.size() ? static_cast<double>(total_len) / corpus.size() : 0.0;
  return index;
}

std::vector<std::pair<std::size_t, double>> Bm25Index::topk(std::span<const TokenId> query_ids,
                                                            std::size_t k) const {
  if (k == 0) throw contract_error("bm25: k must be >= 1");
  std::vector<double> scores(doc_len_.size(), 0.0);
  std::vector<std::uint8_t> touched(doc_len_.size(), 0);
  for (TokenId t : query_ids) {
    if (t < 0 || static_cast<std::size_t>(t) >= postings_.size()) continue;
    if (static_cast<std::size_t>(t) < kReservedTokens) continue;
    const double idf = idf_[static_cast<std::size_t>(t)];
    for (const Posting& p : postings_[static_cast<std::size_t>(t)]) {
      const double tf = static_cast<double>(p.tf);
      const double norm = 1.0 - b_ + b_ * static_cast<double>(doc_len_[p.doc]) / avg_len_;
      scores[p.doc] += idf * (tf * (k1_ + 1.0)) / (tf + k1_ * norm);
      touched[p.doc] = 1;
    }
  }
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t d = 0; d < scores.size(); ++d)
    if (touched[d]) out.emplace_back(d, scores[d]);
  std::sort(out.begin(), out.end(), [this](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return doc_ids_[a.first] < doc_ids_[b.first];
  });
  if (out.size() > k) out.resize(k);
  return out;
}

double Bm25Index::score(std::size_t doc, std::span<const TokenId> query_ids) const {
  double s = 0.0;
  for (TokenId t : query_ids) {
    if (t < 0 || static_cast<std::size_t>(t) >= postings_.size()) continue;
    if (static_cast<std::size_t>(t) < kReservedTokens) continue;
    const auto& plist = postings_[static_cast<std::size_t>(t)];
    const auto it = std::lower_bound(
        plist.begin(), plist.end(), doc,
        [](const Posting& p, std::size_t d) { return p.doc < d; });
    if (it == plist.end() || it->doc != doc) continue;
    const double tf = static_cast<double>(it->tf);
    const double norm = 1.0 - b_ + b_ * static_cast<double>(doc_len_[doc]) / avg_len_;
    s += idf_[static_cast<std::size_t>(t)] * (tf * (k1_ + 1.0)) / (tf + k1_ * norm);
  }
  return s;
}

void Bm25Index::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("bm25: cannot write " + path);
  auto put_u64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
  auto put_f64 = [&](double v) { out.write(reinterpret_cast<const char*>(&v), 8); };
  out.write("URBM25\x01\x00", 8);
  put_f64(k1_);
  put_f64(b_);
  put_f64(avg_len_);
  put_u64(idf_.size());
  for (double v : idf_) put_f64(v);
  put_u64(doc_len_.size());
  for (std::uint32_t v : doc_len_) out.write(reinterpret_cast<const char*>(&v), 4);
  for (const std::string& id : doc_ids_) {
    const std::uint32_t n = static_cast<std::uint32_t>(id.size());
    out.write(reinterpret_cast<const char*>(&n), 4);
    out.write(id.data(), n);
  }
  put_u64(postings_.size());
  for (const auto& plist : postings_) {
    put_u64(plist.size());
    for (const Posting& p : plist) {
      out.write(reinterpret_cast<const char*>(&p.doc), 4);
      out.write(reinterpret_cast<const char*>(&p.tf), 4);
    }
  }
}

Bm25Index Bm25Index::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("bm25: cannot read " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string_view(magic, 6) != "URBM25")
    throw io_error("bm25: " + path + " is not a bm25 index");
  Bm25Index index;
  auto get_u64 = [&] {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  auto get_f64 = [&] {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  index.k1_ = get_f64();
  index.b_ = get_f64();
  index.avg_len_ = get_f64();
  index.idf_.resize(get_u64());
  for (double& v : index.idf_) v = get_f64();
  index.doc_len_.resize(get_u64());
  for (auto& v : index.doc_len_) in.read(reinterpret_cast<char*>(&v), 4);
  index.doc_ids_.resize(index.doc_len_.size());
  for (auto& id : index.doc_ids_) {
    std::uint32_t n = 0;
    in.read(reinterpret_cast<char*>(&n), 4);
    id.resize(n);
    in.read(id.data(), n);
  }
  index.postings_.resize(get_u64());
  for (auto& plist : index.postings_) {
    plist.resize(get_u64());
    for (Posting& p : plist) {
      in.read(reinterpret_cast<char*>(&p.doc), 4);
      in.read(reinterpret_cast<char*>(&p.tf), 4);
    }
  }
  if (!in) throw io_error("bm25: " + path + " is truncated");
  return index;
}

}  // namespace unirel
