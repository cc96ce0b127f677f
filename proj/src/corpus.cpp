#include "unirel/corpus.hpp"

#include <fstream>

#include <json.hpp>

#include "unirel/error.hpp"

namespace unirel {

const Document& Corpus::by_id(const std::string& id) const {
  auto it = index.find(id);
  if (it == index.end()) throw contract_error("corpus: unknown document id '" + id + "'");
  return docs[it->second];
}

double Corpus::avg_token_count() const {
  if (docs.empty()) return 0.0;
  std::size_t total = 0;
  for (const auto& d : docs) total += d.token_ids.size();
  return static_cast<double>(total) / static_cast<double>(docs.size());
}

std::vector<std::string> Corpus::texts() const {
  std::vector<std::string> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(d.text);
  return out;
}

Corpus ingest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("corpus: cannot read " + path);
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw io_error("corpus: malformed JSON at line " + std::to_string(line_no) + ": " +
                     e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj.contains("text") ||
        !obj["id"].is_string() || !obj["text"].is_string())
      throw io_error("corpus: line " + std::to_string(line_no) +
                     " must be an object with string fields 'id' and 'text'");
    Document doc;
    doc.id = obj["id"].get<std::string>();
    doc.text = obj["text"].get<std::string>();
    if (corpus.index.count(doc.id))
      throw io_error("corpus: duplicate document id '" + doc.id + "' at line " +
                     std::to_string(line_no));
    corpus.index.emplace(doc.id, corpus.docs.size());
    corpus.docs.push_back(std::move(doc));
  }
  if (corpus.docs.empty()) throw io_error("corpus: " + path + " holds no documents");
  return corpus;
}

void tokenize_corpus(Corpus& corpus, const Vocab& vocab) {
  for (auto& doc : corpus.docs) {
    doc.token_ids.clear();
    for (auto& term : split_terms(doc.text)) doc.token_ids.push_back(vocab.id(term));
  }
}

std::vector<TokenId> doc_prefix(const Document& doc, std::size_t len, bool pad) {
  std::vector<TokenId> ids(doc.token_ids.begin(),
                           doc.token_ids.begin() +
                               static_cast<std::ptrdiff_t>(std::min(len, doc.token_ids.size())));
  if (pad) ids.resize(len, kPad);
  return ids;
}

}  // namespace unirel
