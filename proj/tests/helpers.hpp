#pragma once

#include <string>
#include <vector>

#include "unirel/corpus.hpp"
#include "unirel/encoding.hpp"
#include "unirel/matrix.hpp"
#include "unirel/rng.hpp"

namespace testutil {

inline unirel::Matrix random_matrix(std::size_t r, std::size_t c, unirel::Rng& rng,
                                    double lo = -1.0, double hi = 1.0) {
  unirel::Matrix m(r, c);
  for (double& v : m.data) v = rng.uniform(lo, hi);
  return m;
}

inline std::vector<double> random_vector(std::size_t n, unirel::Rng& rng, double lo = -1.0,
                                         double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// unmasked sequence wrapper around an explicit matrix
inline unirel::EncodedSequence as_sequence(const unirel::Matrix& columns) {
  unirel::EncodedSequence seq;
  seq.mat = columns;
  seq.ids.assign(columns.cols, 5);  // arbitrary non-reserved id
  seq.mask.assign(columns.cols, 1);
  return seq;
}

// Synthetic corpus for memorization runs: each document is a 10-token
// sequence opening with a unique signature pair drawn from a dedicated pool,
// followed by filler tokens. Queries carry both signature tokens plus two
// fillers from their document.
struct SyntheticData {
  unirel::Corpus corpus;
  std::vector<std::string> query_texts;   // query i targets document i
  std::vector<std::string> doc_ids;
  unirel::Vocab vocab;
};

inline SyntheticData make_synthetic(std::size_t n_docs, std::uint64_t seed) {
  using namespace unirel;
  SyntheticData data;
  Rng rng(seed);
  auto sig = [](std::size_t i) { return "s" + std::to_string(i); };      // 30 signature tokens
  auto filler = [](std::size_t i) { return "f" + std::to_string(i); };   // 20 filler tokens

  std::vector<std::string> lines;
  for (std::size_t i = 0; i < n_docs; ++i) {
    const std::string a = sig(i % 20);
    const std::string b = sig(20 + (i / 20 + i % 20) % 10);
    std::vector<std::string> tokens{a, b};
    for (std::size_t k = 0; k < 8; ++k) tokens.push_back(filler(rng.uniform_int(20)));
    std::string text;
    for (const auto& t : tokens) {
      if (!text.empty()) text.push_back(' ');
      text += t;
    }
    Document doc;
    doc.id = "d" + std::to_string(i);
    doc.text = text;
    data.doc_ids.push_back(doc.id);
    data.corpus.index.emplace(doc.id, data.corpus.docs.size());
    data.corpus.docs.push_back(std::move(doc));

    // query: both signature tokens and two document fillers, shuffled
    std::vector<std::string> q{a, b, tokens[2], tokens[3]};
    rng.shuffle(q);
    std::string qtext;
    for (const auto& t : q) {
      if (!qtext.empty()) qtext.push_back(' ');
      qtext += t;
    }
    data.query_texts.push_back(qtext);
  }
  data.vocab = Vocab::build(data.corpus.texts(), 50);
  tokenize_corpus(data.corpus, data.vocab);
  return data;
}

}  // namespace testutil
