#include "unirel/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "unirel/error.hpp"
#include "unirel/linalg.hpp"

namespace unirel {

RelevanceModel::RelevanceModel(ModelParams model, ScorerConfig config)
    : model_(std::move(model)), config_(config) {}

void RelevanceModel::set_np(NpArtifacts np) { np_ = std::move(np); }

EncodedSequence RelevanceModel::encode_query(std::span<const TokenId> ids) const {
  return model_encode(model_, ids);
}

EncodedSequence RelevanceModel::encode_doc_mvdr(const Document& doc) const {
  return model_encode(model_, doc_prefix(doc, config_.max_doc_len, true));
}

std::vector<TokenId> RelevanceModel::identifier(const Document& doc) const {
  std::vector<TokenId> ids = doc_prefix(doc, config_.span_len, false);
  if (ids.empty()) throw contract_error("scorer: document '" + doc.id + "' has no tokens");
  return ids;
}

Matrix RelevanceModel::doc_representation(const Document& doc, std::size_t doc_index) const {
  switch (config_.paradigm) {
    case Paradigm::Mvdr:
      return encode_doc_mvdr(doc).mat;
    case Paradigm::Gr: {
      const std::vector<TokenId> ids = identifier(doc);
      const Matrix wvt = transpose(model_.w_v);
      Matrix out(model_.dim, ids.size());
      for (std::size_t i = 0; i < ids.size(); ++i)
        set_column(out, i, matvec(wvt, model_.table.vec(ids[i])));
      return out;
    }
    case Paradigm::GrPawa: {
      const std::vector<TokenId> ids = identifier(doc);
      if (!model_.bank) throw contract_error("scorer: gr-pawa model has no projection bank");
      const EncodedSequence latents = model_encode(model_, shift_right(ids));
      const Matrix effective = pawa_encode(ids, *model_.bank, latents.mat);
      return matmul(transpose(model_.w_v), effective);
    }
    case Paradigm::GrNp: {
      if (doc_index >= np_.store.docs.size())
        throw contract_error("scorer: document '" + doc.id + "' missing from contextual store");
      return np_.store.docs[doc_index];
    }
  }
  throw contract_error("scorer: unknown paradigm");
}

AlignmentMatrix RelevanceModel::alignment(const EncodedSequence& query, const Document& doc,
                                          std::size_t doc_index) const {
  (void)doc_index;
  if (config_.paradigm == Paradigm::Mvdr) {
    const EncodedSequence d = encode_doc_mvdr(doc);
    switch (config_.strategy) {
      case AlignStrategy::Top1QueryToDoc: return align_top1_q2d(d, query);
      case AlignStrategy::Top1DocToQuery: return align_top1_d2q(d, query);
      case AlignStrategy::ExactLexical: return align_exact_lexical(d.ids, query.ids);
      default:
        throw config_error("scorer: mvdr does not support strategy " + to_string(config_.strategy));
    }
  }
  const std::vector<TokenId> ids = identifier(doc);
  const EncodedSequence shifted = embed_static(shift_right(ids), model_.table);
  return align_attention(shifted, query, model_.w);
}

RelevanceScore RelevanceModel::score(const EncodedSequence& query, const Document& doc,
                                     std::size_t doc_index) const {
  return rel_unified(doc_representation(doc, doc_index), query.mat,
                     alignment(query, doc, doc_index));
}

std::vector<double> RelevanceModel::step_logits(const EncodedSequence& query,
                                                std::span<const TokenId> prefix) const {
  const std::size_t d = model_.dim;
  const std::size_t vocab = model_.table.vectors.rows;
  const TokenId prev = prefix.empty() ? kBos : prefix.back();

  const std::vector<double> wd = matvec(model_.w, model_.table.vec(prev));
  std::vector<double> u(query.length());
  for (std::size_t j = 0; j < query.length(); ++j) {
    double s = 0.0;
    for (std::size_t r = 0; r < d; ++r) s += query.mat.at(r, j) * wd[r];
    u[j] = s;
  }
  const std::vector<double> alpha = softmax_masked(u, query.mask);
  std::vector<double> qa(d, 0.0);
  for (std::size_t j = 0; j < query.length(); ++j) {
    if (alpha[j] == 0.0) continue;
    for (std::size_t r = 0; r < d; ++r) qa[r] += alpha[j] * query.mat.at(r, j);
  }
  const std::vector<double> h = matvec(model_.w_v, qa);

  std::vector<double> logits(vocab);
  switch (config_.paradigm) {
    case Paradigm::GrNp: {
      if (np_.np_table.rows != vocab)
        throw contract_error("scorer: gr-np head table missing; call set_np first");
      for (std::size_t v = 0; v < vocab; ++v) {
        double s = 0.0;
        for (std::size_t r = 0; r < d; ++r) s += np_.np_table.at(v, r) * h[r];
        logits[v] = s;
      }
      break;
    }
    case Paradigm::GrPawa: {
      if (!model_.bank) throw contract_error("scorer: gr-pawa model has no projection bank");
      const std::size_t pos = prefix.size();
      std::vector<TokenId> shifted;
      shifted.reserve(prefix.size() + 1);
      shifted.push_back(kBos);
      shifted.insert(shifted.end(), prefix.begin(), prefix.end());
      const EncodedSequence latents = model_encode(model_, shifted);
      const std::vector<double> lat = column(latents.mat, pos);
      for (std::size_t v = 0; v < vocab; ++v)
        logits[v] = dot(model_.bank->apply(pos, static_cast<TokenId>(v), lat), h);
      break;
    }
    default:
      for (std::size_t v = 0; v < vocab; ++v)
        logits[v] = dot(model_.table.vec(static_cast<TokenId>(v)), h);
  }
  return logits;
}

TokenVectorPool TokenVectorPool::build(const RelevanceModel& model, const Corpus& corpus) {
  TokenVectorPool pool;
  pool.params_hash = params_fingerprint(model.params());
  const std::size_t d = model.params().dim;
  std::size_t count = 0;
  std::vector<EncodedSequence> encoded(corpus.size());
  for (std::size_t di = 0; di < corpus.size(); ++di) {
    encoded[di] = model.encode_doc_mvdr(corpus.docs[di]);
    count += encoded[di].real_count();
  }
  pool.vectors = Matrix(count, d);
  pool.owner.reserve(count);
  std::size_t row = 0;
  for (std::size_t di = 0; di < corpus.size(); ++di) {
    const EncodedSequence& enc = encoded[di];
    for (std::size_t p = 0; p < enc.length(); ++p) {
      if (!enc.mask[p]) continue;
      for (std::size_t r = 0; r < d; ++r) pool.vectors.at(row, r) = enc.mat.at(r, p);
      pool.owner.emplace_back(static_cast<std::uint32_t>(di), static_cast<std::uint32_t>(p));
      ++row;
    }
  }
  return pool;
}

void TokenVectorPool::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("pool: cannot write " + path);
  out.write("URPOOL\x01\x00", 8);
  const std::uint64_t n = vectors.rows, d = vectors.cols;
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(&d), 8);
  out.write(reinterpret_cast<const char*>(&params_hash), 8);
  out.write(reinterpret_cast<const char*>(vectors.data.data()),
            static_cast<std::streamsize>(vectors.data.size() * sizeof(double)));
  for (const auto& [doc, pos] : owner) {
    out.write(reinterpret_cast<const char*>(&doc), 4);
    out.write(reinterpret_cast<const char*>(&pos), 4);
  }
}

TokenVectorPool TokenVectorPool::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("pool: cannot read " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string_view(magic, 6) != "URPOOL")
    throw io_error("pool: " + path + " is not a token-vector pool");
  std::uint64_t n = 0, d = 0;
  in.read(reinterpret_cast<char*>(&n), 8);
  in.read(reinterpret_cast<char*>(&d), 8);
  TokenVectorPool pool;
  in.read(reinterpret_cast<char*>(&pool.params_hash), 8);
  pool.vectors = Matrix(n, d);
  in.read(reinterpret_cast<char*>(pool.vectors.data.data()),
          static_cast<std::streamsize>(n * d * sizeof(double)));
  pool.owner.resize(n);
  for (auto& [doc, pos] : pool.owner) {
    in.read(reinterpret_cast<char*>(&doc), 4);
    in.read(reinterpret_cast<char*>(&pos), 4);
  }
  if (!in) throw io_error("pool: " + path + " is truncated");
  return pool;
}

namespace {

void sort_ranking(std::vector<RankedDoc>& ranking) {
  std::sort(ranking.begin(), ranking.end(), [](const RankedDoc& a, const RankedDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
}

}  // namespace

std::vector<RankedDoc> retrieve_mvdr(const RelevanceModel& model, const Corpus& corpus,
                                     const TokenVectorPool& pool, const EncodedSequence& query,
                                     std::size_t k_token, std::size_t k_final) {
  if (pool.vectors.rows == 0) throw contract_error("retrieve_mvdr: token-vector pool is empty");
  const std::size_t d = pool.vectors.cols;
  std::vector<std::uint8_t> is_candidate(corpus.size(), 0);

  std::vector<double> dots(pool.vectors.rows);
  for (std::size_t j = 0; j < query.length(); ++j) {
    if (!query.mask[j]) continue;
    const std::vector<double> qv = column(query.mat, j);
    const std::int64_t n = static_cast<std::int64_t>(pool.vectors.rows);
#pragma omp parallel for schedule(static) if (pool.vectors.rows > 2048)
    for (std::int64_t i = 0; i < n; ++i) {
      const double* row = pool.vectors.data.data() + static_cast<std::size_t>(i) * d;
      double s = 0.0;
      for (std::size_t r = 0; r < d; ++r) s += row[r] * qv[r];
      dots[static_cast<std::size_t>(i)] = s;
    }
    // top k_token by (dot desc, pool index asc)
    std::vector<std::size_t> idx(pool.vectors.rows);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const std::size_t k = std::min(k_token, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (dots[a] != dots[b]) return dots[a] > dots[b];
                        return a < b;
                      });
    for (std::size_t i = 0; i < k; ++i) is_candidate[pool.owner[idx[i]].first] = 1;
  }

  std::vector<std::size_t> candidates;
  for (std::size_t di = 0; di < corpus.size(); ++di)
    if (is_candidate[di]) candidates.push_back(di);

  std::vector<RankedDoc> ranking(candidates.size());
  const std::int64_t nc = static_cast<std::int64_t>(candidates.size());
#pragma omp parallel for schedule(static) if (candidates.size() > 8)
  for (std::int64_t c = 0; c < nc; ++c) {
    const std::size_t di = candidates[static_cast<std::size_t>(c)];
    const EncodedSequence doc = model.encode_doc_mvdr(corpus.docs[di]);
    const double s = rel_unified(doc.mat, query.mat, align_top1_q2d(doc, query)).value;
    ranking[static_cast<std::size_t>(c)] = {di, corpus.docs[di].id, s};
  }
  sort_ranking(ranking);
  if (ranking.size() > k_final) ranking.resize(k_final);
  return ranking;
}

GrRetrieval retrieve_gr(const RelevanceModel& model, const NgramTrie& trie, const Corpus& corpus,
                        const EncodedSequence& query, std::size_t beam, std::size_t span_len) {
  if (beam == 0) throw contract_error("retrieve_gr: beam width must be >= 1");

  struct BeamItem {
    std::vector<TokenId> prefix;
    double log_score = 0.0;
  };
  std::vector<BeamItem> frontier{{{}, 0.0}};
  GrRetrieval out;

  for (std::size_t step = 0; step < span_len && !frontier.empty(); ++step) {
    std::vector<BeamItem> expanded;
    for (const BeamItem& item : frontier) {
      const std::vector<TokenId> conts = trie.continuations(item.prefix);
      if (conts.empty()) {
        // short document: the whole-document span ended before span_len
        out.spans.push_back({item.prefix, item.log_score});
        continue;
      }
      const std::vector<double> logits = model.step_logits(query, item.prefix);
      double mx = -std::numeric_limits<double>::infinity();
      for (TokenId t : conts) mx = std::max(mx, logits[static_cast<std::size_t>(t)]);
      double sum = 0.0;
      for (TokenId t : conts) sum += std::exp(logits[static_cast<std::size_t>(t)] - mx);
      const double lse = std::log(sum) + mx;
      for (TokenId t : conts) {
        BeamItem next = item;
        next.prefix.push_back(t);
        next.log_score += logits[static_cast<std::size_t>(t)] - lse;
        expanded.push_back(std::move(next));
      }
    }
    std::sort(expanded.begin(), expanded.end(), [](const BeamItem& a, const BeamItem& b) {
      if (a.log_score != b.log_score) return a.log_score > b.log_score;
      return a.prefix < b.prefix;
    });
    if (expanded.size() > beam) expanded.resize(beam);
    frontier = std::move(expanded);
  }
  for (const BeamItem& item : frontier)
    if (!item.prefix.empty()) out.spans.push_back({item.prefix, item.log_score});

  std::map<std::size_t, double> doc_best;
  for (const GeneratedSpan& span : out.spans) {
    for (std::size_t di : trie.docs_for_span(span.tokens, corpus)) {
      auto [it, fresh] = doc_best.emplace(di, span.log_score);
      if (!fresh) it->second = std::max(it->second, span.log_score);
    }
  }
  for (const auto& [di, score] : doc_best)
    out.ranking.push_back({di, corpus.docs[di].id, score});
  sort_ranking(out.ranking);
  return out;
}

std::vector<RankedDoc> rerank(const RelevanceModel& model, const Corpus& corpus,
                              const EncodedSequence& query,
                              std::span<const std::size_t> candidates) {
  if (candidates.empty()) throw contract_error("rerank: empty candidate set");
  std::vector<RankedDoc> ranking(candidates.size());
  const std::int64_t n = static_cast<std::int64_t>(candidates.size());
#pragma omp parallel for schedule(static) if (candidates.size() > 8)
  for (std::int64_t c = 0; c < n; ++c) {
    const std::size_t di = candidates[static_cast<std::size_t>(c)];
    const double s = model.score(query, corpus.docs[di], di).value;
    ranking[static_cast<std::size_t>(c)] = {di, corpus.docs[di].id, s};
  }
  sort_ranking(ranking);
  return ranking;
}

std::vector<std::size_t> rerank_candidates(const Bm25Index& bm25, const Corpus& corpus,
                                           std::span<const TokenId> query_ids, std::size_t k,
                                           const std::string& ground_truth_id) {
  std::vector<std::size_t> candidates;
  for (const auto& [di, score] : bm25.topk(query_ids, k)) candidates.push_back(di);
  const std::size_t truth = corpus.index.at(ground_truth_id);
  if (std::find(candidates.begin(), candidates.end(), truth) == candidates.end())
    candidates.push_back(truth);
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

EvalReport evaluate(std::span<const RankedQuery> runs, const Qrels& qrels) {
  if (runs.empty()) throw contract_error("evaluate: no ranked queries");
  EvalReport report;
  std::size_t hit1 = 0, hit10 = 0;
  double rr = 0.0;
  for (const RankedQuery& run : runs) {
    auto it = qrels.find(run.qid);
    if (it == qrels.end())
      throw contract_error("evaluate: query '" + run.qid + "' missing from qrels");
    const auto& relevant = it->second;
    std::size_t rank = 0;
    for (std::size_t i = 0; i < run.ranking.size(); ++i) {
      if (relevant.count(run.ranking[i].doc_id)) {
        rank = i + 1;
        break;
      }
    }
    report.per_query_rank.emplace_back(run.qid, rank);
    if (rank == 1) ++hit1;
    if (rank >= 1 && rank <= 10) {
      ++hit10;
      rr += 1.0 / static_cast<double>(rank);
    }
  }
  const double n = static_cast<double>(runs.size());
  report.recall1 = static_cast<double>(hit1) / n;
  report.recall10 = static_cast<double>(hit10) / n;
  report.mrr10 = rr / n;
  return report;
}

QueryFile load_queries(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("queries: cannot read " + path);
  QueryFile qf;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw io_error("queries: line " + std::to_string(line_no) + " is not qid<TAB>text");
    qf.queries.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  if (qf.queries.empty()) throw io_error("queries: " + path + " holds no queries");
  return qf;
}

Qrels load_qrels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("qrels: cannot read " + path);
  Qrels qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw io_error("qrels: line " + std::to_string(line_no) + " is not qid<TAB>docid");
    qrels[line.substr(0, tab)].insert(line.substr(tab + 1));
  }
  if (qrels.empty()) throw io_error("qrels: " + path + " holds no judgments");
  return qrels;
}

void save_run(const std::string& path, std::span<const RankedQuery> runs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("run: cannot write " + path);
  char buf[64];
  for (const RankedQuery& run : runs) {
    for (std::size_t i = 0; i < run.ranking.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.6f", run.ranking[i].score);
      out << run.qid << '\t' << i + 1 << '\t' << run.ranking[i].doc_id << '\t' << buf << '\n';
    }
  }
}

std::vector<RankedQuery> load_run(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("run: cannot read " + path);
  std::vector<RankedQuery> runs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string qid, rank_s, docid, score_s;
    if (!std::getline(ss, qid, '\t') || !std::getline(ss, rank_s, '\t') ||
        !std::getline(ss, docid, '\t') || !std::getline(ss, score_s))
      throw io_error("run: malformed line " + std::to_string(line_no));
    if (runs.empty() || runs.back().qid != qid) runs.push_back({qid, {}});
    runs.back().ranking.push_back({0, docid, std::stod(score_s)});
  }
  return runs;
}

}  // namespace unirel
