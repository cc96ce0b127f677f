#include "unirel/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "unirel/analysis.hpp"
#include "unirel/error.hpp"
#include "unirel/retrieval.hpp"

namespace unirel::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct RunConfig {
  std::string corpus, queries, qrels, out = "out";
  std::string checkpoint;  // optional explicit checkpoint path
  std::string run;         // ranked-output path for the report command
  std::size_t vocab_size = 2000;
  std::size_t dim = 16;
  std::size_t max_doc_len = 32;
  std::size_t max_query_len = 8;
  std::string paradigm = "mvdr";
  std::string alignment = "top1-q2d";
  std::size_t span_len = 10;
  std::size_t beam = 10;
  std::size_t k_token = 10;
  std::size_t k_final = 10;
  std::size_t bm25_k = 100;
  std::uint64_t seed = 1;
  int threads = 0;
  // training
  double lr = 1e-2;
  double momentum = 0.9;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  std::size_t negative_samples = 0;
  std::uint64_t np_refresh_every = 1;
  // analysis
  std::size_t buckets = 5;
  bool heatmap = false;
  std::size_t max_queries = 50;

  json canonical() const;
};

// the output directory is run plumbing, not experiment identity; leaving it
// out keeps manifests byte-identical across replicated runs
json RunConfig::canonical() const {
  return json{{"corpus", corpus},
              {"queries", queries},
              {"qrels", qrels},
              {"checkpoint", checkpoint},
              {"run", run},
              {"vocab_size", vocab_size},
              {"dim", dim},
              {"max_doc_len", max_doc_len},
              {"max_query_len", max_query_len},
              {"paradigm", paradigm},
              {"alignment", alignment},
              {"span_len", span_len},
              {"beam", beam},
              {"k_token", k_token},
              {"k_final", k_final},
              {"bm25_k", bm25_k},
              {"seed", seed},
              {"threads", threads},
              {"train", json{{"lr", lr},
                             {"momentum", momentum},
                             {"batch_size", batch_size},
                             {"epochs", epochs},
                             {"negative_samples", negative_samples},
                             {"np_refresh_every", np_refresh_every}}},
              {"analysis",
               json{{"buckets", buckets}, {"heatmap", heatmap}, {"max_queries", max_queries}}}};
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

RunConfig load_config(const std::string& path) {
  RunConfig c;
  if (path.empty()) return c;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("config: cannot read " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw config_error("config: malformed JSON in " + path + ": " + e.what());
  }
  maybe(j, "corpus", c.corpus);
  maybe(j, "queries", c.queries);
  maybe(j, "qrels", c.qrels);
  maybe(j, "out", c.out);
  maybe(j, "checkpoint", c.checkpoint);
  maybe(j, "run", c.run);
  maybe(j, "vocab_size", c.vocab_size);
  maybe(j, "dim", c.dim);
  maybe(j, "max_doc_len", c.max_doc_len);
  maybe(j, "max_query_len", c.max_query_len);
  maybe(j, "paradigm", c.paradigm);
  maybe(j, "alignment", c.alignment);
  maybe(j, "span_len", c.span_len);
  maybe(j, "beam", c.beam);
  maybe(j, "k_token", c.k_token);
  maybe(j, "k_final", c.k_final);
  maybe(j, "bm25_k", c.bm25_k);
  maybe(j, "seed", c.seed);
  maybe(j, "threads", c.threads);
  if (j.contains("train")) {
    const json& t = j.at("train");
    maybe(t, "lr", c.lr);
    maybe(t, "momentum", c.momentum);
    maybe(t, "batch_size", c.batch_size);
    maybe(t, "epochs", c.epochs);
    maybe(t, "negative_samples", c.negative_samples);
    maybe(t, "np_refresh_every", c.np_refresh_every);
  }
  if (j.contains("analysis")) {
    const json& a = j.at("analysis");
    maybe(a, "buckets", c.buckets);
    maybe(a, "heatmap", c.heatmap);
    maybe(a, "max_queries", c.max_queries);
  }
  return c;
}

void validate(const RunConfig& c) {
  if (c.dim == 0 || c.vocab_size == 0 || c.max_doc_len == 0 || c.max_query_len == 0 ||
      c.span_len == 0)
    throw config_error("config: sizes must be >= 1");
  paradigm_from_string(c.paradigm);
  align_strategy_from_string(c.alignment);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

// one run per output directory
class LockFile {
 public:
  explicit LockFile(const fs::path& dir) : path_(dir / ".lock") {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
      throw io_error("output directory " + dir.string() +
                     " is locked by another run (remove " + path_.string() + " if stale)");
    ::close(fd);
  }
  ~LockFile() {
    std::error_code ec;
    fs::remove(path_, ec);
  }

 private:
  fs::path path_;
};

void write_manifest(const RunConfig& c, const std::string& command) {
  const json canon = c.canonical();
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(fnv1a(canon.dump())));
  json manifest{{"command", command},
                {"config", canon},
                {"config_hash", hash},
                {"seed", c.seed},
                {"version", kVersion}};
  std::ofstream out(fs::path(c.out) / ("manifest-" + command + ".json"), std::ios::binary);
  if (!out) throw io_error("manifest: cannot write into " + c.out);
  out << manifest.dump(2) << '\n';
}

fs::path artifact(const RunConfig& c, const char* name) { return fs::path(c.out) / name; }

void require_artifact(const RunConfig& c, const char* name) {
  if (!fs::exists(artifact(c, name)))
    throw config_error(std::string("missing artifact '") + name + "' in " + c.out +
                       "; run the build command first");
}

Corpus load_corpus_with_vocab(const RunConfig& c, Vocab& vocab) {
  if (c.corpus.empty()) throw config_error("config: corpus path is required");
  Corpus corpus = ingest(c.corpus);
  require_artifact(c, "vocab.txt");
  vocab = Vocab::load(artifact(c, "vocab.txt").string());
  vocab.recompute_idf(corpus.texts());
  tokenize_corpus(corpus, vocab);
  return corpus;
}

ScorerConfig scorer_config(const RunConfig& c) {
  ScorerConfig sc;
  sc.paradigm = paradigm_from_string(c.paradigm);
  sc.strategy = align_strategy_from_string(c.alignment);
  sc.max_doc_len = c.max_doc_len;
  sc.max_query_len = c.max_query_len;
  sc.span_len = c.span_len;
  return sc;
}

TrainConfig train_config(const RunConfig& c) {
  TrainConfig tc;
  tc.seed = c.seed;
  tc.lr = c.lr;
  tc.momentum = c.momentum;
  tc.batch_size = c.batch_size;
  tc.epochs = c.epochs;
  tc.paradigm = paradigm_from_string(c.paradigm);
  tc.negative_samples = c.negative_samples;
  tc.np_refresh_every = c.np_refresh_every;
  tc.dim = c.dim;
  tc.max_doc_len = c.max_doc_len;
  tc.max_query_len = c.max_query_len;
  tc.span_len = c.span_len;
  return tc;
}

RelevanceModel load_model(const RunConfig& c, const Corpus& corpus) {
  std::string path = c.checkpoint;
  if (path.empty()) path = artifact(c, "checkpoint.json").string();
  if (!fs::exists(path))
    throw config_error("missing checkpoint " + path + "; run the train command first");
  Checkpoint ck = load_checkpoint(path);
  RelevanceModel model(std::move(ck.model), scorer_config(c));
  if (model.config().paradigm == Paradigm::GrNp)
    model.set_np(build_np_artifacts(model.params(), corpus, c.span_len,
                                    model.params().table.vectors.rows, 0));
  return model;
}

std::vector<RankedQuery> evaluate_and_save(const RunConfig& c,
                                           std::vector<RankedQuery> runs) {
  save_run(artifact(c, "run.tsv").string(), runs);
  if (!c.qrels.empty()) {
    const Qrels qrels = load_qrels(c.qrels);
    const EvalReport report = evaluate(runs, qrels);
    json j{{"recall@1", report.recall1},
           {"recall@10", report.recall10},
           {"mrr@10", report.mrr10},
           {"queries", runs.size()}};
    std::ofstream out(artifact(c, "report.json"), std::ios::binary);
    out << j.dump(2) << '\n';
    std::ofstream txt(artifact(c, "report.txt"), std::ios::binary);
    char buf[128];
    std::snprintf(buf, sizeof buf, "queries %zu\nR@1   %.4f\nR@10  %.4f\nMRR@10 %.4f\n",
                  runs.size(), report.recall1, report.recall10, report.mrr10);
    txt << buf;
  }
  return runs;
}

// ---------------------------------------------------------------------------

void cmd_build(const RunConfig& c) {
  if (c.corpus.empty()) throw config_error("config: corpus path is required");
  Corpus corpus = ingest(c.corpus);
  Vocab vocab = Vocab::build(corpus.texts(), c.vocab_size);
  vocab.save(artifact(c, "vocab.txt").string());
  tokenize_corpus(corpus, vocab);

  Bm25Index::build(corpus, vocab).save(artifact(c, "bm25.bin").string());
  NgramTrie::build(corpus, c.span_len).save(artifact(c, "trie.bin").string());

  // pool from the checkpoint when one exists, else from the seeded init
  ModelParams params;
  const std::string ck = !c.checkpoint.empty()            ? c.checkpoint
                         : fs::exists(artifact(c, "checkpoint.json"))
                             ? artifact(c, "checkpoint.json").string()
                             : std::string{};
  if (!ck.empty()) {
    params = load_checkpoint(ck).model;
  } else {
    Rng rng(c.seed);
    params = ModelParams::init(vocab.size(), c.dim, Paradigm::Mvdr, c.span_len, rng);
  }
  RelevanceModel model(std::move(params), scorer_config(c));
  TokenVectorPool::build(model, corpus).save(artifact(c, "pool.bin").string());
}

void cmd_train(const RunConfig& c) {
  Vocab vocab;
  Corpus corpus = load_corpus_with_vocab(c, vocab);
  if (c.queries.empty() || c.qrels.empty())
    throw config_error("config: train needs queries and qrels");
  const QueryFile queries = load_queries(c.queries);
  const Qrels qrels = load_qrels(c.qrels);

  std::vector<TrainPair> pairs;
  for (const auto& [qid, text] : queries.queries) {
    auto it = qrels.find(qid);
    if (it == qrels.end() || it->second.empty())
      throw config_error("train: query '" + qid + "' has no relevance judgment");
    const std::string& docid = *it->second.begin();
    auto doc = corpus.index.find(docid);
    if (doc == corpus.index.end())
      throw config_error("train: relevant document '" + docid + "' not in corpus");
    pairs.push_back({tokenize(text, vocab, c.max_query_len), doc->second});
  }

  const TrainResult result = train(train_config(c), corpus, pairs);
  save_checkpoint(artifact(c, "checkpoint.json").string(), result.model, train_config(c));
  save_loss_curve(artifact(c, "loss_curve.csv").string(), result.loss_curve);
}

void cmd_retrieve(const RunConfig& c) {
  Vocab vocab;
  Corpus corpus = load_corpus_with_vocab(c, vocab);
  if (c.queries.empty()) throw config_error("config: retrieve needs queries");
  const QueryFile queries = load_queries(c.queries);
  const RelevanceModel model = load_model(c, corpus);

  std::vector<RankedQuery> runs;
  if (model.config().paradigm == Paradigm::Mvdr) {
    require_artifact(c, "pool.bin");
    TokenVectorPool pool = TokenVectorPool::load(artifact(c, "pool.bin").string());
    // a pool built from other parameters (say, before training) is stale;
    // re-derive it from the checkpoint so candidate generation matches scoring
    if (pool.params_hash != params_fingerprint(model.params()))
      pool = TokenVectorPool::build(model, corpus);
    for (const auto& [qid, text] : queries.queries) {
      const EncodedSequence q = model.encode_query(tokenize(text, vocab, c.max_query_len));
      runs.push_back({qid, retrieve_mvdr(model, corpus, pool, q, c.k_token, c.k_final)});
    }
  } else {
    require_artifact(c, "trie.bin");
    const NgramTrie trie = NgramTrie::load(artifact(c, "trie.bin").string());
    for (const auto& [qid, text] : queries.queries) {
      const EncodedSequence q = model.encode_query(tokenize(text, vocab, c.max_query_len));
      GrRetrieval r = retrieve_gr(model, trie, corpus, q, c.beam, c.span_len);
      if (r.ranking.size() > c.k_final) r.ranking.resize(c.k_final);
      runs.push_back({qid, std::move(r.ranking)});
    }
  }
  evaluate_and_save(c, std::move(runs));
}

void cmd_rerank(const RunConfig& c) {
  Vocab vocab;
  Corpus corpus = load_corpus_with_vocab(c, vocab);
  if (c.queries.empty() || c.qrels.empty())
    throw config_error("config: rerank needs queries and qrels");
  const QueryFile queries = load_queries(c.queries);
  const Qrels qrels = load_qrels(c.qrels);
  require_artifact(c, "bm25.bin");
  const Bm25Index bm25 = Bm25Index::load(artifact(c, "bm25.bin").string());
  const RelevanceModel model = load_model(c, corpus);

  std::vector<RankedQuery> runs;
  for (const auto& [qid, text] : queries.queries) {
    auto it = qrels.find(qid);
    if (it == qrels.end() || it->second.empty())
      throw config_error("rerank: query '" + qid + "' has no relevance judgment");
    const std::vector<TokenId> qids = tokenize(text, vocab, c.max_query_len);
    const std::vector<std::size_t> candidates =
        rerank_candidates(bm25, corpus, qids, c.bm25_k, *it->second.begin());
    const EncodedSequence q = model.encode_query(qids);
    runs.push_back({qid, rerank(model, corpus, q, candidates)});
  }
  evaluate_and_save(c, std::move(runs));
}

void cmd_analyze(const RunConfig& c) {
  Vocab vocab;
  Corpus corpus = load_corpus_with_vocab(c, vocab);
  if (c.queries.empty() || c.qrels.empty())
    throw config_error("config: analyze needs queries and qrels");
  const QueryFile queries = load_queries(c.queries);
  const Qrels qrels = load_qrels(c.qrels);
  require_artifact(c, "bm25.bin");
  const Bm25Index bm25 = Bm25Index::load(artifact(c, "bm25.bin").string());
  const RelevanceModel model = load_model(c, corpus);

  const std::vector<double> edges = default_bucket_edges(vocab, c.buckets);
  AlignmentReport q2d, d2q;
  bool first = true;
  std::vector<LowRankInstance> lr_instances;
  std::size_t analyzed = 0;

  for (const auto& [qid, text] : queries.queries) {
    if (analyzed == c.max_queries) break;
    auto it = qrels.find(qid);
    if (it == qrels.end() || it->second.empty()) continue;
    const std::vector<TokenId> qids = tokenize(text, vocab, c.max_query_len);
    const std::vector<std::size_t> candidates =
        rerank_candidates(bm25, corpus, qids, c.bm25_k, *it->second.begin());
    const EncodedSequence q = model.encode_query(qids);
    const AlignmentReport rq = match_rate_q2d(model, vocab, q, corpus, candidates, edges);
    const AlignmentReport rd = match_rate_d2q(model, vocab, q, corpus, candidates, edges);
    if (first) {
      q2d = rq;
      d2q = rd;
      first = false;
    } else {
      q2d.merge(rq);
      d2q.merge(rd);
    }
    const std::size_t truth = corpus.index.at(*it->second.begin());
    lr_instances.push_back({q, truth});

    if (c.heatmap && analyzed == 0) {
      const Document& doc = corpus.docs[truth];
      const AlignmentMatrix a = model.alignment(q, doc, truth);
      std::vector<std::string> doc_tokens, query_tokens;
      const std::vector<TokenId> dids = model.config().paradigm == Paradigm::Mvdr
                                            ? doc_prefix(doc, c.max_doc_len, true)
                                            : model.identifier(doc);
      for (TokenId t : dids) doc_tokens.push_back(vocab.token(t));
      for (TokenId t : qids) query_tokens.push_back(vocab.token(t));
      export_heatmap(a, doc_tokens, query_tokens, artifact(c, "heatmap.csv").string(), true);
    }
    ++analyzed;
  }
  if (first) throw config_error("analyze: no query had relevance judgments");

  save_alignment_report_json(artifact(c, "match_rates.json").string(), q2d, d2q);
  save_alignment_report_text(artifact(c, "match_rates.txt").string(), q2d, d2q);
  if (model.config().paradigm != Paradigm::Mvdr) {
    const LowRankReport lr = lowrank_scan(model, corpus, lr_instances);
    save_lowrank_report(artifact(c, "lowrank.csv").string(),
                        artifact(c, "lowrank.json").string(), lr);
  }
}

void cmd_report(const RunConfig& c) {
  std::string run_path = c.run;
  if (run_path.empty()) run_path = artifact(c, "run.tsv").string();
  if (!fs::exists(run_path))
    throw config_error("report: no ranked output at " + run_path);
  if (c.qrels.empty()) throw config_error("config: report needs qrels");
  const std::vector<RankedQuery> runs = load_run(run_path);
  const Qrels qrels = load_qrels(c.qrels);
  const EvalReport report = evaluate(runs, qrels);

  json j{{"recall@1", report.recall1},
         {"recall@10", report.recall10},
         {"mrr@10", report.mrr10},
         {"queries", runs.size()}};
  std::ofstream out(artifact(c, "report.json"), std::ios::binary);
  if (!out) throw io_error("report: cannot write into " + c.out);
  out << j.dump(2) << '\n';
  std::ofstream txt(artifact(c, "report.txt"), std::ios::binary);
  char buf[128];
  std::snprintf(buf, sizeof buf, "queries %zu\nR@1   %.4f\nR@10  %.4f\nMRR@10 %.4f\n",
                runs.size(), report.recall1, report.recall10, report.mrr10);
  txt << buf;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"unified relevance scoring for multi-vector and generative retrieval"};
  app.require_subcommand(1);

  std::string config_path, out_override;
  std::int64_t seed_override = -1;
  int threads = 0;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed_override, "override the configured seed");
  app.add_option("--out", out_override, "override the output directory");
  app.add_option("--threads", threads, "worker threads (0 = library default)");

  const std::vector<std::string> commands = {"build",  "train",   "retrieve",
                                             "rerank", "analyze", "report"};
  for (const auto& name : commands) app.add_subcommand(name);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      app.exit(e);
      return 0;
    }
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    RunConfig config = load_config(config_path);
    if (seed_override >= 0) config.seed = static_cast<std::uint64_t>(seed_override);
    if (!out_override.empty()) config.out = out_override;
    if (threads > 0) config.threads = threads;
    validate(config);
#ifdef _OPENMP
    if (config.threads > 0) omp_set_num_threads(config.threads);
#endif
    fs::create_directories(config.out);
    LockFile lock{fs::path(config.out)};

    for (const auto& name : commands) {
      if (!app.got_subcommand(name)) continue;
      if (name == "build") cmd_build(config);
      else if (name == "train") cmd_train(config);
      else if (name == "retrieve") cmd_retrieve(config);
      else if (name == "rerank") cmd_rerank(config);
      else if (name == "analyze") cmd_analyze(config);
      else cmd_report(config);
      write_manifest(config, name);
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.code()) {
      case Errc::Config: return 2;
      case Errc::Io: return 3;
      case Errc::Contract: return 4;
    }
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
}

}  // namespace unirel::cli
