#include "unirel/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "unirel/error.hpp"
#include "unirel/linalg.hpp"

namespace unirel {

void AlignmentReport::merge(const AlignmentReport& other) {
  if (other.buckets() != buckets() || other.direction != direction)
    throw contract_error("alignment report: cannot merge mismatched reports");
  for (std::size_t b = 0; b < buckets(); ++b) {
    hard_num[b] += other.hard_num[b];
    soft_num[b] += other.soft_num[b];
    denom[b] += other.denom[b];
  }
}

std::vector<double> default_bucket_edges(const Vocab& vocab, std::size_t buckets) {
  if (buckets == 0) throw contract_error("analysis: need at least one idf bucket");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t t = kReservedTokens; t < vocab.size(); ++t) {
    lo = std::min(lo, vocab.idf(static_cast<TokenId>(t)));
    hi = std::max(hi, vocab.idf(static_cast<TokenId>(t)));
  }
  if (!(lo <= hi)) throw contract_error("analysis: vocabulary has no scored tokens");
  if (lo == hi) hi = lo + 1.0;
  std::vector<double> edges(buckets + 1);
  for (std::size_t b = 0; b <= buckets; ++b)
    edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(buckets);
  return edges;
}

namespace {

std::size_t bucket_of(double idf, std::span<const double> edges) {
  const std::size_t buckets = edges.size() - 1;
  if (idf <= edges.front()) return 0;
  if (idf >= edges.back()) return buckets - 1;
  for (std::size_t b = 0; b + 1 < buckets; ++b)
    if (idf < edges[b + 1]) return b;
  return buckets - 1;
}

AlignmentReport empty_report(const std::string& direction, std::span<const double> edges) {
  AlignmentReport r;
  r.direction = direction;
  r.bucket_edges.assign(edges.begin(), edges.end());
  const std::size_t buckets = edges.size() - 1;
  r.hard_num.assign(buckets, 0.0);
  r.soft_num.assign(buckets, 0.0);
  r.denom.assign(buckets, 0);
  return r;
}

struct DocSide {
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> mask;
  Matrix rep;  // d x M
};

DocSide doc_side(const RelevanceModel& model, const Corpus& corpus, std::size_t di) {
  DocSide side;
  const Document& doc = corpus.docs[di];
  if (model.config().paradigm == Paradigm::Mvdr) {
    side.ids = doc_prefix(doc, model.config().max_doc_len, true);
    side.mask.resize(side.ids.size());
    for (std::size_t i = 0; i < side.ids.size(); ++i) side.mask[i] = side.ids[i] == kPad ? 0 : 1;
  } else {
    side.ids = model.identifier(doc);
    side.mask.assign(side.ids.size(), 1);
  }
  side.rep = model.doc_representation(doc, di);
  return side;
}

}  // namespace

AlignmentReport match_rate_q2d(const RelevanceModel& model, const Vocab& vocab,
                               const EncodedSequence& query, const Corpus& corpus,
                               std::span<const std::size_t> candidates,
                               std::span<const double> bucket_edges) {
  if (candidates.empty()) throw contract_error("match_rate: empty candidate set");
  if (query.real_count() == 0) throw contract_error("match_rate: query has no real tokens");
  AlignmentReport report = empty_report("query-to-doc", bucket_edges);
  const bool lexical = model.config().paradigm == Paradigm::Mvdr &&
                       model.config().strategy == AlignStrategy::ExactLexical;

  for (std::size_t di : candidates) {
    const DocSide doc = doc_side(model, corpus, di);
    const Matrix sim = matmul(transpose(doc.rep), query.mat);  // M x N
    for (std::size_t j = 0; j < query.length(); ++j) {
      if (!query.mask[j]) continue;
      const std::size_t b = bucket_of(vocab.idf(query.ids[j]), bucket_edges);
      ++report.denom[b];

      bool hard = false;
      if (lexical) {
        for (std::size_t i = 0; i < doc.ids.size(); ++i)
          if (doc.mask[i] && doc.ids[i] == query.ids[j]) hard = true;
      } else {
        std::size_t best = doc.ids.size();
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < doc.ids.size(); ++i) {
          if (!doc.mask[i]) continue;
          if (sim.at(i, j) > best_score) {
            best_score = sim.at(i, j);
            best = i;
          }
        }
        hard = best < doc.ids.size() && doc.ids[best] == query.ids[j];
      }
      if (hard) report.hard_num[b] += 1.0;

      // column softmax of the similarity matrix over real document positions
      std::vector<double> col(doc.ids.size());
      for (std::size_t i = 0; i < doc.ids.size(); ++i) col[i] = sim.at(i, j);
      const std::vector<double> soft = softmax_masked(col, doc.mask);
      double mass = 0.0;
      for (std::size_t i = 0; i < doc.ids.size(); ++i)
        if (doc.mask[i] && doc.ids[i] == query.ids[j]) mass += soft[i];
      report.soft_num[b] += mass;
    }
  }
  return report;
}

AlignmentReport match_rate_d2q(const RelevanceModel& model, const Vocab& vocab,
                               const EncodedSequence& query, const Corpus& corpus,
                               std::span<const std::size_t> candidates,
                               std::span<const double> bucket_edges) {
  if (candidates.empty()) throw contract_error("match_rate: empty candidate set");
  if (query.real_count() == 0) throw contract_error("match_rate: query has no real tokens");
  AlignmentReport report = empty_report("doc-to-query", bucket_edges);
  const bool generative = model.config().paradigm != Paradigm::Mvdr;

  for (std::size_t di : candidates) {
    const DocSide doc = doc_side(model, corpus, di);
    // generative rows are attention rows; mvdr rows get softmaxed similarity
    Matrix rows;
    if (generative) {
      rows = model.alignment(query, corpus.docs[di], di).mat;
    } else {
      rows = matmul(transpose(doc.rep), query.mat);
    }
    for (std::size_t i = 0; i < doc.ids.size(); ++i) {
      if (!doc.mask[i]) continue;
      const std::size_t b = bucket_of(vocab.idf(doc.ids[i]), bucket_edges);
      ++report.denom[b];

      std::vector<double> row(query.length());
      for (std::size_t j = 0; j < query.length(); ++j) row[j] = rows.at(i, j);
      const std::vector<double> soft =
          generative ? row : softmax_masked(row, query.mask);

      std::size_t best = query.length();
      double best_score = -std::numeric_limits<double>::infinity();
      double mass = 0.0;
      for (std::size_t j = 0; j < query.length(); ++j) {
        if (!query.mask[j]) continue;
        if (soft[j] > best_score) {
          best_score = soft[j];
          best = j;
        }
        if (query.ids[j] == doc.ids[i]) mass += soft[j];
      }
      if (best < query.length() && query.ids[best] == doc.ids[i]) report.hard_num[b] += 1.0;
      report.soft_num[b] += mass;
    }
  }
  return report;
}

LowRankReport lowrank_scan(const RelevanceModel& model, const Corpus& corpus,
                           std::span<const LowRankInstance> instances) {
  if (model.config().paradigm == Paradigm::Mvdr)
    throw contract_error("lowrank_scan: needs a model with an attention alignment");
  LowRankReport report;
  const double w_norm = norm_one(model.params().w);
  for (const LowRankInstance& inst : instances) {
    const AlignmentMatrix a =
        model.alignment(inst.query, corpus.docs[inst.doc_index], inst.doc_index);
    const RankOneFit fit = row_constant_rank_one(a.mat);
    LowRankRecord rec;
    rec.w_norm_one = w_norm;
    rec.resid_frobenius = fit.resid_frobenius;
    rec.resid_one_inf = fit.resid_one_inf;
    const double a_norm = norm_frobenius(a.mat);
    rec.relative_error = a_norm > 0.0 ? fit.resid_frobenius / a_norm : 0.0;
    report.records.push_back(rec);
  }
  if (!report.records.empty()) {
    std::vector<double> errs;
    for (const auto& r : report.records) errs.push_back(r.relative_error);
    std::sort(errs.begin(), errs.end());
    double sum = 0.0;
    for (double e : errs) sum += e;
    report.mean_relative_error = sum / static_cast<double>(errs.size());
    report.median_relative_error = errs[errs.size() / 2];
    report.max_relative_error = errs.back();
  }
  return report;
}

void export_heatmap(const AlignmentMatrix& a, std::span<const std::string> doc_tokens,
                    std::span<const std::string> query_tokens, const std::string& path,
                    bool write_pgm) {
  if (doc_tokens.size() != a.mat.rows || query_tokens.size() != a.mat.cols)
    throw contract_error("heatmap: " + std::to_string(doc_tokens.size()) + "x" +
                         std::to_string(query_tokens.size()) + " labels for " +
                         std::to_string(a.mat.rows) + "x" + std::to_string(a.mat.cols) +
                         " matrix");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("heatmap: cannot write " + path);
  char buf[64];
  for (const auto& q : query_tokens) out << ',' << q;
  out << '\n';
  for (std::size_t i = 0; i < a.mat.rows; ++i) {
    out << doc_tokens[i];
    for (std::size_t j = 0; j < a.mat.cols; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", a.mat.at(i, j));
      out << ',' << buf;
    }
    out << '\n';
  }
  out.close();

  nlohmann::json sidecar{{"strategy", to_string(a.strategy)},
                         {"direction", to_string(a.direction)},
                         {"z", a.z}};
  std::ofstream side(path + ".json", std::ios::binary);
  if (!side) throw io_error("heatmap: cannot write " + path + ".json");
  side << sidecar.dump(2) << '\n';

  if (!write_pgm) return;
  double lo = a.mat.data[0], hi = a.mat.data[0];
  for (double v : a.mat.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::ofstream pgm(path + ".pgm", std::ios::binary);
  if (!pgm) throw io_error("heatmap: cannot write " + path + ".pgm");
  pgm << "P2\n" << a.mat.cols << ' ' << a.mat.rows << "\n255\n";
  for (std::size_t i = 0; i < a.mat.rows; ++i) {
    for (std::size_t j = 0; j < a.mat.cols; ++j) {
      const int g = hi == lo
                        ? 128
                        : static_cast<int>(std::lround((a.mat.at(i, j) - lo) / (hi - lo) * 255.0));
      pgm << g << (j + 1 == a.mat.cols ? '\n' : ' ');
    }
  }
}

HeatmapData read_heatmap_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("heatmap: cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw io_error("heatmap: " + path + " is empty");
  HeatmapData data;
  {
    std::istringstream header(line);
    std::string cell;
    std::getline(header, cell, ',');  // leading empty corner
    while (std::getline(header, cell, ',')) data.query_tokens.push_back(cell);
  }
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    data.doc_tokens.push_back(cell);
    std::size_t n = 0;
    while (std::getline(row, cell, ',')) {
      values.push_back(std::strtod(cell.c_str(), nullptr));
      ++n;
    }
    if (n != data.query_tokens.size())
      throw io_error("heatmap: ragged row in " + path);
  }
  data.mat = Matrix(data.doc_tokens.size(), data.query_tokens.size());
  data.mat.data = std::move(values);
  return data;
}

namespace {

nlohmann::json report_to_json(const AlignmentReport& r) {
  nlohmann::json buckets = nlohmann::json::array();
  for (std::size_t b = 0; b < r.buckets(); ++b) {
    buckets.push_back({{"idf_lo", r.bucket_edges[b]},
                       {"idf_hi", r.bucket_edges[b + 1]},
                       {"pairs", r.denom[b]},
                       {"hard_rate", r.hard_rate(b)},
                       {"soft_rate", r.soft_rate(b)}});
  }
  return {{"direction", r.direction}, {"buckets", buckets}};
}

void print_report(std::ofstream& out, const AlignmentReport& r) {
  out << "direction: " << r.direction << '\n';
  out << "  idf range            pairs   hard    soft\n";
  char buf[128];
  for (std::size_t b = 0; b < r.buckets(); ++b) {
    std::snprintf(buf, sizeof buf, "  [%6.3f, %6.3f)  %7zu  %6.4f  %6.4f\n", r.bucket_edges[b],
                  r.bucket_edges[b + 1], r.denom[b], r.hard_rate(b), r.soft_rate(b));
    out << buf;
  }
}

}  // namespace

void save_alignment_report_json(const std::string& path, const AlignmentReport& q2d,
                                const AlignmentReport& d2q) {
  nlohmann::json j{{"query_to_doc", report_to_json(q2d)}, {"doc_to_query", report_to_json(d2q)}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("report: cannot write " + path);
  out << j.dump(2) << '\n';
}

void save_alignment_report_text(const std::string& path, const AlignmentReport& q2d,
                                const AlignmentReport& d2q) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("report: cannot write " + path);
  out << "exact-match rates by idf bucket\n";
  print_report(out, q2d);
  print_report(out, d2q);
}

void save_lowrank_report(const std::string& csv_path, const std::string& json_path,
                         const LowRankReport& report) {
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw io_error("report: cannot write " + csv_path);
  csv << "w_norm_one,resid_frobenius,resid_one_inf,relative_error\n";
  char buf[160];
  for (const auto& r : report.records) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", r.w_norm_one, r.resid_frobenius,
                  r.resid_one_inf, r.relative_error);
    csv << buf;
  }
  nlohmann::json j{{"instances", report.records.size()},
                   {"mean_relative_error", report.mean_relative_error},
                   {"median_relative_error", report.median_relative_error},
                   {"max_relative_error", report.max_relative_error}};
  std::ofstream js(json_path, std::ios::binary);
  if (!js) throw io_error("report: cannot write " + json_path);
  js << j.dump(2) << '\n';
}

}  // namespace unirel
