#include "walklm/detector.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace walklm {

ScoreReport score_report(const WalkData& wd, const Checkpoint& ckpt, FinetuneMode head,
                         const std::vector<EdgeRecord>& edges, const std::vector<int>& labels,
                         int walk_hops, uint64_t seed, int workers) {
  if (edges.empty()) throw std::runtime_error("cannot score an empty edge set");
  if (!labels.empty() && labels.size() != edges.size())
    throw std::runtime_error("labels must be empty or aligned with the edges");
  ckpt.require_vocab_hash(wd.vocab.hash());

  std::vector<double> scores =
      score_edges(wd, ckpt.model, ckpt.walk_mode, head, edges, walk_hops, seed, workers);

  ScoreReport report;
  report.edges.reserve(edges.size());
  for (size_t i = 0; i < edges.size(); ++i)
    report.edges.push_back({edges[i], scores[i], labels.empty() ? -1 : labels[i]});

  if (!labels.empty()) {
    bool has_pos = false, has_neg = false;
    for (int l : labels) (l ? has_pos : has_neg) = true;
    if (has_pos && has_neg) {
      report.metrics = compute_metrics(scores, labels);
      report.metrics_defined = true;
    }
  }
  return report;
}

void write_scores_csv(const std::string& path, const std::vector<ScoredEdge>& rows,
                      const std::vector<std::string>& entities) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  auto name = [&](NodeId n) -> std::string {
    if (entities.empty()) return std::to_string(n);
    if (n >= entities.size()) throw std::runtime_error("node id outside the entity table");
    return entities[n];
  };
  os << "src,dst,ts,score,label\n";
  char buf[96];
  for (const ScoredEdge& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g", r.edge.ts, r.score);
    os << name(r.edge.src) << ',' << name(r.edge.dst) << ',' << buf << ',';
    if (r.label >= 0) os << r.label;
    os << '\n';
  }
  if (!os) throw std::runtime_error("write failure on '" + path + "'");
}

ScoresFile read_scores_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open scores file '" + path + "'");
  std::string line;
  if (!std::getline(is, line) || line != "src,dst,ts,score,label")
    throw std::runtime_error("'" + path + "' is not a scores CSV (bad header)");
  ScoresFile out;
  uint64_t row_no = 1;
  while (std::getline(is, line)) {
    ++row_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() == 4 && line.back() == ',') f.emplace_back();  // empty trailing label
    if (f.size() != 5) throw std::runtime_error("bad scores row " + std::to_string(row_no));
    try {
      out.scores.push_back(std::stod(f[3]));
    } catch (const std::exception&) {
      throw std::runtime_error("bad score in row " + std::to_string(row_no));
    }
    if (f[4].empty()) {
      out.labels.push_back(-1);
    } else if (f[4] == "0" || f[4] == "1") {
      out.labels.push_back(f[4] == "1" ? 1 : 0);
    } else {
      throw std::runtime_error("bad label in row " + std::to_string(row_no));
    }
  }
  return out;
}

}  // namespace walklm
