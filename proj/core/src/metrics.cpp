#include "walklm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace walklm {

namespace {
void check_inputs(const std::vector<double>& scores, const std::vector<int>& labels,
                  uint64_t& pos, uint64_t& neg) {
  if (scores.size() != labels.size())
    throw std::runtime_error("scores and labels must have the same length");
  if (scores.empty()) throw std::runtime_error("cannot compute metrics on an empty input");
  pos = neg = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw std::runtime_error("scores contain a non-finite value");
    if (labels[i] != 0 && labels[i] != 1) throw std::runtime_error("labels must be 0 or 1");
    (labels[i] ? pos : neg)++;
  }
  if (pos == 0 || neg == 0)
    throw std::runtime_error("metrics undefined for single-class input (" + std::to_string(pos) +
                             " positives, " + std::to_string(neg) + " negatives)");
}
}  // namespace

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  uint64_t pos, neg;
  check_inputs(scores, labels, pos, neg);
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&scores](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Average ranks within tie groups give each tied positive/negative pair
  // exactly half credit, the Mann-Whitney convention.
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));  // 1-based
    for (size_t k = i; k < j; ++k)
      if (labels[order[k]]) rank_sum_pos += avg_rank;
    i = j;
  }
  double p = static_cast<double>(pos);
  double u = rank_sum_pos - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(neg));
}

double average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
  uint64_t pos, neg;
  check_inputs(scores, labels, pos, neg);
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return labels[a] < labels[b];  // negatives first on ties, by convention
  });

  double ap = 0.0;
  uint64_t hits = 0;
  for (size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]]) {
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  return ap / static_cast<double>(pos);
}

MetricsReport compute_metrics(const std::vector<double>& scores, const std::vector<int>& labels) {
  MetricsReport r;
  r.auc = roc_auc(scores, labels);
  r.ap = average_precision(scores, labels);
  for (int l : labels) (l ? r.num_pos : r.num_neg)++;
  return r;
}

std::string format_metrics(const MetricsReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "auc=%.6f ap=%.6f positives=%llu negatives=%llu", r.auc, r.ap,
                static_cast<unsigned long long>(r.num_pos),
                static_cast<unsigned long long>(r.num_neg));
  return buf;
}

}  // namespace walklm
