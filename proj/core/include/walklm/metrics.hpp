#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace walklm {

// Rank-based ROC AUC. Tied scores contribute 1/2 through average ranks.
// Throws if either class is missing or any score is non-finite.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Average precision = mean over positives of precision at their rank in the
// score-descending ordering. Ties are broken pessimistically: at equal score
// negatives are ranked ahead of positives, so AP never benefits from ties.
double average_precision(const std::vector<double>& scores, const std::vector<int>& labels);

struct MetricsReport {
  double auc = 0.0;
  double ap = 0.0;
  uint64_t num_pos = 0;
  uint64_t num_neg = 0;
};

MetricsReport compute_metrics(const std::vector<double>& scores, const std::vector<int>& labels);

// One structured line, e.g. "auc=0.912345 ap=0.567890 positives=200 negatives=2000".
std::string format_metrics(const MetricsReport& r);

}  // namespace walklm
