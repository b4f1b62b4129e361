#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "walklm/metrics.hpp"
#include "walklm/rng.hpp"

using namespace walklm;

namespace {

// O(P*N) AUC oracle: P(score_pos > score_neg) + 0.5 P(equal).
double auc_brute(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      ++pairs;
      if (s[i] > s[j])
        wins += 1.0;
      else if (s[i] == s[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

// AP oracle by explicit sort, negatives ahead of positives at equal score.
double ap_brute(const std::vector<double>& s, const std::vector<int>& y) {
  std::vector<size_t> order(s.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (s[a] != s[b]) return s[a] > s[b];
    return y[a] < y[b];  // pessimistic: negative first on ties
  });
  double tp = 0.0, ap = 0.0, num_pos = 0.0;
  for (int v : y) num_pos += v;
  for (size_t r = 0; r < order.size(); ++r) {
    if (y[order[r]]) {
      tp += 1.0;
      ap += tp / static_cast<double>(r + 1);
    }
  }
  return ap / num_pos;
}

}  // namespace

TEST_CASE("hand-checked values") {
  CHECK(roc_auc({0.8, 0.7, 0.6, 0.1}, {1, 0, 1, 0}) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(average_precision({0.9, 0.1}, {0, 1}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(roc_auc({1.0, 0.0}, {1, 0}) == doctest::Approx(1.0));
  CHECK(roc_auc({0.0, 1.0}, {1, 0}) == doctest::Approx(0.0));
  CHECK(roc_auc({0.5, 0.5}, {1, 0}) == doctest::Approx(0.5));  // pure tie
  // All-tied scores: AP = precision of the base rate under pessimistic ties.
  CHECK(average_precision({0.5, 0.5}, {1, 0}) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("rank implementation matches the brute-force oracle on random instances") {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    size_t n = 2 + rng.next_below(60);
    std::vector<double> s(n);
    std::vector<int> y(n);
    bool has_pos = false, has_neg = false;
    for (size_t i = 0; i < n; ++i) {
      // Quantized scores force plenty of exact ties.
      s[i] = static_cast<double>(rng.next_below(8)) / 8.0;
      y[i] = static_cast<int>(rng.next_below(2));
      (y[i] ? has_pos : has_neg) = true;
    }
    if (!has_pos) y[0] = 1;
    if (!has_neg) y[n - 1] = 0;

    CHECK(roc_auc(s, y) == doctest::Approx(auc_brute(s, y)).epsilon(1e-12));
    CHECK(average_precision(s, y) == doctest::Approx(ap_brute(s, y)).epsilon(1e-12));
  }
}

TEST_CASE("metrics refuse degenerate inputs") {
  CHECK_THROWS(roc_auc({0.1, 0.2}, {1, 1}));  // single class
  CHECK_THROWS(roc_auc({0.1, 0.2}, {0, 0}));
  CHECK_THROWS(average_precision({0.1, 0.2}, {1, 1}));
  CHECK_THROWS(roc_auc({}, {}));
  CHECK_THROWS(roc_auc({0.1}, {1, 0}));  // length mismatch
  CHECK_THROWS(roc_auc({std::nan(""), 0.2}, {1, 0}));
  CHECK_THROWS(roc_auc({std::numeric_limits<double>::infinity(), 0.2}, {1, 0}));
}

TEST_CASE("compute_metrics reports both metrics and the class counts") {
  MetricsReport r = compute_metrics({0.8, 0.7, 0.6, 0.1}, {1, 0, 1, 0});
  CHECK(r.auc == doctest::Approx(0.75));
  CHECK(r.num_pos == 2);
  CHECK(r.num_neg == 2);
  std::string line = format_metrics(r);
  CHECK(line.find("auc=") != std::string::npos);
  CHECK(line.find("ap=") != std::string::npos);
  CHECK(line.find("positives=2") != std::string::npos);
}
