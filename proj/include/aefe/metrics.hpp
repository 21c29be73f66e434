#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "aefe/error.hpp"

namespace aefe {

/// Area under the ROC curve via midranks: the probability that a random
/// positive outscores a random negative, ties counting one half.
inline double auc(std::span<const std::uint8_t> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw MetricError("auc: labels and scores differ in length");
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // ranks i+1 .. j share the midrank
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]]) {
        positive_rank_sum += midrank;
        ++positives;
      }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0)
    throw MetricError("auc is undefined when only one class is present");
  const auto p = static_cast<double>(positives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

/// Relative improvement of AUC over a baseline, in percent.
inline double rela_impr(double auc_model, double auc_baseline) {
  if (auc_baseline == 0.5) throw MetricError("RelaImpr is undefined for a baseline AUC of 0.5");
  return ((auc_model - 0.5) / (auc_baseline - 0.5) - 1.0) * 100.0;
}

}  // namespace aefe
