#pragma once

// Gradient-boosted regression trees on log loss. Splits are searched over
// quantile-binned thresholds; importances are total split gain per feature.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "aefe/construct.hpp"
#include "aefe/error.hpp"
#include "aefe/logistic.hpp"

namespace aefe {

struct GbdtConfig {
  std::size_t trees = 50;
  std::size_t max_depth = 4;
  double learning_rate = 0.1;
  std::size_t min_leaf = 20;
  double l2 = 1.0;
  std::size_t max_bins = 64;
};

struct TreeNode {
  /// -1 for leaves.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  /// Leaf output, already scaled by the learning rate.
  double value = 0.0;

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(const ColumnSet& x, std::size_t row) const {
    std::size_t i = 0;
    while (nodes[i].feature >= 0) {
      const auto& n = nodes[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)][row] <= n.threshold ? n.left
                                                                                             : n.right);
    }
    return nodes[i].value;
  }
};

struct GbdtModel {
  double base_score = 0.0;
  std::size_t n_features = 0;
  std::vector<RegressionTree> trees;
  /// Normalized total gain per feature (all zero when no split exists).
  std::vector<double> importances;
  GbdtConfig config;

  std::vector<double> predict_margin(const ColumnSet& x) const {
    if (x.size() != n_features) throw DataError("GBDT model expects a different column count");
    const std::size_t n = x.empty() ? 0 : x[0].size();
    std::vector<double> out(n, base_score);
    for (const auto& t : trees)
      for (std::size_t i = 0; i < n; ++i) out[i] += t.predict(x, i);
    return out;
  }
};

namespace detail {

struct BinnedColumn {
  std::vector<double> edges;  // bin b holds x <= edges[b]; the last bin holds the rest
  std::vector<std::uint8_t> bins;
};

inline BinnedColumn bin_column(std::span<const double> col, std::size_t max_bins) {
  BinnedColumn out;
  std::vector<double> sorted(col.begin(), col.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> uniq = sorted;
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  max_bins = std::clamp<std::size_t>(max_bins, 2, 256);
  if (uniq.size() <= max_bins) {
    if (!uniq.empty()) out.edges.assign(uniq.begin(), uniq.end() - 1);
  } else {
    const std::size_t n = sorted.size();
    for (std::size_t b = 1; b < max_bins; ++b) {
      const double e = sorted[std::min(n - 1, b * n / max_bins)];
      if (e < uniq.back() && (out.edges.empty() || e > out.edges.back())) out.edges.push_back(e);
    }
  }
  out.bins.resize(col.size());
  for (std::size_t i = 0; i < col.size(); ++i)
    out.bins[i] = static_cast<std::uint8_t>(
        std::lower_bound(out.edges.begin(), out.edges.end(), col[i]) - out.edges.begin());
  return out;
}

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  std::size_t bin = 0;
};

inline double leaf_score(double g, double h, double l2) { return g * g / (h + l2); }

}  // namespace detail

inline GbdtModel train_gbdt(const ColumnSet& x, std::span<const std::uint8_t> y,
                            const GbdtConfig& cfg = {}) {
  detail::require_finite(x, y);
  const std::size_t n = y.size();
  const std::size_t d = x.size();
  GbdtModel model;
  model.config = cfg;
  model.n_features = d;
  model.importances.assign(d, 0.0);
  if (n == 0) return model;

  std::vector<detail::BinnedColumn> binned;
  binned.reserve(d);
  for (const auto& c : x) binned.push_back(detail::bin_column(c, cfg.max_bins));

  const double rate = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  const double clipped = std::clamp(rate, 1e-6, 1.0 - 1e-6);
  model.base_score = std::log(clipped / (1.0 - clipped));

  std::vector<double> margin(n, model.base_score), grad(n), hess(n);
  std::vector<double> gain_total(d, 0.0);
  const std::size_t min_leaf = std::max<std::size_t>(1, cfg.min_leaf);

  std::vector<double> hg, hh;
  std::vector<std::size_t> hc;

  for (std::size_t t = 0; t < cfg.trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      grad[i] = p - y[i];
      hess[i] = std::max(p * (1.0 - p), 1e-16);
    }
    RegressionTree tree;
    struct Pending {
      std::size_t node;
      std::vector<std::uint32_t> rows;
      std::size_t depth;
    };
    std::vector<std::uint32_t> all(n);
    std::iota(all.begin(), all.end(), 0u);
    tree.nodes.emplace_back();
    std::vector<Pending> frontier;
    frontier.push_back({0, std::move(all), 0});
    std::vector<std::pair<std::size_t, std::vector<std::uint32_t>>> leaves;

    while (!frontier.empty()) {
      std::vector<Pending> next;
      for (auto& node : frontier) {
        double g_sum = 0, h_sum = 0;
        for (auto r : node.rows) {
          g_sum += grad[r];
          h_sum += hess[r];
        }
        detail::SplitCandidate best;
        if (node.depth < cfg.max_depth && node.rows.size() >= 2 * min_leaf) {
          const double parent = detail::leaf_score(g_sum, h_sum, cfg.l2);
          for (std::size_t f = 0; f < d; ++f) {
            const auto& bc = binned[f];
            const std::size_t nb = bc.edges.size() + 1;
            if (nb < 2) continue;
            hg.assign(nb, 0.0);
            hh.assign(nb, 0.0);
            hc.assign(nb, 0);
            for (auto r : node.rows) {
              const auto b = bc.bins[r];
              hg[b] += grad[r];
              hh[b] += hess[r];
              ++hc[b];
            }
            double gl = 0, hl = 0;
            std::size_t cl = 0;
            for (std::size_t b = 0; b + 1 < nb; ++b) {
              gl += hg[b];
              hl += hh[b];
              cl += hc[b];
              const std::size_t cr = node.rows.size() - cl;
              if (cl < min_leaf) continue;
              if (cr < min_leaf) break;
              const double gain = 0.5 * (detail::leaf_score(gl, hl, cfg.l2) +
                                         detail::leaf_score(g_sum - gl, h_sum - hl, cfg.l2) - parent);
              if (gain > best.gain) best = {gain, static_cast<int>(f), b};
            }
          }
        }
        if (best.feature < 0 || !(best.gain > 1e-12)) {
          tree.nodes[node.node].value = -cfg.learning_rate * g_sum / (h_sum + cfg.l2);
          leaves.emplace_back(node.node, std::move(node.rows));
          continue;
        }
        const auto f = static_cast<std::size_t>(best.feature);
        gain_total[f] += best.gain;
        std::vector<std::uint32_t> left, right;
        for (auto r : node.rows) (binned[f].bins[r] <= best.bin ? left : right).push_back(r);
        const auto li = tree.nodes.size();
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        auto& parent = tree.nodes[node.node];
        parent.feature = best.feature;
        parent.threshold = binned[f].edges[best.bin];
        parent.left = static_cast<int>(li);
        parent.right = static_cast<int>(li + 1);
        next.push_back({li, std::move(left), node.depth + 1});
        next.push_back({li + 1, std::move(right), node.depth + 1});
      }
      frontier = std::move(next);
    }
    for (const auto& [idx, rows] : leaves) {
      const double v = tree.nodes[idx].value;
      for (auto r : rows) margin[r] += v;
    }
    model.trees.push_back(std::move(tree));
  }

  const double total = std::accumulate(gain_total.begin(), gain_total.end(), 0.0);
  if (total > 0)
    for (std::size_t f = 0; f < d; ++f) model.importances[f] = gain_total[f] / total;
  return model;
}

}  // namespace aefe
