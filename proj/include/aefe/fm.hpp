#pragma once

// Factorization machine over the one-hot encoding of the categorical
// fields, trained by SGD on log loss.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "aefe/dataset.hpp"
#include "aefe/error.hpp"
#include "aefe/logistic.hpp"

namespace aefe {

struct FmConfig {
  std::size_t k_emb = 8;
  double learning_rate = 0.05;
  std::size_t epochs = 10;
  double l2 = 1e-4;
  /// Standard deviation of the Gaussian latent initialization.
  double init_scale = 0.01;
  /// Keep the latent matrix at its initial value.
  bool freeze_latent = false;
  std::uint64_t seed = 1;
};

/// Pairwise interaction sum_{i<j} <v_i, v_j> x_i x_j computed as
/// 1/2 sum_f [(sum_i v_if x_i)^2 - sum_i v_if^2 x_i^2]. `latent` is
/// row-major with `k` columns; `index[t]` selects the row for value `x[t]`.
inline double fm_pairwise_term(std::span<const double> latent, std::size_t k,
                               std::span<const std::size_t> index, std::span<const double> x) {
  double total = 0.0;
  for (std::size_t f = 0; f < k; ++f) {
    double s = 0.0, sq = 0.0;
    for (std::size_t t = 0; t < index.size(); ++t) {
      const double v = latent[index[t] * k + f] * x[t];
      s += v;
      sq += v * v;
    }
    total += s * s - sq;
  }
  return 0.5 * total;
}

struct FmModel {
  double bias = 0.0;
  std::vector<double> linear;
  /// One k-vector per one-hot feature, row-major.
  std::vector<double> latent;
  std::size_t k = 0;
  /// Start of each field's block in the one-hot space.
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> cardinalities;
  FmConfig config;

  std::span<const double> embedding(std::size_t feature) const {
    return std::span<const double>(latent).subspan(feature * k, k);
  }

  double margin(std::span<const std::size_t> active) const {
    double z = bias;
    for (auto i : active) z += linear[i];
    std::vector<double> ones(active.size(), 1.0);
    return z + fm_pairwise_term(latent, k, active, ones);
  }

  std::vector<std::size_t> active_features(const Dataset& d, std::size_t row) const {
    std::vector<std::size_t> out(offsets.size());
    for (std::size_t f = 0; f < offsets.size(); ++f) out[f] = offsets[f] + d.codes(f)[row];
    return out;
  }

  std::vector<double> predict_margin(const Dataset& d) const {
    check(d);
    std::vector<double> out(d.n_rows());
    for (std::size_t r = 0; r < d.n_rows(); ++r) out[r] = margin(active_features(d, r));
    return out;
  }

  void check(const Dataset& d) const {
    if (d.n_fields() != offsets.size()) throw DataError("FM model expects a different field count");
    for (std::size_t f = 0; f < offsets.size(); ++f)
      if (d.cardinality(f) != cardinalities[f])
        throw DataError("FM model was trained on a different dictionary");
  }
};

inline FmModel train_fm(const Dataset& d, const FmConfig& cfg = {}) {
  if (cfg.k_emb == 0) throw ConfigError("FM needs k_emb >= 1");
  FmModel model;
  model.config = cfg;
  model.k = cfg.k_emb;
  std::size_t width = 0;
  for (std::size_t f = 0; f < d.n_fields(); ++f) {
    model.offsets.push_back(width);
    model.cardinalities.push_back(d.cardinality(f));
    width += d.cardinality(f);
  }
  model.linear.assign(width, 0.0);
  model.latent.assign(width * model.k, 0.0);
  std::mt19937_64 rng(cfg.seed);
  if (cfg.init_scale > 0) {
    std::normal_distribution<double> init(0.0, cfg.init_scale);
    for (auto& v : model.latent) v = init(rng);
  }
  const auto y = d.labels();
  const std::size_t n = d.n_rows();
  const double rate = n ? std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n) : 0.5;
  const double clipped = std::clamp(rate, 1e-6, 1.0 - 1e-6);
  model.bias = std::log(clipped / (1.0 - clipped));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> sums(model.k);
  const double lr = cfg.learning_rate;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto r : order) {
      const auto active = model.active_features(d, r);
      std::fill(sums.begin(), sums.end(), 0.0);
      for (auto i : active)
        for (std::size_t f = 0; f < model.k; ++f) sums[f] += model.latent[i * model.k + f];
      const double err = sigmoid(model.margin(active)) - y[r];
      model.bias -= lr * err;
      for (auto i : active) {
        model.linear[i] -= lr * (err + cfg.l2 * model.linear[i]);
        if (cfg.freeze_latent) continue;
        for (std::size_t f = 0; f < model.k; ++f) {
          double& v = model.latent[i * model.k + f];
          v -= lr * (err * (sums[f] - v) + cfg.l2 * v);
        }
      }
    }
  }
  return model;
}

}  // namespace aefe
