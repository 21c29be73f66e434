#pragma once

// L2-regularized logistic regression trained by mini-batch gradient descent
// on z-scored columns.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "aefe/construct.hpp"
#include "aefe/error.hpp"

namespace aefe {

struct LrConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 30;
  std::size_t batch_size = 256;
  double l2 = 1e-4;
  std::uint64_t seed = 1;
};

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct LrModel {
  std::vector<double> weights;
  double bias = 0.0;
  /// Standardization applied before the linear map.
  std::vector<double> means;
  std::vector<double> scales;
  LrConfig config;

  std::vector<double> predict_margin(const ColumnSet& x) const {
    if (x.size() != weights.size()) throw DataError("LR model expects a different column count");
    const std::size_t n = x.empty() ? 0 : x[0].size();
    std::vector<double> out(n, bias);
    for (std::size_t c = 0; c < x.size(); ++c) {
      const double w = weights[c] / scales[c];
      const double shift = means[c];
      for (std::size_t i = 0; i < n; ++i) out[i] += w * (x[c][i] - shift);
    }
    return out;
  }

  std::vector<double> predict_proba(const ColumnSet& x) const {
    auto m = predict_margin(x);
    for (auto& v : m) v = sigmoid(v);
    return m;
  }
};

struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad_weights;
  double grad_bias = 0.0;
};

/// Mean log loss plus (l2 / 2) * |w|^2 over `rows` (all rows when empty),
/// and its gradient. `x` holds already standardized columns.
inline LossGradient lr_loss_gradient(const ColumnSet& x, std::span<const std::uint8_t> y,
                                     std::span<const double> weights, double bias, double l2,
                                     std::span<const std::size_t> rows = {}) {
  const std::size_t n_all = y.size();
  const std::size_t n = rows.empty() ? n_all : rows.size();
  LossGradient out;
  out.grad_weights.assign(weights.size(), 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t i = rows.empty() ? t : rows[t];
    double z = bias;
    for (std::size_t c = 0; c < x.size(); ++c) z += weights[c] * x[c][i];
    // log(1 + e^z) - y z, evaluated stably
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    out.loss += softplus - y[i] * z;
    const double err = sigmoid(z) - y[i];
    for (std::size_t c = 0; c < x.size(); ++c) out.grad_weights[c] += err * x[c][i];
    out.grad_bias += err;
  }
  const double inv = n ? 1.0 / static_cast<double>(n) : 0.0;
  out.loss *= inv;
  out.grad_bias *= inv;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    out.grad_weights[c] = out.grad_weights[c] * inv + l2 * weights[c];
    out.loss += 0.5 * l2 * weights[c] * weights[c];
  }
  return out;
}

namespace detail {

inline void require_finite(const ColumnSet& x, std::span<const std::uint8_t> y) {
  for (const auto& c : x) {
    if (c.size() != y.size()) throw DataError("feature and label lengths differ");
    for (double v : c)
      if (!std::isfinite(v)) throw DataError("learner input contains a non-finite value");
  }
  for (auto v : y)
    if (v > 1) throw DataError("labels must be binary");
}

}  // namespace detail

inline LrModel train_lr(const ColumnSet& x, std::span<const std::uint8_t> y, const LrConfig& cfg = {}) {
  detail::require_finite(x, y);
  const std::size_t n = y.size();
  const std::size_t d = x.size();
  LrModel model;
  model.config = cfg;
  model.weights.assign(d, 0.0);
  model.means.assign(d, 0.0);
  model.scales.assign(d, 1.0);

  std::vector<std::vector<double>> z(d);
  for (std::size_t c = 0; c < d; ++c) {
    double mean = n ? std::accumulate(x[c].begin(), x[c].end(), 0.0) / static_cast<double>(n) : 0.0;
    double ss = 0.0;
    for (double v : x[c]) ss += (v - mean) * (v - mean);
    const double sd = n ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
    model.means[c] = mean;
    model.scales[c] = sd > 1e-12 ? sd : 1.0;
    z[c].resize(n);
    for (std::size_t i = 0; i < n; ++i)
      z[c][i] = sd > 1e-12 ? (x[c][i] - mean) / model.scales[c] : 0.0;
  }
  const ColumnSet zs(z.begin(), z.end());

  // Start the bias at the base-rate logit.
  const double rate = n ? std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n) : 0.5;
  const double clipped = std::clamp(rate, 1e-6, 1.0 - 1e-6);
  model.bias = std::log(clipped / (1.0 - clipped));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed);
  const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      std::span<const std::size_t> rows(order.data() + start, std::min(batch, n - start));
      auto g = lr_loss_gradient(zs, y, model.weights, model.bias, cfg.l2, rows);
      for (std::size_t c = 0; c < d; ++c) model.weights[c] -= cfg.learning_rate * g.grad_weights[c];
      model.bias -= cfg.learning_rate * g.grad_bias;
    }
  }
  for (double w : model.weights)
    if (!std::isfinite(w)) throw Error("logistic regression diverged");
  return model;
}

}  // namespace aefe
