#pragma once

// Field-pair search guided by a factorized pair-effectiveness matrix, and
// the per-task loop that expands, selects and evaluates pairs.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "aefe/construct.hpp"
#include "aefe/dataset.hpp"
#include "aefe/error.hpp"
#include "aefe/feature_spec.hpp"
#include "aefe/gbdt.hpp"
#include "aefe/metrics.hpp"
#include "aefe/selection.hpp"

namespace aefe {

/// Dense symmetric m x m matrix, row-major.
struct PairMatrix {
  std::size_t m = 0;
  std::vector<double> data;

  PairMatrix() = default;
  explicit PairMatrix(std::size_t size, double fill = 0.0) : m(size), data(size * size, fill) {}

  double operator()(std::size_t i, std::size_t j) const { return data[i * m + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * m + j]; }

  void set(std::size_t i, std::size_t j, double v) {
    (*this)(i, j) = v;
    (*this)(j, i) = v;
  }
};

/// I(C; L) / H(C) in bits, where C is the joint code of the two columns.
inline double info_gain_ratio(std::span<const std::uint32_t> codes_i, std::span<const std::uint32_t> codes_j,
                              std::span<const std::uint8_t> labels) {
  if (codes_i.size() != codes_j.size() || codes_i.size() != labels.size())
    throw DataError("info_gain_ratio: columns differ in length");
  const std::size_t n = labels.size();
  if (n == 0) return 0.0;
  std::unordered_map<std::uint64_t, std::pair<std::size_t, std::size_t>> counts;  // (total, positives)
  std::size_t positives = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto key = (static_cast<std::uint64_t>(codes_i[r]) << 32) | codes_j[r];
    auto& c = counts[key];
    ++c.first;
    c.second += labels[r];
    positives += labels[r];
  }
  const double dn = static_cast<double>(n);
  auto plogp = [](double p) { return p > 0 ? p * std::log2(p) : 0.0; };
  const double h_label = -plogp(positives / dn) - plogp((dn - positives) / dn);
  double h_code = 0.0, h_label_given_code = 0.0;
  for (const auto& [key, c] : counts) {
    const double pc = c.first / dn;
    h_code -= plogp(pc);
    const double q = static_cast<double>(c.second) / static_cast<double>(c.first);
    h_label_given_code += pc * (-plogp(q) - plogp(1.0 - q));
  }
  if (h_code <= 0.0) return 0.0;
  return std::max(0.0, h_label - h_label_given_code) / h_code;
}

/// Min-max scales the off-diagonal entries of a raw pair matrix jointly;
/// a flat matrix becomes 0.5 everywhere off the diagonal.
inline PairMatrix scale_pair_matrix(PairMatrix raw) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < raw.m; ++i)
    for (std::size_t j = i + 1; j < raw.m; ++j) {
      lo = std::min(lo, raw(i, j));
      hi = std::max(hi, raw(i, j));
    }
  for (std::size_t i = 0; i < raw.m; ++i) {
    raw(i, i) = 0.0;
    for (std::size_t j = i + 1; j < raw.m; ++j)
      raw.set(i, j, hi > lo ? (raw(i, j) - lo) / (hi - lo) : 0.5);
  }
  return raw;
}

inline PairMatrix init_pair_matrix(const Dataset& d) {
  const std::size_t m = d.n_fields();
  if (m < 2) throw ConfigError("pair search needs at least two fields");
  PairMatrix raw(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) raw.set(i, j, info_gain_ratio(d.codes(i), d.codes(j), d.labels()));
  return scale_pair_matrix(std::move(raw));
}

/// Latent vectors, one k-vector per field.
using LatentFactors = std::vector<std::vector<double>>;

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t f = 0; f < a.size(); ++f) s += a[f] * b[f];
  return s;
}

/// Root-mean-square error of v_i . v_j against the off-diagonal entries.
inline double offdiag_rmse(const PairMatrix& target, const LatentFactors& v) {
  double ss = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < target.m; ++i)
    for (std::size_t j = i + 1; j < target.m; ++j) {
      const double e = target(i, j) - dot(v[i], v[j]);
      ss += e * e;
      ++n;
    }
  return n ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
}

/// Fits non-negative latent vectors with V^T V ~ target off the diagonal by
/// projected gradient descent on sum_{i<j} (p_ij - v_i . v_j)^2. The step
/// grows after every accepted step and halves after a rejected one.
inline LatentFactors factorize(const PairMatrix& target, std::size_t k, std::size_t epochs, std::uint64_t seed) {
  if (k == 0) throw ConfigError("k_latent must be >= 1");
  const std::size_t m = target.m;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> init(0.0, 1.0 / std::sqrt(static_cast<double>(k)));
  LatentFactors v(m, std::vector<double>(k));
  for (auto& row : v)
    for (auto& x : row) x = init(rng);

  auto loss_of = [&](const LatentFactors& w) {
    double ss = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) {
        const double e = target(i, j) - dot(w[i], w[j]);
        ss += e * e;
      }
    return ss;
  };

  double loss = loss_of(v);
  double step = 0.05;
  LatentFactors grad(m, std::vector<double>(k)), trial = v;
  for (std::size_t epoch = 0; epoch < epochs && loss > 1e-16; ++epoch) {
    for (auto& g : grad) std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) {
        const double e = dot(v[i], v[j]) - target(i, j);
        for (std::size_t f = 0; f < k; ++f) {
          grad[i][f] += 2.0 * e * v[j][f];
          grad[j][f] += 2.0 * e * v[i][f];
        }
      }
    // Backtrack until the projected step decreases the loss.
    bool accepted = false;
    double trial_loss = loss;
    for (int attempt = 0; attempt < 40; ++attempt) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t f = 0; f < k; ++f) trial[i][f] = std::max(0.0, v[i][f] - step * grad[i][f]);
      trial_loss = loss_of(trial);
      if (trial_loss < loss) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const double improvement = (loss - trial_loss) / loss;
    std::swap(v, trial);
    loss = trial_loss;
    step *= 1.2;
    if (improvement < 1e-4) break;
  }
  return v;
}

struct IterationRecord {
  std::size_t iteration = 0;
  std::size_t first = 0;
  std::size_t second = 0;
  std::size_t n_generated = 0;
  std::size_t n_valid = 0;
  /// v_i . v_j right before the update.
  double predicted = 0.0;
  /// N_valid / N_generated.
  double realized = 0.0;
  double score = 0.5;
  double score_max = 0.5;
};

struct PairSearchState {
  std::size_t m = 0;
  PairMatrix scaled;
  LatentFactors latent;
  std::vector<std::uint8_t> used;  // m x m, symmetric
  double eta = 0.1;
  std::size_t patience = 5;
  double score_max = 0.5;
  std::vector<IterationRecord> history;

  double predicted(std::size_t i, std::size_t j) const { return dot(latent[i], latent[j]); }
  bool is_used(std::size_t i, std::size_t j) const { return used[i * m + j] != 0; }
  void mark_used(std::size_t i, std::size_t j) {
    used[i * m + j] = 1;
    used[j * m + i] = 1;
  }
  std::size_t used_pairs() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) n += is_used(i, j);
    return n;
  }
};

inline PairSearchState make_search_state(PairMatrix scaled, LatentFactors latent, double eta,
                                         std::size_t patience) {
  PairSearchState s;
  s.m = scaled.m;
  if (latent.size() != s.m) throw ConfigError("latent factor count differs from the field count");
  s.scaled = std::move(scaled);
  s.latent = std::move(latent);
  s.used.assign(s.m * s.m, 0);
  s.eta = eta;
  s.patience = patience;
  return s;
}

/// Unused pair with the largest predicted score; ties go to the
/// lexicographically smallest (i, j).
inline std::optional<std::pair<std::size_t, std::size_t>> next_pair(const PairSearchState& s) {
  std::optional<std::pair<std::size_t, std::size_t>> best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.m; ++i)
    for (std::size_t j = i + 1; j < s.m; ++j) {
      if (s.is_used(i, j)) continue;
      const double p = s.predicted(i, j);
      if (!best || p > best_score) {
        best = std::make_pair(i, j);
        best_score = p;
      }
    }
  return best;
}

/// v_i += eta (realized - p) v_j and v_j += eta (realized - p) v_i, both
/// from the old values, then negatives clamped to 0.
inline void update(PairSearchState& s, std::size_t i, std::size_t j, double realized) {
  const double err = realized - s.predicted(i, j);
  const auto vi = s.latent[i];
  const auto vj = s.latent[j];
  for (std::size_t f = 0; f < vi.size(); ++f) {
    s.latent[i][f] = std::max(0.0, vi[f] + s.eta * err * vj[f]);
    s.latent[j][f] = std::max(0.0, vj[f] + s.eta * err * vi[f]);
  }
}

enum class SearchMode { Guided, Exhaustive };

struct SearchConfig {
  SearchMode mode = SearchMode::Guided;
  std::size_t k_latent = 4;
  double eta = 0.1;
  std::size_t iter_es = 5;
  std::size_t factorize_epochs = 500;
};

/// Everything a task needs besides its (indicator, operator) and seed.
struct TaskSettings {
  ConstructionConfig construction;
  SelectionThresholds thresholds;
  GbdtConfig gbdt;
  SearchConfig search;
  bool window_open_lower = false;
};

struct Task {
  std::size_t id = 0;
  std::string indicator;
  Operator op = Operator::Mean;
  std::uint64_t seed = 0;

  std::string name() const { return indicator + ":" + std::string(to_string(op)); }
};

struct AcceptedFeature {
  FeatureSpec spec;
  std::string name;
  /// Values over the task's dataset before and after imputation.
  std::vector<double> raw;
  std::vector<double> values;
  double imputation = 0.0;
  Provenance provenance;
};

struct TaskResult {
  Task task;
  std::vector<AcceptedFeature> accepted;
  std::vector<IterationRecord> history;
  /// "early_stop" or "exhausted".
  std::string stop_reason;
  std::size_t candidates = 0;
  std::size_t guarded_divisions = 0;
  PairMatrix initial_matrix;
};

/// Validation AUC of a GBDT over `columns` on `split`; 0.5 for no columns.
inline double evaluate_columns(const std::vector<std::span<const double>>& columns,
                               std::span<const std::uint8_t> y, const Split& split, const GbdtConfig& cfg) {
  if (columns.empty()) return 0.5;
  std::vector<std::size_t> all(columns.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto xtr = detail::gather(columns, all, split.train);
  const auto xva = detail::gather(columns, all, split.valid);
  return holdout_auc(ColumnSet(xtr.begin(), xtr.end()), detail::gather(y, split.train),
                     ColumnSet(xva.begin(), xva.end()), detail::gather(y, split.valid), cfg);
}

/// Expands field pairs for one (indicator, operator) until the evaluation
/// score stops improving for `iter_es` iterations or every pair is used.
inline TaskResult run_task(const Dataset& d, const Task& task, const TaskSettings& cfg) {
  const auto& schema = d.schema();
  auto kind = schema.indicator_kind(task.indicator);
  if (!kind) throw ConfigError("unknown indicator '" + task.indicator + "'");
  if (!compatible(task.op, *kind))
    throw ConfigError("operator " + std::string(to_string(task.op)) + " is not applicable to '" +
                      task.indicator + "'");
  const std::size_t m = d.n_fields();
  const auto y = d.labels();
  const Split split = random_split(d.n_rows(), cfg.thresholds.rate_valid, task.seed);

  TaskResult out;
  out.task = task;
  out.initial_matrix = init_pair_matrix(d);
  auto state = make_search_state(out.initial_matrix,
                                 factorize(out.initial_matrix, cfg.search.k_latent,
                                           cfg.search.factorize_epochs, task.seed),
                                 cfg.search.eta, cfg.search.iter_es);
  const bool guided = cfg.search.mode == SearchMode::Guided;

  std::vector<std::pair<std::size_t, std::size_t>> fixed_order;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) fixed_order.emplace_back(i, j);

  std::unordered_set<std::string> emitted;
  std::vector<std::span<const double>> accumulated;
  std::size_t stale = 0;
  out.stop_reason = "exhausted";
  for (std::size_t iteration = 1; iteration <= fixed_order.size(); ++iteration) {
    std::pair<std::size_t, std::size_t> pair;
    if (guided) {
      auto next = next_pair(state);
      if (!next) break;
      pair = *next;
    } else {
      pair = fixed_order[iteration - 1];
    }
    const auto [i, j] = pair;

    const auto specs = enumerate_specs(i, j, task.indicator, task.op, schema, cfg.construction, &emitted);
    out.candidates += specs.size();
    std::vector<std::vector<double>> cols, raws;
    std::vector<double> imputations;
    cols.reserve(specs.size());
    for (const auto& s : specs) {
      auto col = materialize(d, d, s, cfg.window_open_lower);
      out.guarded_divisions += col.guarded_divisions;
      const double mean = imputation_mean(col.values, split.train);
      raws.push_back(col.values);
      impute(col.values, mean);
      cols.push_back(std::move(col.values));
      imputations.push_back(mean);
    }

    std::size_t n_valid = 0;
    if (!cols.empty()) {
      const auto sel = fsa(ColumnSet(cols.begin(), cols.end()), y, cfg.thresholds, cfg.gbdt, task.seed);
      n_valid = sel.selected.size();
      for (auto c : sel.selected) {
        AcceptedFeature f;
        f.spec = specs[c];
        f.name = canonical_name(specs[c], schema);
        f.imputation = imputations[c];
        f.provenance.task = task.name();
        f.provenance.iteration = iteration;
        f.provenance.pair_first = i;
        f.provenance.pair_second = j;
        f.provenance.variance = sel.variances[c];
        f.provenance.importance = sel.importances[c];
        for (const auto& w : sel.report.wrapper)
          if (w.index == c) f.provenance.score_delta = w.value;
        f.raw = std::move(raws[c]);
        f.values = std::move(cols[c]);
        out.accepted.push_back(std::move(f));
      }
    }
    const double realized = specs.empty() ? 0.0 : static_cast<double>(n_valid) / static_cast<double>(specs.size());

    IterationRecord rec;
    rec.iteration = iteration;
    rec.first = i;
    rec.second = j;
    rec.n_generated = specs.size();
    rec.n_valid = n_valid;
    rec.predicted = state.predicted(i, j);
    rec.realized = realized;
    if (guided) update(state, i, j, realized);
    state.mark_used(i, j);

    const double previous = state.history.empty() ? 0.5 : state.history.back().score;
    double score = previous;
    if (n_valid > 0) {
      accumulated.clear();
      for (const auto& f : out.accepted) accumulated.emplace_back(f.values);
      score = evaluate_columns(accumulated, y, split, cfg.gbdt);
    }
    rec.score = score;
    if (score > state.score_max) {
      state.score_max = score;
      stale = 0;
    } else {
      ++stale;
    }
    rec.score_max = state.score_max;
    state.history.push_back(rec);

    if (guided && stale >= cfg.search.iter_es && state.used_pairs() < fixed_order.size()) {
      out.stop_reason = "early_stop";
      break;
    }
  }
  out.history = state.history;
  return out;
}

}  // namespace aefe
