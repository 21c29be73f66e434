#pragma once

// Filter -> Embedded -> Wrapper feature selection cascade and the global
// pass over merged task outputs.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "aefe/construct.hpp"
#include "aefe/dataset.hpp"
#include "aefe/error.hpp"
#include "aefe/gbdt.hpp"
#include "aefe/metrics.hpp"

namespace aefe {

struct SelectionThresholds {
  double t_filter = 1e-5;
  double t_embedded = 0.02;
  double t_wrapper = 0.0;
  double rate_valid = 0.2;
  /// Filter on the variance of the min-max-scaled column; false uses the
  /// raw column.
  bool scaled_variance = true;

  void validate() const {
    if (!(t_filter >= 0)) throw ConfigError("t_filter must be >= 0");
    if (!(t_embedded >= 0 && t_embedded <= 1)) throw ConfigError("t_embedded must lie in [0, 1]");
    if (!(t_wrapper >= 0)) throw ConfigError("t_wrapper must be >= 0");
    if (!(rate_valid > 0 && rate_valid < 1)) throw ConfigError("rate_valid must lie in (0, 1)");
  }
};

/// One candidate's fate at one stage. `value` is the variance, the
/// importance or the score delta depending on the stage.
struct StageDecision {
  std::size_t index = 0;
  double value = 0.0;
  bool kept = false;
};

struct SelectionReport {
  std::vector<StageDecision> filter;
  std::vector<StageDecision> embedded;
  std::vector<StageDecision> wrapper;
  /// Candidate indices in the order the wrapper visited them.
  std::vector<std::size_t> order;
  /// Best validation AUC, starting at 0.5 and extended at every acceptance.
  std::vector<double> trajectory{0.5};
};

/// Population variance of `column`, optionally after min-max scaling.
inline double column_variance(std::span<const double> column, bool scaled = true) {
  if (column.empty()) return 0.0;
  double lo = column[0], hi = column[0];
  for (double v : column) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi > lo)) return 0.0;
  const double shift = scaled ? lo : 0.0;
  const double scale = scaled ? 1.0 / (hi - lo) : 1.0;
  long double sum = 0, sq = 0;
  for (double v : column) {
    const long double z = (v - shift) * scale;
    sum += z;
    sq += z * z;
  }
  const long double n = static_cast<long double>(column.size());
  const long double mean = sum / n;
  return std::max(0.0, static_cast<double>(sq / n - mean * mean));
}

inline std::vector<std::size_t> filter_variance(const ColumnSet& x, double t_filter, bool scaled = true,
                                                std::vector<double>* variances = nullptr) {
  std::vector<std::size_t> kept;
  if (variances) variances->clear();
  for (std::size_t c = 0; c < x.size(); ++c) {
    const double v = column_variance(x[c], scaled);
    if (variances) variances->push_back(v);
    if (v >= t_filter) kept.push_back(c);
  }
  return kept;
}

struct EmbeddedResult {
  std::vector<std::size_t> kept;
  std::vector<double> importances;
};

inline EmbeddedResult embedded_select(const ColumnSet& xtr, std::span<const std::uint8_t> ytr,
                                      double t_embedded, const GbdtConfig& cfg = {}) {
  EmbeddedResult out;
  if (xtr.empty()) return out;
  auto model = train_gbdt(xtr, ytr, cfg);
  out.importances = model.importances;
  for (std::size_t c = 0; c < xtr.size(); ++c)
    if (out.importances[c] >= t_embedded) out.kept.push_back(c);
  return out;
}

struct WrapperResult {
  std::vector<std::size_t> kept;
  /// AUC delta each visited candidate achieved against the running best.
  std::vector<double> deltas;
  std::vector<double> trajectory{0.5};
  double best = 0.5;
};

/// Validation AUC of a GBDT trained on the given columns.
inline double holdout_auc(const ColumnSet& xtr, std::span<const std::uint8_t> ytr, const ColumnSet& xva,
                          std::span<const std::uint8_t> yva, const GbdtConfig& cfg) {
  auto model = train_gbdt(xtr, ytr, cfg);
  return auc(yva, model.predict_margin(xva));
}

/// Greedy forward selection over `order`: each candidate is added to the
/// accepted set, a fresh model is trained, and the candidate is kept iff
/// the validation AUC beats the running best by more than t_wrapper.
inline WrapperResult wrapper_select(const ColumnSet& xtr, std::span<const std::uint8_t> ytr,
                                    const ColumnSet& xva, std::span<const std::uint8_t> yva,
                                    std::span<const std::size_t> order, double t_wrapper,
                                    const GbdtConfig& cfg = {}) {
  WrapperResult out;
  ColumnSet str, sva;
  for (auto g : order) {
    str.push_back(xtr.at(g));
    sva.push_back(xva.at(g));
    const double score = holdout_auc(str, ytr, sva, yva, cfg);
    const double delta = score - out.best;
    out.deltas.push_back(delta);
    if (delta > t_wrapper) {
      out.kept.push_back(g);
      out.best = score;
      out.trajectory.push_back(score);
    } else {
      str.pop_back();
      sva.pop_back();
    }
  }
  return out;
}

struct FsaResult {
  /// Candidate indices in acceptance order.
  std::vector<std::size_t> selected;
  SelectionReport report;
  Split split;
  std::vector<double> variances;
  std::vector<double> importances;
};

namespace detail {

inline std::vector<std::vector<double>> gather(const ColumnSet& x, std::span<const std::size_t> cols,
                                               std::span<const std::size_t> rows) {
  std::vector<std::vector<double>> out(cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    out[c].reserve(rows.size());
    for (auto r : rows) out[c].push_back(x[cols[c]][r]);
  }
  return out;
}

inline std::vector<std::uint8_t> gather(std::span<const std::uint8_t> y, std::span<const std::size_t> rows) {
  std::vector<std::uint8_t> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(y[r]);
  return out;
}

}  // namespace detail

/// Runs the cascade on imputed candidate columns. The split is drawn from
/// `seed`, so callers that need the same partition can recreate it with
/// random_split(n, thresholds.rate_valid, seed).
inline FsaResult fsa(const ColumnSet& x, std::span<const std::uint8_t> y,
                     const SelectionThresholds& th, const GbdtConfig& cfg, std::uint64_t seed) {
  th.validate();
  FsaResult out;
  out.split = random_split(y.size(), th.rate_valid, seed);
  if (x.empty()) return out;

  const auto after_filter = filter_variance(x, th.t_filter, th.scaled_variance, &out.variances);
  for (std::size_t c = 0; c < x.size(); ++c)
    out.report.filter.push_back({c, out.variances[c], out.variances[c] >= th.t_filter});
  if (after_filter.empty()) return out;

  const auto xtr_own = detail::gather(x, after_filter, out.split.train);
  const auto xva_own = detail::gather(x, after_filter, out.split.valid);
  const auto ytr = detail::gather(y, out.split.train);
  const auto yva = detail::gather(y, out.split.valid);
  const ColumnSet xtr(xtr_own.begin(), xtr_own.end());
  const ColumnSet xva(xva_own.begin(), xva_own.end());

  auto emb = embedded_select(xtr, ytr, th.t_embedded, cfg);
  out.importances.assign(x.size(), 0.0);
  for (std::size_t k = 0; k < after_filter.size(); ++k) {
    out.importances[after_filter[k]] = emb.importances[k];
    out.report.embedded.push_back({after_filter[k], emb.importances[k], emb.importances[k] >= th.t_embedded});
  }

  // Descending importance; ties keep candidate order.
  std::vector<std::size_t> order = emb.kept;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return emb.importances[a] > emb.importances[b];
  });
  auto wr = wrapper_select(xtr, ytr, xva, yva, order, th.t_wrapper, cfg);

  std::unordered_set<std::size_t> accepted(wr.kept.begin(), wr.kept.end());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto original = after_filter[order[k]];
    out.report.order.push_back(original);
    out.report.wrapper.push_back({original, wr.deltas[k], accepted.count(order[k]) > 0});
  }
  for (auto k : wr.kept) out.selected.push_back(after_filter[k]);
  out.report.trajectory = wr.trajectory;
  return out;
}

/// A named, imputed candidate column handed to global selection.
struct NamedColumn {
  std::string name;
  std::vector<double> values;
};

struct GlobalSelection {
  /// Deduplicated merged candidates, in merge order.
  std::vector<std::string> merged;
  FsaResult result;
};

/// Deduplicates by name (first occurrence wins, so callers control the
/// ordering) and runs the cascade over the union.
inline GlobalSelection global_select(const std::vector<NamedColumn>& merged,
                                     std::span<const std::uint8_t> y, const SelectionThresholds& th,
                                     const GbdtConfig& cfg, std::uint64_t seed) {
  GlobalSelection out;
  std::unordered_set<std::string> seen;
  ColumnSet x;
  for (const auto& c : merged) {
    if (c.values.size() != y.size()) throw DataError("candidate '" + c.name + "' has the wrong length");
    if (!seen.insert(c.name).second) continue;
    out.merged.push_back(c.name);
    x.emplace_back(c.values);
  }
  out.result = fsa(x, y, th, cfg, seed);
  return out;
}

}  // namespace aefe
