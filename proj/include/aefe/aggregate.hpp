#pragma once

// Groupby-then-aggregate kernel: for every target row, aggregate an
// indicator over the reference rows sharing its key, excluding the row
// itself and, when a window is set, restricted to the preceding window.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "aefe/dataset.hpp"
#include "aefe/error.hpp"

namespace aefe {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

enum class Operator { Sum, Mean, Std, Max, Min, Count };

inline constexpr Operator kAllOperators[] = {Operator::Sum, Operator::Mean, Operator::Std,
                                             Operator::Max, Operator::Min, Operator::Count};

inline std::string_view to_string(Operator op) {
  switch (op) {
    case Operator::Sum: return "sum";
    case Operator::Mean: return "mean";
    case Operator::Std: return "std";
    case Operator::Max: return "max";
    case Operator::Min: return "min";
    case Operator::Count: return "count";
  }
  return "?";
}

inline std::optional<Operator> parse_operator(std::string_view s) {
  for (auto op : kAllOperators)
    if (to_string(op) == s) return op;
  if (s == "avg") return Operator::Mean;
  return std::nullopt;
}

/// Which operators make sense for which kind of indicator.
inline bool compatible(Operator op, IndicatorKind kind) {
  if (op == Operator::Count) return kind == IndicatorKind::Unit;
  switch (kind) {
    case IndicatorKind::Unit: return false;
    case IndicatorKind::Timestamp: return op != Operator::Sum && op != Operator::Std;
    case IndicatorKind::Label: return op != Operator::Max && op != Operator::Min;
    case IndicatorKind::Continuous: return true;
  }
  return false;
}

/// One or two categorical fields whose codes form the group key.
struct GroupKey {
  std::size_t first = 0;
  std::optional<std::size_t> second;
};

struct AggSpec {
  Operator op = Operator::Sum;
  std::string indicator;
  /// Window length in timestamp units; empty means all history.
  std::optional<std::int64_t> window;
  /// Use (ts - W, ts) instead of [ts - W, ts).
  bool open_lower = false;
};

/// Aggregates a non-empty list. std is the population standard deviation.
inline double aggregate_scalar(std::span<const double> values, Operator op) {
  const auto n = static_cast<double>(values.size());
  switch (op) {
    case Operator::Count: return n;
    case Operator::Sum: return std::accumulate(values.begin(), values.end(), 0.0);
    case Operator::Mean: return std::accumulate(values.begin(), values.end(), 0.0) / n;
    case Operator::Max: return *std::max_element(values.begin(), values.end());
    case Operator::Min: return *std::min_element(values.begin(), values.end());
    case Operator::Std: {
      double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      return std::sqrt(ss / n);
    }
  }
  return kMissing;
}

namespace detail {

// Iterative segment tree answering range max or min over [lo, hi).
class RangeExtreme {
 public:
  RangeExtreme(std::span<const double> values, bool is_max) : n_(values.size()), is_max_(is_max) {
    tree_.assign(2 * n_, identity());
    std::copy(values.begin(), values.end(), tree_.begin() + static_cast<std::ptrdiff_t>(n_));
    for (std::size_t i = n_; i-- > 1;) tree_[i] = pick(tree_[2 * i], tree_[2 * i + 1]);
  }

  double query(std::size_t lo, std::size_t hi) const {
    double acc = identity();
    for (lo += n_, hi += n_; lo < hi; lo >>= 1, hi >>= 1) {
      if (lo & 1) acc = pick(acc, tree_[lo++]);
      if (hi & 1) acc = pick(acc, tree_[--hi]);
    }
    return acc;
  }

 private:
  double identity() const {
    return is_max_ ? -std::numeric_limits<double>::infinity()
                   : std::numeric_limits<double>::infinity();
  }
  double pick(double a, double b) const { return is_max_ ? std::max(a, b) : std::min(a, b); }

  std::size_t n_;
  bool is_max_;
  std::vector<double> tree_;
};

inline std::vector<std::uint64_t> group_keys(const Dataset& d, const GroupKey& key) {
  auto a = d.codes(key.first);
  std::vector<std::uint64_t> out(a.begin(), a.end());
  if (key.second) {
    auto b = d.codes(*key.second);
    const std::uint64_t card = d.cardinality(*key.second);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] * card + b[i];
  }
  return out;
}

}  // namespace detail

/// Runs GA over `targets`, using `reference` as the pool of historical rows.
/// Rows of `targets` that are physically present in `reference` (same
/// row id) never see themselves. Empty groups give kMissing, except for
/// count which gives 0.
inline std::vector<double> groupby_aggregate(const Dataset& reference, const Dataset& targets,
                                             const GroupKey& key, const AggSpec& spec) {
  const std::size_t m = reference.n_fields();
  if (key.first >= m || (key.second && (*key.second >= m || *key.second == key.first)))
    throw ConfigError("invalid group key");
  auto kind = reference.schema().indicator_kind(spec.indicator);
  if (!kind) throw ConfigError("unknown indicator '" + spec.indicator + "'");
  if (!compatible(spec.op, *kind))
    throw ConfigError("operator " + std::string(to_string(spec.op)) +
                      " cannot be applied to indicator '" + spec.indicator + "'");
  const bool windowed = spec.window.has_value();
  if (windowed) {
    if (!reference.has_timestamps() || !targets.has_timestamps())
      throw ConfigError("a time window requires a timestamp column");
    if (*spec.window <= 0) throw ConfigError("time windows must be positive");
  }
  if (!reference.same_encoding(targets))
    throw DataError("reference and target datasets use different dictionaries");

  const std::size_t n_ref = reference.n_rows();
  const std::vector<double> values = reference.indicator_values(spec.indicator);
  const std::vector<std::uint64_t> ref_keys = detail::group_keys(reference, key);
  const std::vector<std::uint64_t> tgt_keys = detail::group_keys(targets, key);
  auto ref_ids = reference.row_ids();
  std::span<const std::int64_t> ref_ts;
  std::span<const std::int64_t> tgt_ts;
  if (windowed) {
    ref_ts = reference.timestamps();
    tgt_ts = targets.timestamps();
  }

  // Sort by (key, ts, value, row id): a total order that does not depend on
  // the physical row order of the reference.
  std::vector<std::size_t> order(n_ref);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (ref_keys[a] != ref_keys[b]) return ref_keys[a] < ref_keys[b];
    if (windowed && ref_ts[a] != ref_ts[b]) return ref_ts[a] < ref_ts[b];
    if (values[a] != values[b]) return values[a] < values[b];
    return ref_ids[a] < ref_ids[b];
  });

  std::vector<double> sorted_values(n_ref);
  std::vector<std::int64_t> sorted_ts(windowed ? n_ref : 0);
  std::vector<std::size_t> position(n_ref);
  for (std::size_t i = 0; i < n_ref; ++i) {
    sorted_values[i] = values[order[i]];
    if (windowed) sorted_ts[i] = ref_ts[order[i]];
    position[order[i]] = i;
  }

  struct Range {
    std::size_t begin, end;
  };
  std::unordered_map<std::uint64_t, Range> groups;
  // Prefix sums of values shifted by the first value of their group.
  std::vector<long double> s1(n_ref + 1, 0.0L), s2(n_ref + 1, 0.0L);
  std::vector<double> shift(n_ref, 0.0);
  for (std::size_t i = 0; i < n_ref;) {
    std::size_t j = i;
    const std::uint64_t k = ref_keys[order[i]];
    while (j < n_ref && ref_keys[order[j]] == k) ++j;
    groups.emplace(k, Range{i, j});
    for (std::size_t t = i; t < j; ++t) {
      shift[t] = sorted_values[i];
      const long double dv = static_cast<long double>(sorted_values[t]) - sorted_values[i];
      s1[t + 1] = s1[t] + dv;
      s2[t + 1] = s2[t] + dv * dv;
    }
    i = j;
  }

  const bool need_extremes =
      spec.op == Operator::Max || spec.op == Operator::Min || spec.op == Operator::Std;
  std::optional<detail::RangeExtreme> max_tree, min_tree;
  if (need_extremes) {
    max_tree.emplace(sorted_values, true);
    min_tree.emplace(sorted_values, false);
  }

  // Leave-one-out only matters without a window: a windowed target's own
  // timestamp is never inside [ts - W, ts).
  const bool same_object = &reference == &targets;
  std::unordered_map<std::uint64_t, std::size_t> id_to_pos;
  if (!windowed && !same_object) {
    id_to_pos.reserve(n_ref);
    for (std::size_t i = 0; i < n_ref; ++i) id_to_pos.emplace(ref_ids[i], position[i]);
  }
  auto tgt_ids = targets.row_ids();

  const std::size_t n_tgt = targets.n_rows();
  std::vector<double> out(n_tgt, kMissing);
  for (std::size_t k = 0; k < n_tgt; ++k) {
    auto it = groups.find(tgt_keys[k]);
    if (it == groups.end()) {
      if (spec.op == Operator::Count) out[k] = 0.0;
      continue;
    }
    std::size_t lo = it->second.begin, hi = it->second.end;
    std::optional<std::size_t> self;
    if (windowed) {
      auto first = sorted_ts.begin() + static_cast<std::ptrdiff_t>(lo);
      auto last = sorted_ts.begin() + static_cast<std::ptrdiff_t>(hi);
      const std::int64_t start = tgt_ts[k] - *spec.window;
      auto lo_it = spec.open_lower ? std::upper_bound(first, last, start)
                                   : std::lower_bound(first, last, start);
      auto hi_it = std::lower_bound(lo_it, last, tgt_ts[k]);
      lo = static_cast<std::size_t>(lo_it - sorted_ts.begin());
      hi = static_cast<std::size_t>(hi_it - sorted_ts.begin());
    } else if (same_object) {
      self = position[k];
    } else if (auto f = id_to_pos.find(tgt_ids[k]); f != id_to_pos.end()) {
      self = f->second;
    }
    if (self && (*self < lo || *self >= hi)) self.reset();

    const std::size_t count = hi - lo - (self ? 1 : 0);
    if (count == 0) {
      if (spec.op == Operator::Count) out[k] = 0.0;
      continue;
    }
    const auto c = static_cast<long double>(count);
    auto extreme = [&](const detail::RangeExtreme& tree) {
      if (!self) return tree.query(lo, hi);
      const double a = tree.query(lo, *self);
      const double b = tree.query(*self + 1, hi);
      return &tree == &*max_tree ? std::max(a, b) : std::min(a, b);
    };
    // Sums are relative to the group shift, which is the same for the
    // whole range because ranges never cross a group boundary.
    long double d1 = s1[hi] - s1[lo];
    long double d2 = s2[hi] - s2[lo];
    if (self) {
      const long double dv = static_cast<long double>(sorted_values[*self]) - shift[*self];
      d1 -= dv;
      d2 -= dv * dv;
    }
    const long double base = shift[lo];
    switch (spec.op) {
      case Operator::Count: out[k] = static_cast<double>(count); break;
      case Operator::Sum: out[k] = static_cast<double>(d1 + base * c); break;
      case Operator::Mean: out[k] = static_cast<double>(d1 / c + base); break;
      case Operator::Max: out[k] = extreme(*max_tree); break;
      case Operator::Min: out[k] = extreme(*min_tree); break;
      case Operator::Std: {
        if (extreme(*max_tree) == extreme(*min_tree)) {
          out[k] = 0.0;
        } else {
          const long double var = std::max(0.0L, (d2 - d1 * d1 / c) / c);
          out[k] = static_cast<double>(std::sqrt(var));
        }
        break;
      }
    }
  }
  return out;
}

}  // namespace aefe
