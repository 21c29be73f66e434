#pragma once

// Materialization of feature recipes into columns, feature templates, and
// delimited-text export of feature matrices.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "aefe/aggregate.hpp"
#include "aefe/dataset.hpp"
#include "aefe/detail/parallel.hpp"
#include "aefe/error.hpp"
#include "aefe/feature_spec.hpp"

namespace aefe {

/// Borrowed view of a set of equally long numeric columns.
using ColumnSet = std::vector<std::span<const double>>;

/// Column-major numeric matrix aligned to a dataset's rows.
struct FeatureMatrix {
  std::size_t n_rows = 0;
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  /// 1 where the value was missing before imputation.
  std::vector<std::vector<std::uint8_t>> missing;

  std::size_t n_cols() const { return columns.size(); }

  ColumnSet view() const { return {columns.begin(), columns.end()}; }

  void add(std::string name, std::vector<double> column) {
    if (columns.empty() && names.empty()) n_rows = column.size();
    if (column.size() != n_rows) throw DataError("feature column length mismatch");
    std::vector<std::uint8_t> mask(column.size());
    for (std::size_t i = 0; i < column.size(); ++i) mask[i] = is_missing(column[i]) ? 1 : 0;
    names.push_back(std::move(name));
    columns.push_back(std::move(column));
    missing.push_back(std::move(mask));
  }

  FeatureMatrix rows(std::span<const std::size_t> idx) const {
    FeatureMatrix out;
    out.n_rows = idx.size();
    out.names = names;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      std::vector<double> col;
      std::vector<std::uint8_t> mask;
      col.reserve(idx.size());
      mask.reserve(idx.size());
      for (auto r : idx) {
        col.push_back(columns[c].at(r));
        mask.push_back(missing[c].at(r));
      }
      out.columns.push_back(std::move(col));
      out.missing.push_back(std::move(mask));
    }
    return out;
  }
};

struct MaterializedColumn {
  std::vector<double> values;
  /// Rows whose ratio denominator was (numerically) zero.
  std::size_t guarded_divisions = 0;
};

inline constexpr double kDivisionGuard = 1e-12;

/// Evaluates one recipe for every row of `targets`.
inline MaterializedColumn materialize(const Dataset& reference, const Dataset& targets,
                                      const FeatureSpec& spec, bool open_lower = false) {
  validate(spec, reference.schema());
  MaterializedColumn out;
  const AggSpec agg = spec.agg(open_lower);
  switch (spec.paradigm) {
    case Paradigm::Single:
    case Paradigm::Multi:
      out.values = groupby_aggregate(reference, targets, spec.key(), agg);
      break;
    case Paradigm::Ratio: {
      auto num = groupby_aggregate(reference, targets, spec.key(), agg);
      auto den = groupby_aggregate(reference, targets, GroupKey{spec.denominator, std::nullopt}, agg);
      out.values.resize(num.size());
      for (std::size_t i = 0; i < num.size(); ++i) {
        if (is_missing(num[i]) || is_missing(den[i])) {
          out.values[i] = kMissing;
        } else if (std::abs(den[i]) < kDivisionGuard) {
          out.values[i] = kMissing;
          ++out.guarded_divisions;
        } else {
          out.values[i] = num[i] / den[i];
        }
      }
      break;
    }
    case Paradigm::Distance: {
      out.values = groupby_aggregate(reference, targets, spec.key(), agg);
      const auto own = targets.indicator_values(spec.indicator);
      for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] -= own[i];
      break;
    }
  }
  return out;
}

/// Mean over the non-missing entries of `column` restricted to `rows`
/// (all rows when empty); 0 when every entry is missing.
inline double imputation_mean(std::span<const double> column, std::span<const std::size_t> rows = {}) {
  long double sum = 0;
  std::size_t n = 0;
  auto visit = [&](double v) {
    if (!is_missing(v)) {
      sum += v;
      ++n;
    }
  };
  if (rows.empty())
    for (double v : column) visit(v);
  else
    for (auto r : rows) visit(column[r]);
  return n == 0 ? 0.0 : static_cast<double>(sum / static_cast<long double>(n));
}

inline void impute(std::vector<double>& column, double value) {
  for (auto& v : column)
    if (is_missing(v)) v = value;
}

/// Where a template feature came from.
struct Provenance {
  std::string task;
  std::size_t iteration = 0;
  std::size_t pair_first = 0;
  std::size_t pair_second = 0;
  double variance = 0.0;
  double importance = 0.0;
  double score_delta = 0.0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct TemplateEntry {
  FeatureSpec spec;
  std::string name;
  double imputation = 0.0;
  Provenance provenance;
};

inline constexpr std::string_view kEngineVersion = "aefe-1.0";

/// Ordered list of effective features, reusable on the full dataset.
struct FeatureTemplate {
  std::vector<TemplateEntry> entries;
  std::string fingerprint;
  bool window_open_lower = false;
  std::string version{kEngineVersion};

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& e : entries) out.push_back(e.name);
    return out;
  }

  void validate(const Schema& schema) const {
    std::unordered_set<std::string> seen;
    for (const auto& e : entries) {
      aefe::validate(e.spec, schema);
      if (canonical_name(e.spec, schema) != e.name)
        throw TemplateError("template entry name '" + e.name + "' does not match its recipe");
      if (!seen.insert(e.name).second)
        throw TemplateError("duplicate template feature '" + e.name + "'");
      if (!std::isfinite(e.imputation))
        throw TemplateError("imputation value of '" + e.name + "' is not finite");
    }
  }
};

/// Materializes every template feature over `full` (which is its own
/// reference) and fills missing values with the stored training means.
inline FeatureMatrix apply_template(const Dataset& full, const FeatureTemplate& tpl,
                                    std::size_t threads = 1) {
  if (tpl.fingerprint != full.fingerprint())
    throw TemplateError("template fingerprint " + tpl.fingerprint +
                        " does not match dataset fingerprint " + full.fingerprint());
  tpl.validate(full.schema());
  std::vector<std::vector<double>> cols(tpl.entries.size());
  detail::parallel_for(tpl.entries.size(), threads, [&](std::size_t i) {
    cols[i] = materialize(full, full, tpl.entries[i].spec, tpl.window_open_lower).values;
  });
  FeatureMatrix out;
  out.n_rows = full.n_rows();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out.add(tpl.entries[i].name, std::move(cols[i]));
    impute(out.columns.back(), tpl.entries[i].imputation);
  }
  return out;
}

namespace detail {

inline std::string quote_cell(const std::string& s, char delim) {
  if (s.find(delim) == std::string::npos && s.find('"') == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::string format_double(double v) {
  if (is_missing(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Writes a header of feature names followed by one line per row.
inline void write_feature_matrix(std::ostream& out, const FeatureMatrix& m, char delim = ',') {
  for (std::size_t c = 0; c < m.n_cols(); ++c) {
    if (c) out << delim;
    out << detail::quote_cell(m.names[c], delim);
  }
  out << '\n';
  for (std::size_t r = 0; r < m.n_rows; ++r) {
    for (std::size_t c = 0; c < m.n_cols(); ++c) {
      if (c) out << delim;
      out << detail::format_double(m.columns[c][r]);
    }
    out << '\n';
  }
}

inline FeatureMatrix read_feature_matrix(std::istream& in, char delim = ',') {
  std::string line;
  if (!std::getline(in, line)) throw DataError("feature file is empty");
  FeatureMatrix m;
  if (!detail::trim(line).empty()) m.names = detail::split_line(line, delim);
  m.columns.resize(m.names.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (m.names.empty()) {
      // zero-column matrix: one empty line per row
      ++m.n_rows;
      continue;
    }
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_line(line, delim);
    if (cells.size() != m.names.size())
      throw DataError("feature file row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " cells");
    for (std::size_t c = 0; c < cells.size(); ++c) {
      auto v = detail::parse_double(cells[c]);
      if (!v) throw DataError("feature file row " + std::to_string(row) + ": bad number");
      m.columns[c].push_back(*v);
    }
    ++m.n_rows;
  }
  for (auto& c : m.columns) {
    std::vector<std::uint8_t> mask(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) mask[i] = is_missing(c[i]) ? 1 : 0;
    m.missing.push_back(std::move(mask));
  }
  return m;
}

}  // namespace aefe
