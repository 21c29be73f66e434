#pragma once

// Columnar, dictionary-encoded storage for categorical log data together
// with loading, sampling and hold-out splitting.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "aefe/error.hpp"

namespace aefe {

inline constexpr std::string_view kMissingValue = "__MISSING__";
inline constexpr std::string_view kUnitIndicator = "unit";

enum class IndicatorKind { Label, Timestamp, Continuous, Unit };

struct Schema {
  std::vector<std::string> categorical_fields;
  std::string label;
  std::optional<std::string> timestamp;
  std::vector<std::string> continuous_indicators;
  /// Columns usable as aggregation indicators; "unit" is the implicit
  /// all-ones column used by count.
  std::vector<std::string> indicator_set;

  std::size_t n_fields() const { return categorical_fields.size(); }

  std::optional<std::size_t> field_index(std::string_view name) const {
    for (std::size_t i = 0; i < categorical_fields.size(); ++i)
      if (categorical_fields[i] == name) return i;
    return std::nullopt;
  }

  std::optional<IndicatorKind> indicator_kind(std::string_view name) const {
    if (name == kUnitIndicator) return IndicatorKind::Unit;
    if (name == label) return IndicatorKind::Label;
    if (timestamp && name == *timestamp) return IndicatorKind::Timestamp;
    for (const auto& c : continuous_indicators)
      if (c == name) return IndicatorKind::Continuous;
    return std::nullopt;
  }

  /// Throws ConfigError when the declaration is inconsistent.
  void validate() const {
    if (categorical_fields.size() < 2)
      throw ConfigError("schema needs at least two categorical fields");
    if (label.empty()) throw ConfigError("schema has no label column");
    std::unordered_set<std::string> seen;
    auto add = [&](const std::string& name) {
      if (name.empty()) throw ConfigError("schema contains an empty column name");
      if (name == kUnitIndicator)
        throw ConfigError("column name 'unit' is reserved");
      if (name.find_first_of("|&,()=/ ") != std::string::npos)
        throw ConfigError("column name '" + name +
                          "' contains one of the reserved characters |&,()=/ or space");
      if (!seen.insert(name).second)
        throw ConfigError("duplicate column name '" + name + "'");
    };
    for (const auto& f : categorical_fields) add(f);
    add(label);
    if (timestamp) add(*timestamp);
    for (const auto& c : continuous_indicators) add(c);
    for (const auto& ind : indicator_set)
      if (!indicator_kind(ind))
        throw ConfigError("indicator '" + ind +
                          "' is not the label, the timestamp, a continuous column or 'unit'");
  }
};

/// Bidirectional mapping between raw strings and dense codes.
class Dictionary {
 public:
  std::uint32_t encode(std::string_view value) {
    auto it = index_.find(std::string(value));
    if (it != index_.end()) return it->second;
    auto code = static_cast<std::uint32_t>(values_.size());
    values_.emplace_back(value);
    index_.emplace(values_.back(), code);
    return code;
  }

  std::optional<std::uint32_t> find(std::string_view value) const {
    auto it = index_.find(std::string(value));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& decode(std::uint32_t code) const { return values_.at(code); }
  std::size_t size() const { return values_.size(); }

  friend bool operator==(const Dictionary& a, const Dictionary& b) {
    return a.values_ == b.values_;
  }

 private:
  std::vector<std::string> values_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct CategoricalColumn {
  std::vector<std::uint32_t> codes;
  std::shared_ptr<const Dictionary> dictionary;
};

/// Immutable columnar dataset. Every row carries a stable `row_id` (its
/// position in the originally loaded file) so that derived datasets can
/// still recognise the same physical record.
class Dataset {
 public:
  Dataset() = default;

  Dataset(Schema schema, std::vector<CategoricalColumn> fields,
          std::vector<std::uint8_t> labels, std::vector<std::int64_t> timestamps,
          std::vector<std::vector<double>> continuous,
          std::vector<std::uint64_t> row_ids)
      : schema_(std::move(schema)),
        fields_(std::move(fields)),
        labels_(std::move(labels)),
        timestamps_(std::move(timestamps)),
        continuous_(std::move(continuous)),
        row_ids_(std::move(row_ids)) {
    check_invariants();
  }

  const Schema& schema() const { return schema_; }
  std::size_t n_rows() const { return labels_.size(); }
  std::size_t n_fields() const { return fields_.size(); }

  const CategoricalColumn& field(std::size_t i) const { return fields_.at(i); }
  std::span<const std::uint32_t> codes(std::size_t i) const { return fields_.at(i).codes; }
  std::size_t cardinality(std::size_t i) const { return fields_.at(i).dictionary->size(); }

  std::span<const std::uint8_t> labels() const { return labels_; }
  bool has_timestamps() const { return schema_.timestamp.has_value(); }
  std::span<const std::int64_t> timestamps() const {
    if (!has_timestamps()) throw ConfigError("dataset has no timestamp column");
    return timestamps_;
  }
  std::span<const double> continuous(std::size_t i) const { return continuous_.at(i); }
  std::span<const std::uint64_t> row_ids() const { return row_ids_; }

  double positive_rate() const {
    if (labels_.empty()) return 0.0;
    return static_cast<double>(std::accumulate(labels_.begin(), labels_.end(), std::size_t{0})) /
           static_cast<double>(labels_.size());
  }

  /// Numeric values of an indicator column, one per row.
  std::vector<double> indicator_values(std::string_view name) const {
    auto kind = schema_.indicator_kind(name);
    if (!kind) throw ConfigError("unknown indicator '" + std::string(name) + "'");
    switch (*kind) {
      case IndicatorKind::Unit:
        return std::vector<double>(n_rows(), 1.0);
      case IndicatorKind::Label:
        return {labels_.begin(), labels_.end()};
      case IndicatorKind::Timestamp: {
        std::vector<double> out(n_rows());
        std::transform(timestamps_.begin(), timestamps_.end(), out.begin(),
                       [](std::int64_t t) { return static_cast<double>(t); });
        return out;
      }
      case IndicatorKind::Continuous:
        for (std::size_t i = 0; i < schema_.continuous_indicators.size(); ++i)
          if (schema_.continuous_indicators[i] == name) return continuous_[i];
        break;
    }
    throw ConfigError("unknown indicator '" + std::string(name) + "'");
  }

  /// New dataset holding `rows` (in the given order). Dictionaries are shared.
  Dataset take(std::span<const std::size_t> rows) const {
    std::vector<CategoricalColumn> fields;
    fields.reserve(fields_.size());
    for (const auto& f : fields_) {
      CategoricalColumn c{{}, f.dictionary};
      c.codes.reserve(rows.size());
      for (auto r : rows) c.codes.push_back(f.codes.at(r));
      fields.push_back(std::move(c));
    }
    std::vector<std::uint8_t> labels;
    std::vector<std::int64_t> ts;
    std::vector<std::uint64_t> ids;
    labels.reserve(rows.size());
    ids.reserve(rows.size());
    for (auto r : rows) {
      labels.push_back(labels_.at(r));
      ids.push_back(row_ids_.at(r));
      if (has_timestamps()) ts.push_back(timestamps_.at(r));
    }
    std::vector<std::vector<double>> cont;
    for (const auto& col : continuous_) {
      std::vector<double> c;
      c.reserve(rows.size());
      for (auto r : rows) c.push_back(col.at(r));
      cont.push_back(std::move(c));
    }
    return Dataset(schema_, std::move(fields), std::move(labels), std::move(ts),
                   std::move(cont), std::move(ids));
  }

  /// True when both datasets encode every categorical field identically.
  bool same_encoding(const Dataset& other) const {
    if (fields_.size() != other.fields_.size()) return false;
    for (std::size_t i = 0; i < fields_.size(); ++i) {
      const auto& a = fields_[i].dictionary;
      const auto& b = other.fields_[i].dictionary;
      if (a != b && !(*a == *b)) return false;
    }
    return true;
  }

  /// FNV-1a over field names and dictionary cardinalities, as 16 hex digits.
  std::string fingerprint() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::string_view s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
      }
      h ^= 0xff;
      h *= 1099511628211ULL;
    };
    for (std::size_t i = 0; i < fields_.size(); ++i) {
      mix(schema_.categorical_fields[i]);
      mix(std::to_string(cardinality(i)));
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
    return out;
  }

 private:
  void check_invariants() const {
    const std::size_t n = labels_.size();
    if (fields_.size() != schema_.categorical_fields.size())
      throw DataError("categorical column count does not match the schema");
    for (const auto& f : fields_) {
      if (f.codes.size() != n) throw DataError("categorical column length mismatch");
      if (!f.dictionary) throw DataError("categorical column without dictionary");
      for (auto c : f.codes)
        if (c >= f.dictionary->size()) throw DataError("categorical code out of range");
    }
    for (auto y : labels_)
      if (y > 1) throw DataError("label values must be 0 or 1");
    if (has_timestamps() ? timestamps_.size() != n : !timestamps_.empty())
      throw DataError("timestamp column length mismatch");
    if (continuous_.size() != schema_.continuous_indicators.size())
      throw DataError("continuous column count does not match the schema");
    for (const auto& c : continuous_) {
      if (c.size() != n) throw DataError("continuous column length mismatch");
      for (double v : c)
        if (!std::isfinite(v)) throw DataError("continuous indicators must be finite");
    }
    if (row_ids_.size() != n) throw DataError("row id column length mismatch");
  }

  Schema schema_;
  std::vector<CategoricalColumn> fields_;
  std::vector<std::uint8_t> labels_;
  std::vector<std::int64_t> timestamps_;
  std::vector<std::vector<double>> continuous_;
  std::vector<std::uint64_t> row_ids_;
};

/// Builds a dataset from raw string columns (one vector per categorical
/// field). Empty strings become the reserved missing value.
inline Dataset make_dataset(Schema schema,
                            const std::vector<std::vector<std::string>>& categorical,
                            std::vector<std::uint8_t> labels,
                            std::vector<std::int64_t> timestamps = {},
                            std::vector<std::vector<double>> continuous = {}) {
  schema.validate();
  std::vector<CategoricalColumn> fields;
  for (const auto& column : categorical) {
    auto dict = std::make_shared<Dictionary>();
    CategoricalColumn c;
    c.codes.reserve(column.size());
    for (const auto& v : column) c.codes.push_back(dict->encode(v.empty() ? kMissingValue : v));
    c.dictionary = std::move(dict);
    fields.push_back(std::move(c));
  }
  std::vector<std::uint64_t> ids(labels.size());
  std::iota(ids.begin(), ids.end(), std::uint64_t{0});
  return Dataset(std::move(schema), std::move(fields), std::move(labels), std::move(timestamps),
                 std::move(continuous), std::move(ids));
}

struct CsvOptions {
  char delimiter = ',';
  bool header = true;
};

namespace detail {

/// Splits one delimited line; double quotes protect delimiters and `""`
/// escapes a quote.
inline std::vector<std::string> split_line(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Reads delimited text whose first line is a header. Rows keep file order.
inline Dataset read_csv(std::istream& in, const Schema& schema, const CsvOptions& options = {}) {
  schema.validate();
  if (!options.header) throw ConfigError("input files must start with a header line");
  std::string line;
  if (!std::getline(in, line)) throw DataError("input is empty");
  auto header = detail::split_line(line, options.delimiter);
  for (auto& h : header) h = std::string(detail::trim(h));
  auto column_of = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };

  std::vector<std::size_t> field_cols;
  for (const auto& f : schema.categorical_fields) field_cols.push_back(column_of(f));
  const std::size_t label_col = column_of(schema.label);
  std::optional<std::size_t> ts_col;
  if (schema.timestamp) ts_col = column_of(*schema.timestamp);
  std::vector<std::size_t> cont_cols;
  for (const auto& c : schema.continuous_indicators) cont_cols.push_back(column_of(c));

  std::vector<std::shared_ptr<Dictionary>> dicts;
  std::vector<std::vector<std::uint32_t>> codes(field_cols.size());
  for (std::size_t i = 0; i < field_cols.size(); ++i) dicts.push_back(std::make_shared<Dictionary>());
  std::vector<std::uint8_t> labels;
  std::vector<std::int64_t> ts;
  std::vector<std::vector<double>> cont(cont_cols.size());

  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_line(line, options.delimiter);
    if (cells.size() != header.size())
      throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                      " cells, found " + std::to_string(cells.size()));
    for (std::size_t i = 0; i < field_cols.size(); ++i) {
      auto v = detail::trim(cells[field_cols[i]]);
      codes[i].push_back(dicts[i]->encode(v.empty() ? kMissingValue : v));
    }
    auto y = detail::parse_double(cells[label_col]);
    if (!y || (*y != 0.0 && *y != 1.0))
      throw DataError("row " + std::to_string(row) + ": label '" + cells[label_col] +
                      "' is not 0 or 1");
    labels.push_back(static_cast<std::uint8_t>(*y));
    if (ts_col) {
      auto t = detail::parse_int(cells[*ts_col]);
      if (!t)
        throw DataError("row " + std::to_string(row) + ": timestamp '" + cells[*ts_col] +
                        "' is not an integer");
      ts.push_back(*t);
    }
    for (std::size_t i = 0; i < cont_cols.size(); ++i) {
      auto v = detail::parse_double(cells[cont_cols[i]]);
      if (!v || !std::isfinite(*v))
        throw DataError("row " + std::to_string(row) + ": value '" + cells[cont_cols[i]] +
                        "' of '" + schema.continuous_indicators[i] + "' is not a finite number");
      cont[i].push_back(*v);
    }
  }

  std::vector<CategoricalColumn> fields;
  for (std::size_t i = 0; i < field_cols.size(); ++i)
    fields.push_back({std::move(codes[i]), std::move(dicts[i])});
  std::vector<std::uint64_t> ids(labels.size());
  std::iota(ids.begin(), ids.end(), std::uint64_t{0});
  return Dataset(schema, std::move(fields), std::move(labels), std::move(ts), std::move(cont),
                 std::move(ids));
}

inline Dataset load_csv(const std::string& path, const Schema& schema,
                        const CsvOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in, schema, options);
}

/// Uniform sampling without replacement of round(rate * n) rows; the
/// sampled rows keep their relative order.
inline Dataset sample(const Dataset& d, double rate, std::uint64_t seed) {
  if (!(rate > 0.0 && rate <= 1.0)) throw ConfigError("sampling rate must lie in (0, 1]");
  const std::size_t n = d.n_rows();
  auto k = static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (k < n) {
    std::mt19937_64 rng(seed);
    // partial Fisher-Yates
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
  }
  return d.take(idx);
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
};

/// Random split of n row indices; round(rate * n) go to `valid`. Both
/// index lists are sorted.
inline Split random_split(std::size_t n, double rate_valid, std::uint64_t seed) {
  if (!(rate_valid > 0.0 && rate_valid < 1.0))
    throw ConfigError("validation rate must lie in (0, 1)");
  const auto k = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::llround(rate_valid * static_cast<double>(n))));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  Split s;
  s.valid.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end());
  std::sort(s.valid.begin(), s.valid.end());
  std::sort(s.train.begin(), s.train.end());
  if (s.train.empty() || s.valid.empty())
    throw ConfigError("hold-out split produced an empty partition");
  return s;
}

/// Row indices of a hold-out split. Random splits put round(rate * n)
/// rows in `valid`; time splits put whole equal-timestamp groups at or
/// above the (1 - rate) order statistic in `valid`.
inline Split split_indices(const Dataset& d, double rate_valid, std::uint64_t seed, bool by_time) {
  if (!(rate_valid > 0.0 && rate_valid < 1.0))
    throw ConfigError("validation rate must lie in (0, 1)");
  const std::size_t n = d.n_rows();
  auto k = static_cast<std::size_t>(std::llround(rate_valid * static_cast<double>(n)));
  if (!by_time) return random_split(n, rate_valid, seed);
  Split s;
  {
    auto ts = d.timestamps();
    if (n == 0 || k == 0) throw ConfigError("hold-out split produced an empty partition");
    std::vector<std::int64_t> sorted(ts.begin(), ts.end());
    std::sort(sorted.begin(), sorted.end());
    const std::int64_t threshold = sorted[n - k];
    for (std::size_t i = 0; i < n; ++i) (ts[i] >= threshold ? s.valid : s.train).push_back(i);
  }
  if (s.train.empty() || s.valid.empty())
    throw ConfigError("hold-out split produced an empty partition");
  return s;
}

inline std::pair<Dataset, Dataset> split_holdout(const Dataset& d, double rate_valid,
                                                 std::uint64_t seed, bool by_time) {
  auto s = split_indices(d, rate_valid, seed, by_time);
  return {d.take(s.train), d.take(s.valid)};
}

/// Rows whose timestamp lies in the final `duration` units, i.e.
/// ts > max_ts - duration, go to `valid`.
inline Split split_last_window(const Dataset& d, std::int64_t duration) {
  if (duration <= 0) throw ConfigError("test window must be positive");
  auto ts = d.timestamps();
  if (ts.empty()) throw ConfigError("hold-out split produced an empty partition");
  const std::int64_t hi = *std::max_element(ts.begin(), ts.end());
  Split s;
  for (std::size_t i = 0; i < ts.size(); ++i) (ts[i] > hi - duration ? s.valid : s.train).push_back(i);
  if (s.train.empty() || s.valid.empty())
    throw ConfigError("hold-out split produced an empty partition");
  return s;
}

}  // namespace aefe
