#pragma once

// Synthetic click logs with one planted field-pair interaction.

#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "aefe/dataset.hpp"
#include "aefe/error.hpp"

namespace aefe {

struct PlantedConfig {
  std::size_t n = 20000;
  std::size_t m = 8;
  std::size_t cardinality = 10;
  std::size_t days = 10;
  std::int64_t day_length = 86400;
  std::size_t field_a = 2;
  std::size_t field_b = 5;
  /// Share of rows carrying a planted code pair.
  double hot_fraction = 0.05;
  double hot_rate = 0.8;
  double base_rate = 0.05;
  /// When true every code of F_a has its own planted partner in F_b and
  /// both marginals stay uniform, so only the pair carries signal. When
  /// false a single code pair (0, 0) is planted.
  bool interaction_only = true;
  std::uint64_t seed = 1;
};

/// The F_b code planted with F_a code `a`.
inline std::size_t planted_partner(std::size_t a, std::size_t cardinality) {
  // 3 is coprime with the cardinalities used here; fall back to identity.
  return std::gcd<std::size_t>(3, cardinality) == 1 ? (3 * a + 1) % cardinality : a;
}

inline Schema planted_schema(std::size_t m) {
  Schema s;
  for (std::size_t f = 0; f < m; ++f) s.categorical_fields.push_back("F" + std::to_string(f));
  s.label = "click";
  s.timestamp = "ts";
  s.indicator_set = {"click", std::string(kUnitIndicator)};
  return s;
}

inline Dataset make_planted(const PlantedConfig& c) {
  if (c.m < 2 || c.field_a == c.field_b || c.field_a >= c.m || c.field_b >= c.m)
    throw ConfigError("planted fields must be two distinct fields of the schema");
  if (c.cardinality < 2) throw ConfigError("planted cardinality must be >= 2");
  std::mt19937_64 rng(c.seed);
  std::uniform_int_distribution<std::size_t> code(0, c.cardinality - 1);
  std::uniform_int_distribution<std::size_t> other(0, c.cardinality - 2);
  std::uniform_int_distribution<std::int64_t> when(0, static_cast<std::int64_t>(c.days) * c.day_length - 1);
  std::bernoulli_distribution hot_draw(c.hot_fraction), hot_label(c.hot_rate), base_label(c.base_rate);

  std::vector<std::vector<std::string>> cols(c.m, std::vector<std::string>(c.n));
  std::vector<std::uint8_t> labels(c.n);
  std::vector<std::int64_t> ts(c.n);
  for (std::size_t r = 0; r < c.n; ++r) {
    ts[r] = when(rng);
    for (std::size_t f = 0; f < c.m; ++f) cols[f][r] = "v" + std::to_string(code(rng));
    const bool hot = hot_draw(rng);
    std::size_t a = 0, b = 0;
    if (c.interaction_only) {
      a = code(rng);
      const auto partner = planted_partner(a, c.cardinality);
      if (hot) {
        b = partner;
      } else {
        b = other(rng);
        if (b >= partner) ++b;
      }
    } else if (!hot) {
      // uniform over the other cardinality^2 - 1 combinations
      std::uniform_int_distribution<std::size_t> combo(1, c.cardinality * c.cardinality - 1);
      const auto k = combo(rng);
      a = k / c.cardinality;
      b = k % c.cardinality;
    }
    cols[c.field_a][r] = "v" + std::to_string(a);
    cols[c.field_b][r] = "v" + std::to_string(b);
    labels[r] = (hot ? hot_label(rng) : base_label(rng)) ? 1 : 0;
  }
  return make_dataset(planted_schema(c.m), cols, std::move(labels), std::move(ts));
}

/// Writes categorical fields, then the timestamp and the label, as CSV.
inline void write_dataset_csv(std::ostream& out, const Dataset& d) {
  const auto& s = d.schema();
  for (const auto& f : s.categorical_fields) out << f << ',';
  if (s.timestamp) out << *s.timestamp << ',';
  out << s.label << '\n';
  for (std::size_t r = 0; r < d.n_rows(); ++r) {
    for (std::size_t f = 0; f < d.n_fields(); ++f) out << d.field(f).dictionary->decode(d.codes(f)[r]) << ',';
    if (s.timestamp) out << d.timestamps()[r] << ',';
    out << static_cast<int>(d.labels()[r]) << '\n';
  }
}

}  // namespace aefe
