#pragma once

// Random and hand-built datasets shared by the test binaries.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "aefe/aefe.hpp"

namespace fixture {

struct RandomSpec {
  std::size_t max_rows = 2000;
  std::size_t min_fields = 2, max_fields = 6;
  std::size_t max_cardinality = 20;
  std::int64_t time_span = 60;
};

/// Random categorical data with a binary label, a continuous column with
/// repeated values and, for about half of the seeds, timestamps with ties.
inline aefe::Dataset random_dataset(std::uint64_t seed, const RandomSpec& spec = {}, bool force_time = false) {
  std::mt19937_64 rng(seed);
  auto uni = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  const std::size_t n = uni(1, spec.max_rows);
  const std::size_t m = uni(spec.min_fields, spec.max_fields);
  const bool timed = force_time || uni(0, 1) == 1;
  aefe::Schema s;
  for (std::size_t f = 0; f < m; ++f) s.categorical_fields.push_back("F" + std::to_string(f));
  s.label = "click";
  if (timed) s.timestamp = "ts";
  s.continuous_indicators = {"price"};
  s.indicator_set = {"click", "price", "unit"};
  if (timed) s.indicator_set.push_back("ts");
  std::vector<std::vector<std::string>> cols(m, std::vector<std::string>(n));
  for (std::size_t f = 0; f < m; ++f) {
    const std::size_t card = uni(1, spec.max_cardinality);
    for (auto& v : cols[f]) v = "c" + std::to_string(uni(0, card - 1));
  }
  const double rate = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
  std::bernoulli_distribution click(rate);
  std::vector<std::uint8_t> labels(n);
  for (auto& y : labels) y = click(rng) ? 1 : 0;
  std::vector<std::int64_t> ts;
  if (timed) {
    ts.resize(n);
    for (auto& t : ts) t = static_cast<std::int64_t>(uni(0, static_cast<std::size_t>(spec.time_span)));
  }
  std::vector<double> price(n);
  for (auto& p : price) p = 0.25 * static_cast<double>(uni(0, 40)) - 3.0;
  return aefe::make_dataset(s, cols, std::move(labels), std::move(ts), {std::move(price)});
}

/// Copy of `d` sharing its dictionaries, with labels, timestamps and
/// continuous values replaced.
inline aefe::Dataset with_values(const aefe::Dataset& d, std::vector<std::uint8_t> labels,
                                 std::vector<std::int64_t> ts, std::vector<std::vector<double>> cont) {
  std::vector<aefe::CategoricalColumn> fields;
  for (std::size_t f = 0; f < d.n_fields(); ++f) fields.push_back(d.field(f));
  return aefe::Dataset(d.schema(), std::move(fields), std::move(labels), std::move(ts), std::move(cont),
                       {d.row_ids().begin(), d.row_ids().end()});
}

/// Copy of `d` with the categorical codes replaced (dictionaries kept).
inline aefe::Dataset with_codes(const aefe::Dataset& d, std::vector<std::vector<std::uint32_t>> codes) {
  std::vector<aefe::CategoricalColumn> fields;
  for (std::size_t f = 0; f < d.n_fields(); ++f) fields.push_back({std::move(codes[f]), d.field(f).dictionary});
  std::vector<std::int64_t> ts;
  if (d.has_timestamps()) ts.assign(d.timestamps().begin(), d.timestamps().end());
  std::vector<std::vector<double>> cont;
  for (std::size_t c = 0; c < d.schema().continuous_indicators.size(); ++c)
    cont.emplace_back(d.continuous(c).begin(), d.continuous(c).end());
  return aefe::Dataset(d.schema(), std::move(fields), {d.labels().begin(), d.labels().end()}, std::move(ts),
                       std::move(cont), {d.row_ids().begin(), d.row_ids().end()});
}

/// The four-row toy log: (F1, F2, day, click) = (a,x,1,1), (a,y,2,0),
/// (a,x,3,1), (b,x,4,0).
inline aefe::Dataset toy() {
  aefe::Schema s;
  s.categorical_fields = {"F1", "F2"};
  s.label = "click";
  s.timestamp = "TS";
  s.indicator_set = {"click", "TS", "unit"};
  return aefe::make_dataset(s, {{"a", "a", "a", "b"}, {"x", "y", "x", "x"}}, {1, 0, 1, 0}, {1, 2, 3, 4});
}

/// Config used by end-to-end tests on planted data.
inline aefe::RunConfig planted_config(std::size_t m, double rate, std::uint64_t seed) {
  aefe::RunConfig c;
  c.schema = aefe::planted_schema(m);
  c.operators = {aefe::Operator::Mean, aefe::Operator::Sum, aefe::Operator::Count};
  c.construction.windows = {3 * 86400, 7 * 86400};
  c.sampling_rate = rate;
  c.seed = seed;
  c.evaluation.split = aefe::TestSplit::LastWindow;
  c.evaluation.test_duration = 86400;
  c.evaluation.seed = seed;
  return c;
}

}  // namespace fixture
