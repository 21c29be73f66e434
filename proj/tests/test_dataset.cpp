#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "aefe/aefe.hpp"
#include "fixtures.hpp"

namespace {

aefe::Schema two_fields() {
  aefe::Schema s;
  s.categorical_fields = {"F1", "F2"};
  s.label = "click";
  return s;
}

aefe::Dataset counted(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::string>> cols(2, std::vector<std::string>(n));
  std::vector<std::uint8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    cols[0][i] = "a" + std::to_string(rng() % 7);
    cols[1][i] = "b" + std::to_string(rng() % 3);
    y[i] = rng() % 10 < 3;
  }
  std::vector<std::int64_t> ts(n);
  for (std::size_t i = 0; i < n; ++i) ts[i] = static_cast<std::int64_t>(i + 1);
  auto s = two_fields();
  s.timestamp = "ts";
  return aefe::make_dataset(s, cols, std::move(y), std::move(ts));
}

}  // namespace

TEST(Load, FourRowsTwoFields) {
  std::istringstream in("F1,F2,click\na,x,1\na,y,0\nb,x,1\nb,y,0\n");
  const auto d = aefe::read_csv(in, two_fields());
  EXPECT_EQ(d.n_rows(), 4u);
  EXPECT_EQ(d.cardinality(0), 2u);
  EXPECT_EQ(d.cardinality(1), 2u);
  EXPECT_DOUBLE_EQ(d.positive_rate(), 0.5);
}

TEST(Load, NonBinaryLabelNamesRow) {
  std::istringstream in("F1,F2,click\na,x,1\na,y,2\n");
  try {
    aefe::read_csv(in, two_fields());
    FAIL();
  } catch (const aefe::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
}

TEST(Load, MissingColumnNamed) {
  std::istringstream in("F1,click\na,1\n");
  try {
    aefe::read_csv(in, two_fields());
    FAIL();
  } catch (const aefe::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("F2"), std::string::npos);
  }
}

TEST(Load, BadTimestamp) {
  auto s = two_fields();
  s.timestamp = "ts";
  std::istringstream in("F1,F2,ts,click\na,x,12,1\na,y,1.5,0\n");
  EXPECT_THROW(aefe::read_csv(in, s), aefe::DataError);
}

TEST(Load, QuotedCellsAndMissingValues) {
  std::istringstream in("F1,F2,click\n\"a,b\",,1\nc,\"x\"\"y\",0\n");
  const auto d = aefe::read_csv(in, two_fields());
  EXPECT_EQ(d.field(0).dictionary->decode(d.codes(0)[0]), "a,b");
  EXPECT_EQ(d.field(1).dictionary->decode(d.codes(1)[0]), aefe::kMissingValue);
  EXPECT_EQ(d.field(1).dictionary->decode(d.codes(1)[1]), "x\"y");
}

TEST(Load, DecodeEncodeIsIdentity) {
  std::mt19937_64 rng(5);
  std::vector<std::string> raw(1000);
  for (auto& v : raw) v = "v" + std::to_string(rng() % 97);
  const auto d = aefe::make_dataset(two_fields(), {raw, raw}, std::vector<std::uint8_t>(1000, 0));
  for (std::size_t i = 0; i < raw.size(); ++i) EXPECT_EQ(d.field(0).dictionary->decode(d.codes(0)[i]), raw[i]);
}

TEST(SchemaCheck, RejectsBadDeclarations) {
  auto s = two_fields();
  s.categorical_fields = {"F1"};
  EXPECT_THROW(s.validate(), aefe::ConfigError);
  s = two_fields();
  s.label = "F1";
  EXPECT_THROW(s.validate(), aefe::ConfigError);
  s = two_fields();
  s.indicator_set = {"price"};
  EXPECT_THROW(s.validate(), aefe::ConfigError);
  s = two_fields();
  s.categorical_fields.push_back("unit");
  EXPECT_THROW(s.validate(), aefe::ConfigError);
}

TEST(Sample, FullRateIsIdentity) {
  const auto d = counted(300, 1);
  const auto s = aefe::sample(d, 1.0, 9);
  ASSERT_EQ(s.n_rows(), d.n_rows());
  EXPECT_TRUE(std::equal(s.row_ids().begin(), s.row_ids().end(), d.row_ids().begin()));
}

TEST(Sample, DeterministicGivenSeed) {
  const auto d = counted(1000, 2);
  const auto a = aefe::sample(d, 0.5, 7), b = aefe::sample(d, 0.5, 7);
  EXPECT_EQ(a.n_rows(), 500u);
  EXPECT_TRUE(std::equal(a.row_ids().begin(), a.row_ids().end(), b.row_ids().begin()));
  EXPECT_TRUE(std::is_sorted(a.row_ids().begin(), a.row_ids().end()));
}

TEST(Sample, PositiveRatePreserved) {
  const auto d = counted(10000, 3);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = aefe::sample(d, 0.1, seed);
    EXPECT_EQ(s.n_rows(), 1000u);
    EXPECT_NEAR(s.positive_rate(), d.positive_rate(), 0.03);
  }
}

TEST(Sample, RateOutOfRange) {
  const auto d = counted(10, 1);
  EXPECT_THROW(aefe::sample(d, 0.0, 1), aefe::ConfigError);
  EXPECT_THROW(aefe::sample(d, 1.5, 1), aefe::ConfigError);
}

TEST(Split, RandomSizes) {
  const auto d = counted(10, 1);
  const auto [tr, va] = aefe::split_holdout(d, 0.2, 3, false);
  EXPECT_EQ(tr.n_rows(), 8u);
  EXPECT_EQ(va.n_rows(), 2u);
}

TEST(Split, ByTimeTakesLatest) {
  const auto d = counted(10, 1);
  const auto s = aefe::split_indices(d, 0.2, 3, true);
  ASSERT_EQ(s.valid.size(), 2u);
  EXPECT_EQ(d.timestamps()[s.valid[0]], 9);
  EXPECT_EQ(d.timestamps()[s.valid[1]], 10);
}

TEST(Split, TiedTimestampsStayTogether) {
  auto s = two_fields();
  s.timestamp = "ts";
  const auto d = aefe::make_dataset(s, {{"a", "a", "a", "a", "a"}, {"x", "x", "x", "x", "x"}}, {0, 1, 0, 1, 0},
                                    {1, 2, 3, 3, 3});
  const auto sp = aefe::split_indices(d, 0.2, 0, true);
  EXPECT_EQ(sp.valid.size(), 3u);
  EXPECT_EQ(sp.train.size(), 2u);
}

TEST(Split, PartitionAndDeterminism) {
  const auto a = aefe::random_split(101, 0.3, 4), b = aefe::random_split(101, 0.3, 4);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.valid, b.valid);
  std::vector<std::size_t> all = a.train;
  all.insert(all.end(), a.valid.begin(), a.valid.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
}

TEST(Split, EmptyPartitionRejected) {
  EXPECT_THROW(aefe::random_split(1, 0.2, 0), aefe::ConfigError);
  EXPECT_THROW(aefe::random_split(10, 1.0, 0), aefe::ConfigError);
}

TEST(Split, LastWindow) {
  const auto d = counted(10, 1);
  const auto s = aefe::split_last_window(d, 3);
  EXPECT_EQ(s.valid, (std::vector<std::size_t>{7, 8, 9}));
}

TEST(DatasetValue, TakeLeavesInputAlone) {
  const auto d = fixture::toy();
  const std::vector<std::size_t> rows{3, 0};
  const auto t = d.take(rows);
  EXPECT_EQ(d.n_rows(), 4u);
  EXPECT_EQ(t.row_ids()[0], 3u);
  EXPECT_EQ(t.timestamps()[1], 1);
  EXPECT_TRUE(t.same_encoding(d));
}

TEST(DatasetValue, FingerprintTracksCardinality) {
  const auto a = fixture::toy();
  auto s = a.schema();
  const auto b = aefe::make_dataset(s, {{"a", "a", "c", "b"}, {"x", "y", "x", "x"}}, {1, 0, 1, 0}, {1, 2, 3, 4});
  EXPECT_NE(a.fingerprint(), b.fingerprint());
  EXPECT_EQ(a.fingerprint(), fixture::toy().fingerprint());
}
