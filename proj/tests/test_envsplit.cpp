#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <set>

#include "tif/datagen.hpp"
#include "tif/envsplit.hpp"
#include "tif/errors.hpp"

using namespace tif;

namespace {

Sample at(const std::string& id, const char* date, Label y = Label::benign) {
  Sample s;
  s.id = id;
  s.timestamp = parse_date(date);
  s.label = y;
  if (y == Label::malware) s.family = "f";
  return s;
}

TemporalDataset train_months(std::uint64_t seed) {
  const auto spec = default_generator_spec(seed);
  return generate(spec).slice(spec.start, spec.test_start());
}

}  // namespace

TEST(Envsplit, MonthlyIndexFromFirstMonth) {
  EXPECT_EQ(calendar_env_index(parse_date("2014-01-01"), parse_date("2014-03-15"), 1), 2u);
  EXPECT_EQ(calendar_env_index(parse_date("2014-01-01"), parse_date("2014-12-31"), 3), 3u);
  const TemporalDataset ds(4, {at("a", "2014-01-01"), at("b", "2014-03-15")});
  const auto a = split(ds, Granularity::monthly());
  EXPECT_EQ(a.env_of_sample[1], 1u);  // month 2 renumbered after the empty February
  EXPECT_EQ(a.env_count, 2u);
}

TEST(Envsplit, EqualCountBlocks) {
  std::vector<Sample> s;
  for (int i = 0; i < 8; ++i) s.push_back(at("s" + std::to_string(i), ("2014-01-0" + std::to_string(i + 1)).c_str()));
  const TemporalDataset ds(4, s);
  const auto a = split(ds, Granularity::equal_count(4));
  ASSERT_EQ(a.env_count, 4u);
  for (const auto& m : a.members()) EXPECT_EQ(m.size(), 2u);
  EXPECT_EQ(a.env_of_sample, (std::vector<std::size_t>{0, 0, 1, 1, 2, 2, 3, 3}));

  const auto b = split(ds, Granularity::equal_count(3));
  EXPECT_EQ(b.env_of_sample, (std::vector<std::size_t>{0, 0, 0, 1, 1, 1, 2, 2}));
  EXPECT_THROW(split(ds, Granularity::equal_count(9)), ConfigError);
  EXPECT_THROW(split(TemporalDataset(4, {}), Granularity::monthly()), ConfigError);
}

TEST(Envsplit, TwelveMonthsBothClasses) {
  const auto ds = train_months(1);
  const auto a = split(ds, Granularity::monthly());
  EXPECT_EQ(a.env_count, 12u);
  EXPECT_TRUE(a.single_class_envs.empty());
  for (const auto& m : a.members()) {
    std::set<Label> labels;
    for (auto p : m) labels.insert(ds[p].label);
    EXPECT_EQ(labels.size(), 2u);
  }
}

TEST(Envsplit, PartitionMonotoneAndRefining) {
  const auto ds = train_months(2);
  const auto monthly = split(ds, Granularity::monthly());
  const auto quarterly = split(ds, Granularity::quarterly());
  EXPECT_EQ(quarterly.env_count, 4u);
  std::size_t total = 0;
  for (const auto& m : monthly.members()) total += m.size();
  EXPECT_EQ(total, ds.size());
  std::vector<std::set<std::size_t>> parent(monthly.env_count);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (i > 0) {
      EXPECT_LE(monthly.env_of_sample[i - 1], monthly.env_of_sample[i]);
      EXPECT_LE(quarterly.env_of_sample[i - 1], quarterly.env_of_sample[i]);
    }
    parent[monthly.env_of_sample[i]].insert(quarterly.env_of_sample[i]);
  }
  for (const auto& p : parent) EXPECT_EQ(p.size(), 1u);

  for (std::size_t n : {1u, 5u, 7u, 12u}) {
    const auto a = split(ds, Granularity::equal_count(n));
    std::size_t lo = ds.size(), hi = 0;
    for (const auto& m : a.members()) {
      lo = std::min(lo, m.size());
      hi = std::max(hi, m.size());
    }
    EXPECT_LE(hi - lo, 1u);
  }
}

TEST(Envsplit, SingleClassEnvironmentsFlaggedAndMerged) {
  const TemporalDataset ds(4, {at("a", "2014-01-02"), at("b", "2014-01-03", Label::malware),
                               at("c", "2014-02-02"), at("d", "2014-03-02"),
                               at("e", "2014-03-04", Label::malware)});
  const auto a = split(ds, Granularity::monthly());
  EXPECT_EQ(a.single_class_envs, std::vector<std::size_t>{1});
  std::vector<std::size_t> merged;
  const auto m = merge_single_class_envs(ds, a, &merged);
  EXPECT_EQ(merged, std::vector<std::size_t>{1});
  EXPECT_EQ(m.env_count, 2u);
  EXPECT_EQ(m.env_of_sample, (std::vector<std::size_t>{0, 0, 0, 1, 1}));
  EXPECT_TRUE(m.single_class_envs.empty());
}

TEST(Envsplit, GranularityTextAndJson) {
  EXPECT_EQ(Granularity::parse("equal_count:5"), Granularity::equal_count(5));
  EXPECT_EQ(Granularity::parse("quarterly").to_string(), "quarterly");
  EXPECT_THROW(Granularity::parse("weekly"), ConfigError);
  const TemporalDataset ds(4, {at("a", "2014-01-02"), at("b", "2014-02-03")});
  const auto j = nlohmann::json::parse(split(ds, Granularity::monthly()).to_json(ds));
  EXPECT_EQ(j["granularity"], "monthly");
  ASSERT_EQ(j["envs"].size(), 2u);
  EXPECT_EQ(j["envs"][1]["index"], 1);
  EXPECT_EQ(j["envs"][1]["sample_ids"][0], "b");
}
