#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "tif/datagen.hpp"
#include "tif/dataset.hpp"
#include "tif/errors.hpp"

using namespace tif;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tif_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

Sample make(const std::string& id, const char* date, Label y, std::vector<std::uint32_t> f) {
  Sample s;
  s.id = id;
  s.timestamp = parse_date(date);
  s.label = y;
  if (y == Label::malware) s.family = "fam";
  s.features = std::move(f);
  return s;
}

const char* kMeta = R"({"dim": 16, "t_min": "2014-01-02", "t_max": "2014-02-10"})";

}  // namespace

TEST(Dataset, EmptyRoundTrip) {
  const auto dir = scratch("empty");
  const TemporalDataset ds(16, {});
  write_dataset(ds, dir);
  const auto back = read_dataset(dir);
  EXPECT_EQ(back.dim(), 16u);
  EXPECT_TRUE(back.empty());
}

TEST(Dataset, HandWrittenFixture) {
  const auto dir = scratch("fixture");
  write_text(dir / "meta.json", kMeta);
  write_text(dir / "samples.jsonl",
             R"({"id":"a","timestamp":"2014-01-02","label":0,"family":null,"features":[1,5]})"
             "\n"
             R"({"id":"b","timestamp":"2014-01-20","label":1,"family":"fam03","features":[0,2,15]})"
             "\n"
             R"({"id":"c","timestamp":"2014-02-10","label":0,"family":null,"features":[]})"
             "\n");
  const auto ds = read_dataset(dir);
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds[0].id, "a");
  EXPECT_EQ(ds[0].features, (std::vector<std::uint32_t>{1, 5}));
  EXPECT_FALSE(ds[0].family.has_value());
  EXPECT_EQ(ds[1].label, Label::malware);
  EXPECT_EQ(ds[1].family.value(), "fam03");
  EXPECT_EQ(ds[1].features, (std::vector<std::uint32_t>{0, 2, 15}));
  EXPECT_EQ(format_date(ds[2].timestamp), "2014-02-10");
  EXPECT_TRUE(ds[2].features.empty());
}

TEST(Dataset, ParseErrorsNameTheLine) {
  struct Case {
    const char* line2;
    const char* what;
  };
  const Case cases[] = {
      {R"({"id":"b","timestamp":"2014-01-20","label":1,"family":"f","features":[0,16]})", "index"},
      {R"({"id":"b","timestamp":"2014-01-20","label":0,"family":null,"features":[3,3]})", "increasing"},
      {R"({"id":"b","timestamp":"2014-01-20","label":2,"family":null,"features":[]})", "label"},
      {R"({"id":"b","timestamp":"2014-01-20","label":1,"family":null,"features":[]})", "family"},
      {R"({"id":"b","timestamp":"2014-01-01","label":0,"family":null,"features":[]})", ""},
      {R"({"id":"b","timestamp":"2014-01-20","label":0,"family":null,"features":[1])", ""},
  };
  for (const auto& c : cases) {
    const auto dir = scratch("bad");
    write_text(dir / "meta.json", kMeta);
    write_text(dir / "samples.jsonl",
               std::string(R"({"id":"a","timestamp":"2014-01-02","label":0,"family":null,"features":[]})") +
                   "\n" + c.line2 + "\n" +
                   R"({"id":"c","timestamp":"2014-02-10","label":0,"family":null,"features":[]})" + "\n");
    try {
      read_dataset(dir);
      ADD_FAILURE() << "accepted: " << c.line2;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), 2u) << c.line2;
      EXPECT_NE(std::string(e.what()).find(c.what), std::string::npos) << e.what();
    }
  }
}

TEST(Dataset, HeaderDatesMustBeOrdered) {
  const auto dir = scratch("header");
  write_text(dir / "meta.json", R"({"dim": 16, "t_min": "2014-03-01", "t_max": "2014-02-10"})");
  write_text(dir / "samples.jsonl", "");
  EXPECT_THROW(read_dataset(dir), ParseError);
}

TEST(Dataset, OrderingByTimestampThenId) {
  const TemporalDataset ds(8, {make("z", "2014-01-05", Label::benign, {}),
                               make("b", "2014-01-03", Label::benign, {1}),
                               make("a", "2014-01-05", Label::malware, {2})});
  EXPECT_EQ(ds[0].id, "b");
  EXPECT_EQ(ds[1].id, "a");
  EXPECT_EQ(ds[2].id, "z");
  EXPECT_EQ(format_date(ds.t_min()), "2014-01-03");
  EXPECT_EQ(format_date(ds.t_max()), "2014-01-05");
}

TEST(Dataset, SampleInvariantsEnforced) {
  EXPECT_THROW(TemporalDataset(4, {make("a", "2014-01-01", Label::benign, {4})}), SpecError);
  auto s = make("a", "2014-01-01", Label::benign, {});
  s.family = "x";
  EXPECT_THROW(TemporalDataset(4, {s}), SpecError);
}

TEST(Dataset, GeneratedRoundTripAndSlice) {
  const GeneratorSpec spec =
      generator_spec_from_json(R"({"seed": 3, "n_train_months": 6, "n_test_months": 4})");
  const auto ds = generate(spec);
  ASSERT_EQ(ds.size(), 10000u);
  const auto dir = scratch("roundtrip");
  write_dataset(ds, dir);
  EXPECT_EQ(read_dataset(dir), ds);

  const auto head = ds.slice(spec.start, add_months(spec.start, 6));
  EXPECT_EQ(head.size(), 6000u);
  EXPECT_EQ(head.roles(), ds.roles());
  for (std::size_t i = 1; i < ds.size(); ++i)
    EXPECT_FALSE(ds[i].timestamp < ds[i - 1].timestamp);
}
