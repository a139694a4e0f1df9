#include "tif/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "tif/errors.hpp"

namespace tif {

using nlohmann::json;
using nlohmann::ordered_json;

bool Sample::has_feature(std::uint32_t index) const {
  return std::binary_search(features.begin(), features.end(), index);
}

void validate_sample(const Sample& s, std::size_t dim) {
  for (std::size_t i = 0; i < s.features.size(); ++i) {
    if (s.features[i] >= dim)
      throw SpecError("sample " + s.id + ": feature index " +
                      std::to_string(s.features[i]) + " out of range");
    if (i > 0 && s.features[i] <= s.features[i - 1])
      throw SpecError("sample " + s.id + ": features not strictly increasing");
  }
  if ((s.label == Label::malware) != s.family.has_value())
    throw SpecError("sample " + s.id + ": family must be set iff label is malware");
}

TemporalDataset::TemporalDataset(std::size_t dim, std::vector<Sample> samples,
                                 std::optional<FeatureRoles> roles)
    : dim_(dim), samples_(std::move(samples)), roles_(std::move(roles)) {
  for (const auto& s : samples_) validate_sample(s, dim_);
  std::sort(samples_.begin(), samples_.end(), [](const Sample& a, const Sample& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    return a.id < b.id;
  });
  if (!samples_.empty()) {
    t_min_ = samples_.front().timestamp;
    t_max_ = samples_.back().timestamp;
  }
}

TemporalDataset TemporalDataset::slice(const Date& from, const Date& to) const {
  std::vector<Sample> out;
  for (const auto& s : samples_)
    if (s.timestamp >= from && s.timestamp < to) out.push_back(s);
  return TemporalDataset(dim_, std::move(out), roles_);
}

TemporalDataset TemporalDataset::subset(std::span<const std::size_t> positions) const {
  std::vector<Sample> out;
  out.reserve(positions.size());
  for (std::size_t p : positions) out.push_back(samples_.at(p));
  return TemporalDataset(dim_, std::move(out), roles_);
}

TemporalDataset TemporalDataset::merged_with(const TemporalDataset& other) const {
  if (other.dim_ != dim_) throw SchemaError("cannot merge datasets of different dim");
  std::vector<Sample> out = samples_;
  out.insert(out.end(), other.samples_.begin(), other.samples_.end());
  return TemporalDataset(dim_, std::move(out), roles_);
}

std::string sample_to_jsonl(const Sample& s) {
  std::string line;
  line.reserve(64 + s.features.size() * 6);
  line += "{\"id\":";
  line += json(s.id).dump();
  line += ",\"timestamp\":\"";
  line += format_date(s.timestamp);
  line += "\",\"label\":";
  line += std::to_string(to_int(s.label));
  line += ",\"family\":";
  line += s.family ? json(*s.family).dump() : std::string("null");
  line += ",\"features\":[";
  for (std::size_t i = 0; i < s.features.size(); ++i) {
    if (i) line += ',';
    line += std::to_string(s.features[i]);
  }
  line += "]}";
  return line;
}

void write_dataset(const TemporalDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ordered_json meta;
  meta["dim"] = ds.dim();
  // An empty dataset has no time range; write the epoch so the file stays
  // schema-conformant.
  const Date lo = ds.empty() ? Date{std::chrono::year{1970}, std::chrono::January,
                                    std::chrono::day{1}}
                             : ds.t_min();
  const Date hi = ds.empty() ? lo : ds.t_max();
  meta["t_min"] = format_date(lo);
  meta["t_max"] = format_date(hi);
  if (const auto& roles = ds.roles()) {
    meta["feature_roles"] = {{"stable", roles->stable},
                             {"unstable", roles->unstable},
                             {"family", roles->family},
                             {"noise", roles->noise}};
  }
  {
    std::ofstream out(dir / "meta.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / "meta.json").string());
    out << meta.dump(2) << '\n';
  }
  std::ofstream out(dir / "samples.jsonl", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (dir / "samples.jsonl").string());
  for (const auto& s : ds.samples()) out << sample_to_jsonl(s) << '\n';
}

namespace {

std::vector<std::uint32_t> read_index_list(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  return j.at(key).get<std::vector<std::uint32_t>>();
}

Sample parse_sample(const std::string& line, std::size_t lineno, std::size_t dim) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), lineno);
  }
  Sample s;
  try {
    s.id = j.at("id").get<std::string>();
    s.timestamp = parse_date(j.at("timestamp").get<std::string>());
    const int label = j.at("label").get<int>();
    if (label != 0 && label != 1) throw ParseError("label must be 0 or 1", lineno);
    s.label = static_cast<Label>(label);
    const auto& fam = j.at("family");
    if (!fam.is_null()) s.family = fam.get<std::string>();
    s.features = j.at("features").get<std::vector<std::uint32_t>>();
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(std::string("malformed record: ") + e.what(), lineno);
  }
  try {
    validate_sample(s, dim);
  } catch (const SpecError& e) {
    throw ParseError(e.what(), lineno);
  }
  return s;
}

}  // namespace

TemporalDataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream meta_in(dir / "meta.json", std::ios::binary);
  if (!meta_in) throw ParseError("missing " + (dir / "meta.json").string());
  json meta;
  try {
    meta = json::parse(meta_in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("meta.json: ") + e.what());
  }
  std::size_t dim = 0;
  Date t_min{}, t_max{};
  std::optional<FeatureRoles> roles;
  try {
    dim = meta.at("dim").get<std::size_t>();
    t_min = parse_date(meta.at("t_min").get<std::string>());
    t_max = parse_date(meta.at("t_max").get<std::string>());
    if (meta.contains("feature_roles")) {
      const auto& r = meta.at("feature_roles");
      roles = FeatureRoles{read_index_list(r, "stable"), read_index_list(r, "unstable"),
                           read_index_list(r, "family"), read_index_list(r, "noise")};
    }
  } catch (const std::exception& e) {
    throw ParseError(std::string("meta.json: ") + e.what());
  }
  if (t_max < t_min) throw ParseError("meta.json: t_max precedes t_min");

  std::ifstream in(dir / "samples.jsonl", std::ios::binary);
  if (!in) throw ParseError("missing " + (dir / "samples.jsonl").string());
  std::vector<Sample> samples;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    samples.push_back(parse_sample(line, lineno, dim));
    const Sample& s = samples.back();
    if (s.timestamp < t_min || t_max < s.timestamp)
      throw ParseError("timestamp outside [t_min, t_max] from meta.json", lineno);
    if (samples.size() > 1) {
      const Sample& prev = samples[samples.size() - 2];
      if (s.timestamp < prev.timestamp ||
          (s.timestamp == prev.timestamp && s.id <= prev.id))
        throw ParseError("samples not in (timestamp, id) order", lineno);
    }
  }
  TemporalDataset ds(dim, std::move(samples), std::move(roles));
  if (!ds.empty() && (ds.t_min() != t_min || ds.t_max() != t_max))
    throw ParseError("meta.json: t_min/t_max disagree with samples");
  return ds;
}

}  // namespace tif
