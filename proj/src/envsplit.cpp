#include "tif/envsplit.hpp"

#include <algorithm>
#include <array>
#include <nlohmann/json.hpp>

#include "tif/errors.hpp"

namespace tif {

std::string Granularity::to_string() const {
  switch (kind) {
    case Kind::monthly:
      return "monthly";
    case Kind::quarterly:
      return "quarterly";
    case Kind::equal_count:
      return "equal_count:" + std::to_string(blocks);
  }
  return "?";
}

Granularity Granularity::parse(const std::string& text) {
  if (text == "monthly") return monthly();
  if (text == "quarterly") return quarterly();
  const std::string prefix = "equal_count:";
  if (text.rfind(prefix, 0) == 0) {
    try {
      std::size_t used = 0;
      const long n = std::stol(text.substr(prefix.size()), &used);
      if (used == text.size() - prefix.size() && n > 0)
        return equal_count(static_cast<std::size_t>(n));
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("unknown granularity '" + text +
                    "' (expected monthly, quarterly or equal_count:<n>)");
}

std::size_t calendar_env_index(const Date& t_min, const Date& t, int stride_months) {
  const int months = months_between(t_min, t);
  return static_cast<std::size_t>(months / stride_months);
}

std::vector<std::vector<std::size_t>> EnvironmentAssignment::members() const {
  std::vector<std::vector<std::size_t>> out(env_count);
  for (std::size_t i = 0; i < env_of_sample.size(); ++i) out[env_of_sample[i]].push_back(i);
  return out;
}

std::string EnvironmentAssignment::to_json(const TemporalDataset& ds) const {
  nlohmann::ordered_json j;
  j["granularity"] = granularity.to_string();
  j["envs"] = nlohmann::json::array();
  const auto groups = members();
  for (std::size_t e = 0; e < groups.size(); ++e) {
    nlohmann::ordered_json env;
    env["index"] = e;
    std::vector<std::string> ids;
    ids.reserve(groups[e].size());
    for (std::size_t p : groups[e]) ids.push_back(ds[p].id);
    env["sample_ids"] = ids;
    j["envs"].push_back(env);
  }
  return j.dump(2);
}

namespace {

void flag_single_class(const TemporalDataset& ds, EnvironmentAssignment& a) {
  std::vector<std::array<std::size_t, 2>> counts(a.env_count, {0, 0});
  for (std::size_t i = 0; i < ds.size(); ++i)
    ++counts[a.env_of_sample[i]][static_cast<std::size_t>(to_int(ds[i].label))];
  a.single_class_envs.clear();
  for (std::size_t e = 0; e < a.env_count; ++e)
    if (counts[e][0] == 0 || counts[e][1] == 0) a.single_class_envs.push_back(e);
}

}  // namespace

EnvironmentAssignment split(const TemporalDataset& ds, Granularity granularity) {
  if (ds.empty()) throw ConfigError("cannot split an empty dataset");
  EnvironmentAssignment a;
  a.granularity = granularity;
  a.env_of_sample.resize(ds.size());

  if (granularity.kind == Granularity::Kind::equal_count) {
    const std::size_t n = granularity.blocks;
    if (n == 0 || n > ds.size())
      throw ConfigError("equal_count(" + std::to_string(n) + ") needs 1 <= n <= " +
                        std::to_string(ds.size()));
    // The first (size % n) blocks get one extra sample.
    const std::size_t base = ds.size() / n;
    const std::size_t extra = ds.size() % n;
    std::size_t pos = 0;
    for (std::size_t b = 0; b < n; ++b) {
      a.boundaries.push_back(std::to_string(pos));
      const std::size_t len = base + (b < extra ? 1 : 0);
      for (std::size_t k = 0; k < len; ++k) a.env_of_sample[pos++] = b;
    }
    a.env_count = n;
  } else {
    const int stride = granularity.kind == Granularity::Kind::monthly ? 1 : 3;
    const Date origin = first_of_month(ds.t_min());
    std::vector<std::size_t> raw(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
      raw[i] = calendar_env_index(origin, ds[i].timestamp, stride);
    // Renumber so indices are contiguous even across empty calendar windows.
    std::vector<std::size_t> used(raw.begin(), raw.end());
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());
    for (std::size_t i = 0; i < ds.size(); ++i)
      a.env_of_sample[i] = static_cast<std::size_t>(
          std::lower_bound(used.begin(), used.end(), raw[i]) - used.begin());
    a.env_count = used.size();
    for (std::size_t r : used)
      a.boundaries.push_back(format_date(add_months(origin, static_cast<int>(r) * stride)));
  }
  flag_single_class(ds, a);
  return a;
}

EnvironmentAssignment merge_single_class_envs(const TemporalDataset& ds,
                                              const EnvironmentAssignment& in,
                                              std::vector<std::size_t>* merged) {
  EnvironmentAssignment a = in;
  if (merged) merged->clear();
  while (!a.single_class_envs.empty() && a.env_count > 1) {
    const std::size_t e = a.single_class_envs.front();
    const std::size_t target = e > 0 ? e - 1 : 1;
    if (merged) merged->push_back(e);
    for (auto& env : a.env_of_sample) {
      if (env == e) env = target;
      if (env > e) --env;
    }
    a.boundaries.erase(a.boundaries.begin() + static_cast<std::ptrdiff_t>(e > 0 ? e : 1));
    --a.env_count;
    flag_single_class(ds, a);
  }
  return a;
}

}  // namespace tif
