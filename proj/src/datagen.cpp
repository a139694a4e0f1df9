#include "tif/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <set>

#include "tif/errors.hpp"
#include "tif/rng.hpp"

namespace tif {

using nlohmann::json;
using nlohmann::ordered_json;

double unstable_p_malware(const UnstableFeature& f, int month) {
  if (month <= f.drift_month) return f.p_malware_initial;
  if (month >= f.drift_month + f.ramp_months) return f.p_malware_final;
  const double t = static_cast<double>(month - f.drift_month) / f.ramp_months;
  return f.p_malware_initial + t * (f.p_malware_final - f.p_malware_initial);
}

namespace {

void check_probability(double p, const char* what, std::uint32_t index) {
  if (!(p >= 0.0 && p <= 1.0))
    throw SpecError(std::string(what) + " probability of feature " +
                    std::to_string(index) + " outside [0, 1]");
}

}  // namespace

void validate(const GeneratorSpec& spec) {
  if (spec.dim == 0) throw SpecError("dim must be positive");
  if (spec.n_train_months < 0 || spec.n_test_months < 0 || spec.total_months() == 0)
    throw SpecError("month counts must be non-negative with at least one month");
  if (spec.samples_per_month < 0) throw SpecError("samples_per_month must be >= 0");
  if (!(spec.benign_malware_ratio > 0.0))
    throw SpecError("benign_malware_ratio must be positive");

  std::set<std::uint32_t> seen;
  auto claim = [&](std::uint32_t index) {
    if (index >= spec.dim)
      throw SpecError("feature index " + std::to_string(index) + " >= dim");
    if (!seen.insert(index).second)
      throw SpecError("feature index " + std::to_string(index) +
                      " assigned to more than one planted feature");
  };
  for (const auto& f : spec.stable_features) {
    claim(f.index);
    check_probability(f.p_benign, "benign", f.index);
    check_probability(f.p_malware, "malware", f.index);
  }
  for (const auto& f : spec.unstable_features) {
    claim(f.index);
    check_probability(f.p_benign, "benign", f.index);
    check_probability(f.p_malware_initial, "initial malware", f.index);
    check_probability(f.p_malware_final, "final malware", f.index);
    if (f.ramp_months < 1)
      throw SpecError("ramp_months of feature " + std::to_string(f.index) + " must be >= 1");
  }
  std::set<std::string> family_names(spec.families.begin(), spec.families.end());
  if (family_names.size() != spec.families.size())
    throw SpecError("duplicate family name");
  for (const auto& f : spec.family_features) {
    claim(f.index);
    check_probability(f.p_active, "family", f.index);
    if (!family_names.count(f.family))
      throw SpecError("family feature " + std::to_string(f.index) +
                      " names unknown family " + f.family);
  }
  for (const auto& f : spec.noise_features) {
    claim(f.index);
    check_probability(f.p, "noise", f.index);
  }

  const bool has_malware = spec.samples_per_month > 0;
  if (has_malware && spec.family_schedule.size() != static_cast<std::size_t>(spec.total_months()))
    throw SpecError("family_schedule must have one row per month");
  for (std::size_t m = 0; m < spec.family_schedule.size(); ++m) {
    const auto& row = spec.family_schedule[m];
    if (row.size() != spec.families.size())
      throw SpecError("family_schedule row " + std::to_string(m) +
                      " does not match the family count");
    double sum = 0.0;
    for (double w : row) {
      if (!(w >= 0.0)) throw SpecError("negative family weight in month " + std::to_string(m));
      sum += w;
    }
    if (sum == 0.0 && has_malware)
      throw SpecError("empty family schedule in month " + std::to_string(m));
    if (sum > 0.0 && std::abs(sum - 1.0) > 1e-6)
      throw SpecError("family weights of month " + std::to_string(m) + " sum to " +
                      std::to_string(sum) + ", expected 1");
  }
}

TemporalDataset generate(const GeneratorSpec& spec) {
  validate(spec);

  std::vector<std::vector<const FamilyFeature*>> features_of_family(spec.families.size());
  for (const auto& f : spec.family_features) {
    const auto it = std::find(spec.families.begin(), spec.families.end(), f.family);
    features_of_family[static_cast<std::size_t>(it - spec.families.begin())].push_back(&f);
  }

  const auto n = static_cast<std::size_t>(spec.samples_per_month);
  const auto n_malware = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) / (1.0 + spec.benign_malware_ratio)));

  std::vector<Sample> samples;
  samples.reserve(n * static_cast<std::size_t>(spec.total_months()));
  std::vector<std::uint32_t> active;
  for (int month = 0; month < spec.total_months(); ++month) {
    // One stream per month so months could be generated independently.
    Rng rng = make_rng(spec.seed, static_cast<std::uint64_t>(month));
    const Date first = add_months(spec.start, month);
    const int month_days = days_in_month(first);

    std::vector<Label> labels(n, Label::benign);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_malware),
              Label::malware);
    for (std::size_t i = n; i > 1; --i)
      std::swap(labels[i - 1], labels[uniform_index(rng, i)]);

    const auto& weights = spec.family_schedule.empty()
                              ? std::vector<double>{}
                              : spec.family_schedule[static_cast<std::size_t>(month)];
    for (std::size_t i = 0; i < n; ++i) {
      Sample s;
      char id[48];
      std::snprintf(id, sizeof id, "m%03d-%06zu", month, i);
      s.id = id;
      const auto day = 1 + uniform_index(rng, static_cast<std::uint64_t>(month_days));
      s.timestamp = Date{first.year(), first.month(),
                         std::chrono::day{static_cast<unsigned>(day)}};
      s.label = labels[i];
      const bool mal = s.label == Label::malware;

      active.clear();
      std::size_t family = 0;
      if (mal) {
        double u = uniform01(rng);
        family = weights.size() - 1;
        for (std::size_t f = 0; f < weights.size(); ++f) {
          if (u < weights[f]) {
            family = f;
            break;
          }
          u -= weights[f];
        }
        while (weights[family] == 0.0) --family;  // rounding at the tail
        s.family = spec.families[family];
      }
      for (const auto& f : spec.stable_features)
        if (bernoulli(rng, mal ? f.p_malware : f.p_benign)) active.push_back(f.index);
      for (const auto& f : spec.unstable_features)
        if (bernoulli(rng, mal ? unstable_p_malware(f, month) : f.p_benign))
          active.push_back(f.index);
      if (mal)
        for (const FamilyFeature* f : features_of_family[family])
          if (bernoulli(rng, f->p_active)) active.push_back(f->index);
      for (const auto& f : spec.noise_features)
        if (bernoulli(rng, f.p)) active.push_back(f.index);
      std::sort(active.begin(), active.end());
      s.features = active;
      samples.push_back(std::move(s));
    }
  }

  FeatureRoles roles;
  for (const auto& f : spec.stable_features) roles.stable.push_back(f.index);
  for (const auto& f : spec.unstable_features) roles.unstable.push_back(f.index);
  for (const auto& f : spec.family_features) roles.family.push_back(f.index);
  for (const auto& f : spec.noise_features) roles.noise.push_back(f.index);
  for (auto* v : {&roles.stable, &roles.unstable, &roles.family, &roles.noise})
    std::sort(v->begin(), v->end());
  return TemporalDataset(spec.dim, std::move(samples), std::move(roles));
}

namespace {

std::vector<std::vector<double>> default_schedule(int n_train, int n_test,
                                                  std::size_t n_families) {
  // Families 0..F-2 rise and fall over the whole period so the family mix
  // drifts month by month; the last family is unseen until the test period.
  const int total = n_train + n_test;
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(total),
                                        std::vector<double>(n_families, 0.0));
  if (n_families < 2) {
    for (auto& row : rows)
      if (!row.empty()) row[0] = 1.0;
    return rows;
  }
  const std::size_t seen = n_families - 1;
  for (int m = 0; m < total; ++m) {
    auto& row = rows[static_cast<std::size_t>(m)];
    double sum = 0.0;
    for (std::size_t f = 0; f < seen; ++f) {
      const double center = (static_cast<double>(f) + 0.5) * total / static_cast<double>(seen);
      const double z = (m - center) / (0.35 * total);
      row[f] = std::exp(-z * z);
      sum += row[f];
    }
    if (m >= n_train) {
      row[seen] = 0.25 * sum / 0.75;
      sum += row[seen];
    }
    for (double& w : row) w /= sum;
  }
  return rows;
}

}  // namespace

GeneratorSpec default_generator_spec(std::uint64_t seed) {
  GeneratorSpec spec;
  spec.dim = 2000;
  spec.n_train_months = 12;
  spec.n_test_months = 12;
  spec.samples_per_month = 1000;
  spec.benign_malware_ratio = 8.3;
  spec.seed = seed;
  std::uint32_t next = 0;
  for (int i = 0; i < 10; ++i) spec.stable_features.push_back({next++, 0.05, 0.75});
  for (int i = 0; i < 10; ++i)
    spec.unstable_features.push_back({next++, 0.05, 0.85, 9, 0.10, 3});
  constexpr std::size_t kFamilies = 10;
  for (std::size_t f = 0; f < kFamilies; ++f) {
    char name[16];
    std::snprintf(name, sizeof name, "fam%02zu", f);
    spec.families.emplace_back(name);
  }
  for (std::size_t f = 0; f < kFamilies; ++f)
    for (int k = 0; k < 2; ++k) spec.family_features.push_back({next++, spec.families[f], 0.8});
  for (std::uint32_t i = next; i < spec.dim; ++i) spec.noise_features.push_back({i, 0.01});
  spec.family_schedule = default_schedule(spec.n_train_months, spec.n_test_months, kFamilies);
  return spec;
}

GeneratorSpec generator_spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("generator config: ") + e.what());
  }
  GeneratorSpec spec = default_generator_spec(j.value("seed", std::uint64_t{1}));
  try {
    spec.dim = j.value("dim", spec.dim);
    spec.n_train_months = j.value("n_train_months", spec.n_train_months);
    spec.n_test_months = j.value("n_test_months", spec.n_test_months);
    spec.samples_per_month = j.value("samples_per_month", spec.samples_per_month);
    spec.benign_malware_ratio = j.value("benign_malware_ratio", spec.benign_malware_ratio);
    if (j.contains("start")) spec.start = parse_date(j.at("start").get<std::string>());
    if (j.contains("families")) spec.families = j.at("families").get<std::vector<std::string>>();
    if (j.contains("family_schedule"))
      spec.family_schedule = j.at("family_schedule").get<std::vector<std::vector<double>>>();
    else if (spec.total_months() != 24 || j.contains("families"))
      spec.family_schedule =
          default_schedule(spec.n_train_months, spec.n_test_months, spec.families.size());
    if (j.contains("stable_features")) {
      spec.stable_features.clear();
      for (const auto& f : j.at("stable_features"))
        spec.stable_features.push_back({f.at(0).get<std::uint32_t>(), f.at(1).get<double>(),
                                        f.at(2).get<double>()});
    }
    if (j.contains("unstable_features")) {
      spec.unstable_features.clear();
      for (const auto& f : j.at("unstable_features"))
        spec.unstable_features.push_back({f.at(0).get<std::uint32_t>(), f.at(1).get<double>(),
                                          f.at(2).get<double>(), f.at(3).get<int>(),
                                          f.at(4).get<double>(),
                                          f.size() > 5 ? f.at(5).get<int>() : 6});
    }
    if (j.contains("family_features")) {
      spec.family_features.clear();
      for (const auto& f : j.at("family_features"))
        spec.family_features.push_back({f.at(0).get<std::uint32_t>(),
                                        f.at(1).get<std::string>(), f.at(2).get<double>()});
    }
    if (j.contains("noise_features")) {
      spec.noise_features.clear();
      for (const auto& f : j.at("noise_features"))
        spec.noise_features.push_back({f.at(0).get<std::uint32_t>(), f.at(1).get<double>()});
    } else {
      // Default noise fills every index not claimed by a planted feature.
      const double p = j.value("noise_p", 0.01);
      std::set<std::uint32_t> claimed;
      for (const auto& f : spec.stable_features) claimed.insert(f.index);
      for (const auto& f : spec.unstable_features) claimed.insert(f.index);
      for (const auto& f : spec.family_features) claimed.insert(f.index);
      spec.noise_features.clear();
      for (std::uint32_t i = 0; i < spec.dim; ++i)
        if (!claimed.count(i)) spec.noise_features.push_back({i, p});
    }
  } catch (const SpecError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(std::string("generator config: ") + e.what());
  }
  return spec;
}

std::string generator_spec_to_json(const GeneratorSpec& spec) {
  ordered_json j;
  j["dim"] = spec.dim;
  j["n_train_months"] = spec.n_train_months;
  j["n_test_months"] = spec.n_test_months;
  j["samples_per_month"] = spec.samples_per_month;
  j["benign_malware_ratio"] = spec.benign_malware_ratio;
  j["start"] = format_date(spec.start);
  j["seed"] = spec.seed;
  j["families"] = spec.families;
  j["family_schedule"] = spec.family_schedule;
  j["stable_features"] = json::array();
  for (const auto& f : spec.stable_features)
    j["stable_features"].push_back({f.index, f.p_benign, f.p_malware});
  j["unstable_features"] = json::array();
  for (const auto& f : spec.unstable_features)
    j["unstable_features"].push_back(
        {f.index, f.p_benign, f.p_malware_initial, f.drift_month, f.p_malware_final,
         f.ramp_months});
  j["family_features"] = json::array();
  for (const auto& f : spec.family_features)
    j["family_features"].push_back({f.index, f.family, f.p_active});
  j["noise_features"] = json::array();
  for (const auto& f : spec.noise_features) j["noise_features"].push_back({f.index, f.p});
  return j.dump(2);
}

}  // namespace tif
