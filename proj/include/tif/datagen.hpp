#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tif/dataset.hpp"
#include "tif/date.hpp"

namespace tif {

struct StableFeature {
  std::uint32_t index;
  double p_benign;
  double p_malware;
};

/// Malware-side probability moves linearly from p_malware_initial to
/// p_malware_final over ramp_months months starting at drift_month
/// (0-based month offset), then stays at p_malware_final.
struct UnstableFeature {
  std::uint32_t index;
  double p_benign;
  double p_malware_initial;
  int drift_month;
  double p_malware_final;
  int ramp_months = 6;
};

/// Active with p_active for malware of `family`, never otherwise.
struct FamilyFeature {
  std::uint32_t index;
  std::string family;
  double p_active;
};

struct NoiseFeature {
  std::uint32_t index;
  double p;
};


struct GeneratorSpec {
  std::size_t dim = 0;
  int n_train_months = 0;
  int n_test_months = 0;
  int samples_per_month = 0;
  double benign_malware_ratio = 1.0;
  Date start{std::chrono::year{2014}, std::chrono::January, std::chrono::day{1}};
  std::vector<std::string> families;
  /// family_schedule[month][f]: prevalence of families[f] among that month's
  /// malware. Zero means the family is absent that month.
  std::vector<std::vector<double>> family_schedule;
  std::vector<StableFeature> stable_features;
  std::vector<UnstableFeature> unstable_features;
  std::vector<FamilyFeature> family_features;
  std::vector<NoiseFeature> noise_features;
  std::uint64_t seed = 0;

  int total_months() const { return n_train_months + n_test_months; }
  /// First day of the first test month.
  Date test_start() const { return add_months(start, n_train_months); }
};

/// Malware-side activation probability of an unstable feature in `month`.
double unstable_p_malware(const UnstableFeature& f, int month);

/// Throws SpecError on overlapping feature sets, bad probabilities, schedule
/// rows that do not sum to one, or months that have malware but no family.
void validate(const GeneratorSpec& spec);

TemporalDataset generate(const GeneratorSpec& spec);

/// The reference drifting dataset used by the acceptance experiments.
/// d = 2000; 10 stable features (gap 0.7); 10 unstable features (gap 0.8
/// early in training, <= 0.1 from month 12 on); 20 family features over 10
/// families, the last of which first appears in month 12; the remainder is
/// sparse noise; 12 + 12 months at a benign:malware ratio of 8.3.
GeneratorSpec default_generator_spec(std::uint64_t seed = 1);

/// JSON form used by `tif generate --config`. Missing keys fall back to
/// default_generator_spec().
GeneratorSpec generator_spec_from_json(const std::string& text);
std::string generator_spec_to_json(const GeneratorSpec& spec);

}  // namespace tif
