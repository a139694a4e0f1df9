#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tif/dataset.hpp"

namespace tif {

/// How training samples are cut into temporal environments.
struct Granularity {
  enum class Kind { monthly, quarterly, equal_count };
  Kind kind = Kind::monthly;
  std::size_t blocks = 0;  // equal_count only

  static Granularity monthly() { return {Kind::monthly, 0}; }
  static Granularity quarterly() { return {Kind::quarterly, 0}; }
  static Granularity equal_count(std::size_t n) { return {Kind::equal_count, n}; }

  /// "monthly", "quarterly" or "equal_count:<n>".
  std::string to_string() const;
  static Granularity parse(const std::string& text);

  friend bool operator==(const Granularity&, const Granularity&) = default;
};

/// Sample position -> environment index. Positions refer to the dataset the
/// assignment was computed from.
struct EnvironmentAssignment {
  Granularity granularity;
  std::vector<std::size_t> env_of_sample;
  std::size_t env_count = 0;
  /// For date granularities: first day of each environment ("YYYY-MM-DD").
  /// For equal_count: the starting sample position of each block.
  std::vector<std::string> boundaries;
  /// Environments missing one of the two classes.
  std::vector<std::size_t> single_class_envs;

  /// Positions grouped by environment, each group in time order.
  std::vector<std::vector<std::size_t>> members() const;

  /// environments.json body.
  std::string to_json(const TemporalDataset& ds) const;
};

/// Environment index of a date relative to the first training date.
/// e = whole calendar months elapsed / stride (stride 1 or 3).
std::size_t calendar_env_index(const Date& t_min, const Date& t, int stride_months);

EnvironmentAssignment split(const TemporalDataset& ds, Granularity granularity);

/// Folds every single-class environment into its nearest neighbour in time
/// (the previous one when both exist) and renumbers contiguously. Returns the
/// merged assignment; `merged` receives the indices that were folded.
EnvironmentAssignment merge_single_class_envs(const TemporalDataset& ds,
                                              const EnvironmentAssignment& in,
                                              std::vector<std::size_t>* merged = nullptr);

}  // namespace tif
