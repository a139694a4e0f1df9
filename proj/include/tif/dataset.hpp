#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tif/date.hpp"

namespace tif {

enum class Label : std::uint8_t { benign = 0, malware = 1 };

inline int to_int(Label label) { return static_cast<int>(label); }

/// One application: a sparse binary feature vector with its observation date.
struct Sample {
  std::string id;
  Date timestamp{};
  Label label = Label::benign;
  std::optional<std::string> family;  // set iff malware
  std::vector<std::uint32_t> features;  // strictly increasing, < dim

  bool has_feature(std::uint32_t index) const;
  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Ground-truth feature roles recorded by the synthetic generator.
struct FeatureRoles {
  std::vector<std::uint32_t> stable;
  std::vector<std::uint32_t> unstable;
  std::vector<std::uint32_t> family;
  std::vector<std::uint32_t> noise;

  friend bool operator==(const FeatureRoles&, const FeatureRoles&) = default;
};

/// Time-ordered multiset of samples. Ordering is (timestamp, id).
class TemporalDataset {
 public:
  TemporalDataset() = default;
  TemporalDataset(std::size_t dim, std::vector<Sample> samples,
                  std::optional<FeatureRoles> roles = std::nullopt);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  std::span<const Sample> samples() const { return samples_; }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  const std::optional<FeatureRoles>& roles() const { return roles_; }

  /// Only meaningful when non-empty.
  Date t_min() const { return t_min_; }
  Date t_max() const { return t_max_; }

  /// Samples whose timestamp falls in [from, to). Keeps dim and roles.
  TemporalDataset slice(const Date& from, const Date& to) const;

  /// Samples selected by position; positions must be increasing.
  TemporalDataset subset(std::span<const std::size_t> positions) const;

  /// Union of two datasets with the same dim, re-sorted.
  TemporalDataset merged_with(const TemporalDataset& other) const;

  friend bool operator==(const TemporalDataset&, const TemporalDataset&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<Sample> samples_;
  std::optional<FeatureRoles> roles_;
  Date t_min_{};
  Date t_max_{};
};

/// Throws SpecError naming the sample on any broken Sample invariant.
void validate_sample(const Sample& sample, std::size_t dim);

/// Writes `meta.json` and `samples.jsonl` under `dir` (created if missing).
void write_dataset(const TemporalDataset& ds, const std::filesystem::path& dir);

/// Reads a dataset directory. Throws ParseError with the offending line.
TemporalDataset read_dataset(const std::filesystem::path& dir);

/// Serialises one sample as its samples.jsonl line (no trailing newline).
std::string sample_to_jsonl(const Sample& sample);

}  // namespace tif
