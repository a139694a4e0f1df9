#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tif/dataset.hpp"
#include "tif/model.hpp"
#include "tif/tensor.hpp"

namespace tif {

// ---------------------------------------------------------------------------
// Classification quality

struct ClassificationReport {
  double macro_f1 = 0.0;
  double f1[kNumClasses] = {0.0, 0.0};
  double precision_malware = 0.0;
  double recall_malware = 0.0;
  /// Set when some per-class F1 was 0/0 and counted as 0.
  bool degenerate = false;
};

ClassificationReport classify_report(std::span<const Label> y_true, std::span<const Label> y_pred);

/// Unweighted mean of the two per-class F1 scores. 0/0 components count as 0.
double macro_f1(std::span<const Label> y_true, std::span<const Label> y_pred);

/// A metric evaluated over consecutive time windows.
struct MetricSeries {
  std::vector<std::string> window_labels;
  std::vector<double> values;
};

/// Area under time: trapezoidal mean over consecutive points. Needs >= 2.
double aut(std::span<const double> values);
double aut(const MetricSeries& series);

// ---------------------------------------------------------------------------
// Feature statistics

/// Fraction of the given samples where `feature` is active. 0 for an empty set.
double active_ratio(const TemporalDataset& ds, std::span<const std::size_t> subset,
                    std::uint32_t feature);
double active_ratio(const TemporalDataset& ds, std::uint32_t feature);

/// Active ratio of every feature over the subset (length dim).
std::vector<double> active_ratios(const TemporalDataset& ds, std::span<const std::size_t> subset);

/// |r(f, malware) - r(f, benign)| for every feature (length dim).
std::vector<double> class_gaps(const TemporalDataset& ds);

struct StabilityResult {
  bool stable = false;
  double max_deviation = 0.0;
};

struct StabilityOptions {
  double epsilon = 0.05;
  std::size_t n0 = 500;
  std::size_t random_subsets = 200;
  std::uint64_t seed = 0;
};

/// Monte Carlo reading of the "every large subset" condition: the largest
/// |r(f, S') - r(f, S)| over random subsets of size >= n0 and over every
/// sliding window of consecutive calendar months, the window width being
/// the smallest number of months that always holds n0 samples (the whole
/// span if none does).
StabilityResult stability_check(const TemporalDataset& ds, std::uint32_t feature,
                                const StabilityOptions& options);

struct DiscriminabilityResult {
  bool discriminative = false;
  double gap = 0.0;
  double min_subsample_gap = 0.0;
};

struct DiscriminabilityOptions {
  double delta = 0.5;
  std::size_t subsamples = 100;
  double rate = 0.5;
  std::uint64_t seed = 0;
};

/// Class gap, verdict gap >= delta, and the smallest gap across random
/// per-class subsamples at `rate`.
DiscriminabilityResult discriminability_check(const TemporalDataset& ds, std::uint32_t feature,
                                              const DiscriminabilityOptions& options);

// ---------------------------------------------------------------------------
// Attribution

/// A scalar function of a sparse input that can report its value and its
/// gradient with respect to every stored entry of each row.
class ScalarFunction {
 public:
  virtual ~ScalarFunction() = default;
  virtual std::size_t dim() const = 0;
  /// values[r] = f(row r); input_grad aligned with batch.values.
  virtual void evaluate(const SparseBatch& batch, std::vector<double>& values,
                        std::vector<double>& input_grad) const = 0;
};

/// The model's logit, signed toward the target class.
class ModelLogit final : public ScalarFunction {
 public:
  explicit ModelLogit(const ModelState& state, Label target = Label::malware)
      : state_(state), sign_(target == Label::malware ? 1.0 : -1.0) {}
  std::size_t dim() const override { return state_.arch.dim; }
  void evaluate(const SparseBatch& batch, std::vector<double>& values,
                std::vector<double>& input_grad) const override;

 private:
  const ModelState& state_;
  double sign_;
};

struct IgOptions {
  std::size_t steps = 64;
  std::size_t noise_runs = 5;
  double flip_prob = 0.01;
  std::uint64_t seed = 0;
};

/// Sparse attribution: attribution[t] belongs to feature indices[t].
struct Attribution {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
};

/// Integrated gradients from the all-zero baseline with a midpoint Riemann
/// sum, averaged over noise_runs copies of the input with independent bit
/// flips (none when flip_prob is 0 or noise_runs is 1 with flip_prob 0).
Attribution integrated_gradients(const ScalarFunction& f, std::span<const std::uint32_t> x,
                                 const IgOptions& options);

/// Dense form of integrated_gradients (length dim).
std::vector<double> integrated_gradients_dense(const ScalarFunction& f,
                                               std::span<const std::uint32_t> x,
                                               const IgOptions& options);

struct FcsResult {
  std::vector<double> gap;         // per feature
  std::vector<double> importance;  // mean positive IG toward malware
  std::vector<double> score;       // gap * importance
  double total = 0.0;
};

struct FcsOptions {
  IgOptions ig;
  /// Upper bound on malware samples attributed per window (0 = all). The
  /// first max_samples by (timestamp, id) are used.
  std::size_t max_samples = 0;
};

FcsResult fcs(const ModelState& state, const TemporalDataset& window, const FcsOptions& options);

/// Per-feature FCS from precomputed gaps and importances.
FcsResult fcs_from(std::span<const double> gap, std::span<const double> importance);

// ---------------------------------------------------------------------------
// Representation stability

/// Mean normalised embedding of the malware samples (empty if none).
std::vector<double> mean_malware_embedding(const ModelState& state, const TemporalDataset& ds);

double cosine(std::span<const double> a, std::span<const double> b);

struct SimilaritySeries {
  std::vector<double> cosine;  // NaN for windows without malware
  double variance = 0.0;       // population variance over defined windows
};

SimilaritySeries representation_similarity_variance(const ModelState& state,
                                                    const TemporalDataset& validation,
                                                    std::span<const TemporalDataset> windows);

/// Population variance.
double variance(std::span<const double> values);

// ---------------------------------------------------------------------------
// Windowing

/// Consecutive calendar-month windows starting at `from`.
std::vector<TemporalDataset> monthly_windows(const TemporalDataset& ds, const Date& from,
                                             int count);

/// Worker count from TIF_THREADS (default 1, at least 1).
std::size_t worker_threads();

/// Runs fn(i) for i in [0, n) on up to worker_threads() threads. Results
/// must be written to per-index slots so the outcome is order-independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace tif
