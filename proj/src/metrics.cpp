#include "tif/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "tif/kernels.hpp"
#include "tif/rng.hpp"

namespace tif {

ClassificationReport classify_report(std::span<const Label> y_true, std::span<const Label> y_pred) {
  if (y_true.empty() || y_true.size() != y_pred.size())
    throw std::invalid_argument("macro_f1: inputs must be non-empty and of equal length");
  // counts[t][p]
  std::size_t counts[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < y_true.size(); ++i) ++counts[to_int(y_true[i])][to_int(y_pred[i])];

  ClassificationReport rep;
  for (int c = 0; c < kNumClasses; ++c) {
    const double tp = static_cast<double>(counts[c][c]);
    const double fp = static_cast<double>(counts[1 - c][c]);
    const double fn = static_cast<double>(counts[c][1 - c]);
    const double denom = 2 * tp + fp + fn;
    if (denom == 0.0) {
      rep.degenerate = true;
      rep.f1[c] = 0.0;
    } else {
      rep.f1[c] = 2 * tp / denom;
    }
  }
  rep.macro_f1 = 0.5 * (rep.f1[0] + rep.f1[1]);
  const double tp = static_cast<double>(counts[1][1]);
  const double pred_pos = tp + static_cast<double>(counts[0][1]);
  const double actual_pos = tp + static_cast<double>(counts[1][0]);
  rep.precision_malware = pred_pos > 0 ? tp / pred_pos : 0.0;
  rep.recall_malware = actual_pos > 0 ? tp / actual_pos : 0.0;
  return rep;
}

double macro_f1(std::span<const Label> y_true, std::span<const Label> y_pred) {
  return classify_report(y_true, y_pred).macro_f1;
}

double aut(std::span<const double> v) {
  if (v.size() < 2) throw std::invalid_argument("aut needs at least two points");
  // running mean of the trapezoid segments; exact for a constant series
  double mean = 0.0;
  for (std::size_t t = 0; t + 1 < v.size(); ++t)
    mean += ((v[t + 1] + v[t]) / 2.0 - mean) / static_cast<double>(t + 1);
  return mean;
}

double aut(const MetricSeries& series) { return aut(series.values); }

double active_ratio(const TemporalDataset& ds, std::span<const std::size_t> subset,
                    std::uint32_t feature) {
  if (subset.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t p : subset) hits += ds[p].has_feature(feature) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(subset.size());
}

double active_ratio(const TemporalDataset& ds, std::uint32_t feature) {
  if (ds.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : ds.samples()) hits += s.has_feature(feature) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

std::vector<double> active_ratios(const TemporalDataset& ds, std::span<const std::size_t> subset) {
  std::vector<double> r(ds.dim(), 0.0);
  if (subset.empty()) return r;
  for (std::size_t p : subset)
    for (auto f : ds[p].features) r[f] += 1.0;
  for (double& x : r) x /= static_cast<double>(subset.size());
  return r;
}

std::vector<double> class_gaps(const TemporalDataset& ds) {
  std::vector<std::size_t> cls[kNumClasses];
  for (std::size_t i = 0; i < ds.size(); ++i) cls[to_int(ds[i].label)].push_back(i);
  const auto rb = active_ratios(ds, cls[0]);
  const auto rm = active_ratios(ds, cls[1]);
  std::vector<double> gap(ds.dim());
  for (std::size_t j = 0; j < gap.size(); ++j) gap[j] = std::abs(rm[j] - rb[j]);
  return gap;
}

StabilityResult stability_check(const TemporalDataset& ds, std::uint32_t feature,
                                const StabilityOptions& opt) {
  if (opt.n0 > ds.size() || ds.empty())
    throw std::invalid_argument("stability_check: n0 exceeds the sample count");
  if (opt.random_subsets < 1) throw std::invalid_argument("stability_check: M must be >= 1");
  std::vector<char> active(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) active[i] = ds[i].has_feature(feature) ? 1 : 0;
  const double overall =
      static_cast<double>(std::accumulate(active.begin(), active.end(), std::size_t{0})) /
      static_cast<double>(ds.size());

  double worst = 0.0;
  Rng rng = make_rng(opt.seed, feature);
  std::vector<std::size_t> order(ds.size());
  const std::size_t lo = std::max<std::size_t>(opt.n0, 1);
  for (std::size_t m = 0; m < opt.random_subsets; ++m) {
    const std::size_t size = lo + uniform_index(rng, ds.size() - lo + 1);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t hits = 0;
    for (std::size_t i = 0; i < size; ++i) {
      std::swap(order[i], order[i + uniform_index(rng, ds.size() - i)]);
      hits += static_cast<std::size_t>(active[order[i]]);
    }
    worst = std::max(worst, std::abs(static_cast<double>(hits) / static_cast<double>(size) - overall));
  }

  // Sliding windows over calendar months.
  const Date origin = first_of_month(ds.t_min());
  const int months = months_between(origin, ds.t_max()) + 1;
  std::vector<std::size_t> count(static_cast<std::size_t>(months), 0), hits(count);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto m = static_cast<std::size_t>(months_between(origin, ds[i].timestamp));
    ++count[m];
    hits[m] += static_cast<std::size_t>(active[i]);
  }
  int width = months;
  for (int w = 1; w <= months; ++w) {
    bool ok = true;
    for (int s = 0; s + w <= months && ok; ++s) {
      std::size_t n = 0;
      for (int t = s; t < s + w; ++t) n += count[static_cast<std::size_t>(t)];
      ok = n >= opt.n0;
    }
    if (ok) {
      width = w;
      break;
    }
  }
  for (int s = 0; s + width <= months; ++s) {
    std::size_t n = 0, h = 0;
    for (int t = s; t < s + width; ++t) {
      n += count[static_cast<std::size_t>(t)];
      h += hits[static_cast<std::size_t>(t)];
    }
    if (n == 0) continue;
    worst = std::max(worst, std::abs(static_cast<double>(h) / static_cast<double>(n) - overall));
  }
  return {worst <= opt.epsilon, worst};
}

DiscriminabilityResult discriminability_check(const TemporalDataset& ds, std::uint32_t feature,
                                              const DiscriminabilityOptions& opt) {
  std::vector<std::size_t> cls[kNumClasses];
  for (std::size_t i = 0; i < ds.size(); ++i) cls[to_int(ds[i].label)].push_back(i);
  DiscriminabilityResult res;
  res.gap = std::abs(active_ratio(ds, cls[1], feature) - active_ratio(ds, cls[0], feature));
  res.discriminative = res.gap >= opt.delta;
  res.min_subsample_gap = res.gap;
  Rng rng = make_rng(opt.seed, feature);
  std::vector<std::size_t> pick;
  for (std::size_t m = 0; m < opt.subsamples; ++m) {
    double ratio[kNumClasses];
    for (int c = 0; c < kNumClasses; ++c) {
      const auto& members = cls[c];
      const std::size_t take =
          std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(opt.rate * members.size())));
      if (members.empty()) {
        ratio[c] = 0.0;
        continue;
      }
      pick = members;
      std::size_t hits = 0;
      for (std::size_t i = 0; i < take && i < pick.size(); ++i) {
        std::swap(pick[i], pick[i + uniform_index(rng, pick.size() - i)]);
        hits += ds[pick[i]].has_feature(feature) ? 1 : 0;
      }
      ratio[c] = static_cast<double>(hits) / static_cast<double>(std::min(take, pick.size()));
    }
    res.min_subsample_gap = std::min(res.min_subsample_gap, std::abs(ratio[1] - ratio[0]));
  }
  return res;
}

void ModelLogit::evaluate(const SparseBatch& batch, std::vector<double>& values,
                          std::vector<double>& input_grad) const {
  ForwardCache cache;
  forward(state_, batch, cache);
  values.resize(batch.rows());
  std::vector<double> seed(batch.rows(), sign_);
  for (std::size_t r = 0; r < batch.rows(); ++r) values[r] = sign_ * cache.logits[r];
  backward(state_, batch, cache, seed, nullptr, {}, &input_grad);
}

Attribution integrated_gradients(const ScalarFunction& f, std::span<const std::uint32_t> x,
                                 const IgOptions& opt) {
  if (opt.steps < 1) throw std::invalid_argument("integrated_gradients: steps must be >= 1");
  const std::size_t runs = std::max<std::size_t>(opt.noise_runs, 1);
  Rng rng = make_rng(opt.seed, 0x16);
  const std::size_t d = f.dim();

  // Accumulate on a dense scratch only over touched indices.
  std::vector<double> acc(d, 0.0);
  std::vector<char> touched(d, 0);
  std::vector<std::uint32_t> touched_list;
  std::vector<std::uint32_t> noisy;
  std::vector<double> values, grads;

  for (std::size_t run = 0; run < runs; ++run) {
    noisy.assign(x.begin(), x.end());
    if (opt.flip_prob > 0.0) {
      // Flip every bit independently: geometric skips over the dense vector.
      const double log_q = std::log1p(-opt.flip_prob);
      std::vector<std::uint32_t> flipped;
      double pos = -1.0;
      while (true) {
        const double u = uniform01(rng);
        pos += 1.0 + (opt.flip_prob >= 1.0 ? 0.0 : std::floor(std::log1p(-u) / log_q));
        if (pos >= static_cast<double>(d)) break;
        flipped.push_back(static_cast<std::uint32_t>(pos));
      }
      noisy.clear();
      std::size_t a = 0, b = 0;
      while (a < x.size() || b < flipped.size()) {
        if (b == flipped.size() || (a < x.size() && x[a] < flipped[b])) {
          noisy.push_back(x[a++]);
        } else if (a == x.size() || flipped[b] < x[a]) {
          noisy.push_back(flipped[b++]);  // 0 -> 1
        } else {
          ++a;  // 1 -> 0
          ++b;
        }
      }
    }
    if (noisy.empty()) continue;

    SparseBatch batch(d);
    for (std::size_t s = 0; s < opt.steps; ++s) {
      const double alpha = (static_cast<double>(s) + 0.5) / static_cast<double>(opt.steps);
      batch.add_row(noisy, alpha);
    }
    f.evaluate(batch, values, grads);
    const double w = 1.0 / (static_cast<double>(opt.steps) * static_cast<double>(runs));
    for (std::size_t s = 0; s < opt.steps; ++s) {
      const std::size_t off = batch.offsets[s];
      for (std::size_t t = 0; t < noisy.size(); ++t) {
        const auto j = noisy[t];
        if (!touched[j]) {
          touched[j] = 1;
          touched_list.push_back(j);
        }
        acc[j] += w * grads[off + t];  // x_j = 1 on the noisy input
      }
    }
  }
  std::sort(touched_list.begin(), touched_list.end());
  Attribution out;
  out.indices = touched_list;
  out.values.reserve(touched_list.size());
  for (auto j : touched_list) out.values.push_back(acc[j]);
  return out;
}

std::vector<double> integrated_gradients_dense(const ScalarFunction& f,
                                               std::span<const std::uint32_t> x,
                                               const IgOptions& options) {
  const Attribution a = integrated_gradients(f, x, options);
  std::vector<double> dense(f.dim(), 0.0);
  for (std::size_t t = 0; t < a.indices.size(); ++t) dense[a.indices[t]] = a.values[t];
  return dense;
}

FcsResult fcs_from(std::span<const double> gap, std::span<const double> importance) {
  if (gap.size() != importance.size()) throw std::invalid_argument("fcs: length mismatch");
  FcsResult res;
  res.gap.assign(gap.begin(), gap.end());
  res.importance.assign(importance.begin(), importance.end());
  res.score.resize(gap.size());
  for (std::size_t j = 0; j < gap.size(); ++j) {
    res.score[j] = gap[j] * importance[j];
    res.total += res.score[j];
  }
  return res;
}

FcsResult fcs(const ModelState& state, const TemporalDataset& window, const FcsOptions& opt) {
  const auto gap = class_gaps(window);
  std::vector<double> importance(window.dim(), 0.0);
  std::vector<std::size_t> malware;
  for (std::size_t i = 0; i < window.size(); ++i)
    if (window[i].label == Label::malware) malware.push_back(i);
  if (opt.max_samples > 0 && malware.size() > opt.max_samples) malware.resize(opt.max_samples);
  if (!malware.empty()) {
    const ModelLogit f(state, Label::malware);
    for (std::size_t n = 0; n < malware.size(); ++n) {
      IgOptions ig = opt.ig;
      ig.seed = mix_seed(opt.ig.seed, n);
      const Attribution a = integrated_gradients(f, window[malware[n]].features, ig);
      for (std::size_t t = 0; t < a.indices.size(); ++t)
        importance[a.indices[t]] += std::max(a.values[t], 0.0);
    }
    for (double& v : importance) v /= static_cast<double>(malware.size());
  }
  return fcs_from(gap, importance);
}

std::vector<double> mean_malware_embedding(const ModelState& state, const TemporalDataset& ds) {
  std::vector<std::size_t> malware;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds[i].label == Label::malware) malware.push_back(i);
  if (malware.empty()) return {};
  const Matrix emb = predict_embeddings(state, ds.subset(malware));
  std::vector<double> mean(emb.cols, 0.0);
  for (std::size_t r = 0; r < emb.rows; ++r) kernels::axpy(1.0, emb.row(r), mean);
  for (double& v : mean) v /= static_cast<double>(emb.rows);
  return mean;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(kernels::dot(a, a));
  const double nb = std::sqrt(kernels::dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return kernels::dot(a, b) / (na * nb);
}

double variance(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double acc = 0.0;
  for (double v : values) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(values.size());
}

SimilaritySeries representation_similarity_variance(const ModelState& state,
                                                    const TemporalDataset& validation,
                                                    std::span<const TemporalDataset> windows) {
  const auto reference = mean_malware_embedding(state, validation);
  if (reference.empty()) throw std::invalid_argument("validation set contains no malware");
  SimilaritySeries out;
  out.cosine.resize(windows.size());
  parallel_for(windows.size(), [&](std::size_t w) {
    const auto mean = mean_malware_embedding(state, windows[w]);
    out.cosine[w] = mean.empty() ? std::numeric_limits<double>::quiet_NaN() : cosine(mean, reference);
  });
  std::vector<double> defined;
  for (double c : out.cosine)
    if (!std::isnan(c)) defined.push_back(c);
  out.variance = variance(defined);
  return out;
}

std::vector<TemporalDataset> monthly_windows(const TemporalDataset& ds, const Date& from, int count) {
  std::vector<TemporalDataset> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int m = 0; m < count; ++m) out.push_back(ds.slice(add_months(from, m), add_months(from, m + 1)));
  return out;
}

std::size_t worker_threads() {
  if (const char* env = std::getenv("TIF_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<std::size_t>(n);
  }
  return 1;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(worker_threads(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace tif
