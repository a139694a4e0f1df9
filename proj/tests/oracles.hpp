#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance runner. Written as plain loops over the textbook formulas, with
// no shared code from the library beyond the data types.

#include <cmath>
#include <functional>
#include <vector>

#include "support.hpp"
#include "tif/losses.hpp"
#include "tif/model.hpp"

namespace tif::oracle {

inline double naive_sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double bce(double z, double y) {
  const double s = naive_sigmoid(z);
  return -(y * std::log(s) + (1.0 - y) * std::log(1.0 - s));
}

inline double cls(const std::vector<double>& z, const std::vector<Label>& y) {
  double t = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) t += bce(z[i], to_int(y[i]));
  return t / static_cast<double>(z.size());
}

/// proxies[c] is a K x h matrix.
inline double alignment(const Matrix& emb, const std::vector<Label>& y,
                        const std::vector<Matrix>& proxies, double tau) {
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < 2; ++c) {
    double entropy_sum = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < emb.rows; ++i) {
      if (to_int(y[i]) != c) continue;
      ++count;
      const Matrix& P = proxies[c];
      std::vector<double> e(P.rows);
      double z = 0.0;
      for (std::size_t k = 0; k < P.rows; ++k) {
        double s = 0.0;
        for (std::size_t t = 0; t < P.cols; ++t) s += emb(i, t) * P(k, t);
        e[k] = std::exp(s / tau);
        z += e[k];
      }
      for (std::size_t k = 0; k < P.rows; ++k) {
        const double p = e[k] / z;
        if (p > 0) entropy_sum -= p * std::log(p);
      }
    }
    if (count == 0) continue;
    ++present;
    sum += entropy_sum / count;
  }
  return sum / present;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) s += (a[t] - b[t]) * (a[t] - b[t]);
  return std::sqrt(s);
}

inline double intra(const std::vector<Matrix>& proxies) {
  double total = 0.0;
  for (const Matrix& P : proxies) {
    const std::size_t K = P.rows;
    if (K < 2) continue;
    double s = 0.0;
    // every unordered pair counted twice over the ordered double loop
    for (std::size_t i = 0; i < K; ++i)
      for (std::size_t j = 0; j < K; ++j)
        if (i != j) s += distance(P.row(i), P.row(j));
    total += (s / 2.0) / (static_cast<double>(K * (K - 1)) / 2.0);
  }
  return -total / static_cast<double>(proxies.size());
}

inline double inter(const std::vector<Matrix>& proxies, double margin) {
  const std::size_t C = proxies.size();
  std::vector<std::vector<double>> centre(C);
  for (std::size_t c = 0; c < C; ++c) {
    centre[c].assign(proxies[c].cols, 0.0);
    for (std::size_t k = 0; k < proxies[c].rows; ++k)
      for (std::size_t t = 0; t < proxies[c].cols; ++t)
        centre[c][t] += proxies[c](k, t) / static_cast<double>(proxies[c].rows);
  }
  double s = 0.0;
  for (std::size_t a = 0; a < C; ++a)
    for (std::size_t b = 0; b < C; ++b)
      if (a != b) {
        const double d = distance(centre[a], centre[b]);
        if (d < margin) s += margin - d;
      }
  return s / static_cast<double>(C * (C - 1));
}

/// Derivative of mean BCE(s * z) at s = 1 by central differences in s.
inline double dummy_scale_gradient(const std::vector<double>& z, const std::vector<Label>& y,
                                   const std::vector<std::size_t>& rows, double step = 1e-4) {
  auto risk = [&](double s) {
    double t = 0.0;
    for (std::size_t r : rows) t += bce(s * z[r], to_int(y[r]));
    return t / static_cast<double>(rows.size());
  };
  return (risk(1.0 + step) - risk(1.0 - step)) / (2.0 * step);
}

/// Closed-form dummy gradient written directly from the definition.
inline double dummy_scale_gradient_closed(const std::vector<double>& z,
                                          const std::vector<Label>& y,
                                          const std::vector<std::size_t>& rows) {
  double t = 0.0;
  for (std::size_t r : rows) t += (naive_sigmoid(z[r]) - to_int(y[r])) * z[r];
  return t / static_cast<double>(rows.size());
}

inline double iga(const std::vector<double>& z, const std::vector<Label>& y,
                  const std::vector<std::vector<std::size_t>>& envs, bool finite_difference) {
  double t = 0.0;
  for (const auto& rows : envs) {
    const double g = finite_difference ? dummy_scale_gradient(z, y, rows)
                                       : dummy_scale_gradient_closed(z, y, rows);
    t += g * g;
  }
  return t / static_cast<double>(envs.size());
}

inline std::vector<Matrix> proxy_matrices(const ModelState& s) {
  const ParamLayout L(s.arch);
  std::vector<Matrix> out;
  for (int c = 0; c < 2; ++c) {
    Matrix m(s.arch.proxies_per_class, s.arch.embedding_dim());
    auto blk = s.block(L.proxies(c));
    std::copy(blk.begin(), blk.end(), m.data.begin());
    out.push_back(std::move(m));
  }
  return out;
}

/// Central-difference gradient of f with respect to every parameter.
inline std::vector<double> numeric_gradient(ModelState state,
                                            const std::function<double(const ModelState&)>& f,
                                            double step = 1e-6) {
  std::vector<double> g(state.params.size());
  for (std::size_t i = 0; i < state.params.size(); ++i) {
    const double keep = state.params[i];
    state.params[i] = keep + step;
    const double up = f(state);
    state.params[i] = keep - step;
    const double down = f(state);
    state.params[i] = keep;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

struct GradientComparison {
  double norm_relative = 0.0;  // ||a - n|| / ||n||
  double worst_component = 0.0;
};

/// Per-component error is taken relative to max(|a|,|n|) with a floor of
/// 1e-3 of the largest numeric component, so entries that are zero up to
/// rounding do not dominate.
inline GradientComparison compare(const std::vector<double>& analytic,
                                  const std::vector<double>& numeric) {
  double diff2 = 0.0, norm2 = 0.0, scale = 0.0;
  for (double v : numeric) scale = std::max(scale, std::abs(v));
  GradientComparison out;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    const double d = analytic[i] - numeric[i];
    diff2 += d * d;
    norm2 += numeric[i] * numeric[i];
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-3 * scale});
    if (denom > 0) out.worst_component = std::max(out.worst_component, std::abs(d) / denom);
  }
  out.norm_relative = norm2 > 0 ? std::sqrt(diff2 / norm2) : std::sqrt(diff2);
  return out;
}

}  // namespace tif::oracle
