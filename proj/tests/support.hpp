#pragma once

#include <cmath>
#include <vector>

#include "tif/dataset.hpp"
#include "tif/model.hpp"
#include "tif/rng.hpp"
#include "tif/tensor.hpp"

namespace tif::fixtures {

inline Architecture tiny_arch(std::size_t dim = 12, std::size_t h = 8, std::size_t K = 2) {
  Architecture a;
  a.dim = dim;
  a.layer_widths = {h, h};
  a.head_hidden = 4;
  a.proxies_per_class = K;
  return a;
}

/// Random sparse binary rows with at least one active index each.
inline SparseBatch random_batch(Rng& rng, std::size_t dim, std::size_t rows, double p = 0.3) {
  SparseBatch b(dim);
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<std::uint32_t> idx;
    for (std::uint32_t j = 0; j < dim; ++j)
      if (uniform01(rng) < p) idx.push_back(j);
    if (idx.empty()) idx.push_back(static_cast<std::uint32_t>(uniform_index(rng, dim)));
    b.add_row(idx);
  }
  return b;
}

inline std::vector<Label> alternating_labels(std::size_t n) {
  std::vector<Label> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = i % 2 ? Label::malware : Label::benign;
  return y;
}

/// Random unit-norm rows.
inline Matrix random_unit_rows(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  std::normal_distribution<double> n01;
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (auto& v : m.row(i)) {
      v = n01(rng);
      s += v * v;
    }
    for (auto& v : m.row(i)) v /= std::sqrt(s);
  }
  return m;
}

inline bool close_rel(double a, double b, double rel, double floor = 1e-9) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + floor;
}

}  // namespace tif::fixtures
