#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace tif {

/// Row-major dense matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  void resize(std::size_t r, std::size_t c) {
    rows = r;
    cols = c;
    data.assign(r * c, 0.0);
  }
};

/// Compressed sparse rows. values may hold non-binary entries (integrated
/// gradients scales inputs along a path).
struct SparseBatch {
  std::size_t dim = 0;
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  explicit SparseBatch(std::size_t d = 0) : dim(d) {}

  std::size_t rows() const { return offsets.size() - 1; }

  void add_row(std::span<const std::uint32_t> idx, double value = 1.0) {
    for (auto i : idx) {
      indices.push_back(i);
      values.push_back(value);
    }
    offsets.push_back(indices.size());
  }

  void add_row(std::span<const std::uint32_t> idx, std::span<const double> vals) {
    indices.insert(indices.end(), idx.begin(), idx.end());
    values.insert(values.end(), vals.begin(), vals.end());
    offsets.push_back(indices.size());
  }

  std::span<const std::uint32_t> row_indices(std::size_t r) const {
    return {indices.data() + offsets[r], offsets[r + 1] - offsets[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values.data() + offsets[r], offsets[r + 1] - offsets[r]};
  }
};

}  // namespace tif
