#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tif {

enum class OptimizerKind { adam, sgd };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& text);

/// Flat-vector optimizer. reset() drops all moment estimates and the step
/// count; the learning rate is kept.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, std::size_t n_params);

  void step(std::span<double> params, std::span<const double> grad);
  void reset();

  OptimizerKind kind() const { return kind_; }
  long steps() const { return t_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }

 private:
  OptimizerKind kind_;
  double lr_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
  double beta1_pow_ = 1.0;
  double beta2_pow_ = 1.0;
  std::vector<double> m_, v_;
};

}  // namespace tif
