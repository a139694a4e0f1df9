#include "tif/optimizer.hpp"

#include <algorithm>

#include "tif/errors.hpp"
#include "tif/kernels.hpp"

namespace tif {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(const std::string& text) {
  if (text == "adam") return OptimizerKind::adam;
  if (text == "sgd") return OptimizerKind::sgd;
  throw ConfigError("unknown optimizer '" + text + "' (expected adam or sgd)");
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, std::size_t n_params)
    : kind_(kind), lr_(learning_rate) {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (kind_ == OptimizerKind::adam) {
    m_.assign(n_params, 0.0);
    v_.assign(n_params, 0.0);
  }
}

void Optimizer::step(std::span<double> params, std::span<const double> grad) {
  ++t_;
  if (kind_ == OptimizerKind::sgd) {
    kernels::axpy(-lr_, grad, params);
    return;
  }
  beta1_pow_ *= beta1_;
  beta2_pow_ *= beta2_;
  const kernels::AdamStep s{lr_, beta1_, beta2_, eps_, 1.0 - beta1_pow_, 1.0 - beta2_pow_};
  kernels::adam_update(params, grad, m_, v_, s);
}

void Optimizer::reset() {
  t_ = 0;
  beta1_pow_ = 1.0;
  beta2_pow_ = 1.0;
  std::fill(m_.begin(), m_.end(), 0.0);
  std::fill(v_.begin(), v_.end(), 0.0);
}

}  // namespace tif
