#include <cmath>

#include "variants.hpp"

namespace tif::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void adam_update(double* param, const double* grad, double* m, double* v,
                 std::size_t n, const AdamStep& s) {
  const double one_minus_b1 = 1.0 - s.beta1;
  const double one_minus_b2 = 1.0 - s.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = s.beta1 * m[i] + one_minus_b1 * g;
    v[i] = s.beta2 * v[i] + one_minus_b2 * (g * g);
    const double m_hat = m[i] / s.bias1;
    const double v_hat = v[i] / s.bias2;
    param[i] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
  }
}

}  // namespace tif::kernels::scalar
