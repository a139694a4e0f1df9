// Compiled with -mavx2 -mfma; only reached after a CPUID check.

#include <immintrin.h>

#include "variants.hpp"

namespace tif::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4),
                           acc1);
  }
  if (i + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    i += 4;
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i), yv);
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void adam_update(double* param, const double* grad, double* m, double* v,
                 std::size_t n, const AdamStep& s) {
  // Same operation order as the scalar reference, no FMA contraction, so the
  // two variants agree bitwise.
  const __m256d b1 = _mm256_set1_pd(s.beta1);
  const __m256d b2 = _mm256_set1_pd(s.beta2);
  const __m256d omb1 = _mm256_set1_pd(1.0 - s.beta1);
  const __m256d omb2 = _mm256_set1_pd(1.0 - s.beta2);
  const __m256d c1 = _mm256_set1_pd(s.bias1);
  const __m256d c2 = _mm256_set1_pd(s.bias2);
  const __m256d lr = _mm256_set1_pd(s.lr);
  const __m256d eps = _mm256_set1_pd(s.eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    __m256d mv = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)),
                               _mm256_mul_pd(omb1, g));
    __m256d vv = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                               _mm256_mul_pd(omb2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d m_hat = _mm256_div_pd(mv, c1);
    const __m256d v_hat = _mm256_div_pd(vv, c2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps);
    const __m256d delta = _mm256_div_pd(_mm256_mul_pd(lr, m_hat), denom);
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), delta));
  }
  if (i < n) scalar::adam_update(param + i, grad + i, m + i, v + i, n - i, s);
}

}  // namespace tif::kernels::avx2
