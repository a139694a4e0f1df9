#pragma once

#include "tif/kernels.hpp"

namespace tif::kernels {

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void adam_update(double* param, const double* grad, double* m, double* v,
                 std::size_t n, const AdamStep& step);
}  // namespace scalar

#if defined(TIF_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void adam_update(double* param, const double* grad, double* m, double* v,
                 std::size_t n, const AdamStep& step);
}  // namespace avx2
#endif

}  // namespace tif::kernels
