#pragma once

// Dense double-precision inner-loop kernels used by the encoder, the head and
// the optimizer. Each kernel has a portable scalar reference implementation
// and, on x86-64, an AVX2/FMA variant. The variant is chosen once at startup
// from CPUID and can be pinned with the TIF_KERNELS environment variable
// ("scalar" or "avx2") or with force_isa() in tests.

#include <cstddef>
#include <span>
#include <string_view>

namespace tif::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

/// True when the running CPU can execute the given variant.
bool isa_supported(Isa isa);

/// The variant every dispatched call currently routes to.
Isa active_isa();

/// Pin the dispatch table. Throws std::runtime_error if the CPU lacks the ISA.
void force_isa(Isa isa);

/// Adam hyperparameters for one step. bias1 = 1 - beta1^t, bias2 = 1 - beta2^t.
struct AdamStep {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias1;
  double bias2;
};

/// Signature table shared by every variant.
struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*adam_update)(double* param, const double* grad, double* m, double* v,
                      std::size_t n, const AdamStep& step);
};

const KernelTable& table(Isa isa);

// Dispatched entry points.

double dot(std::span<const double> a, std::span<const double> b);

/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

void adam_update(std::span<double> param, std::span<const double> grad,
                 std::span<double> m, std::span<double> v,
                 const AdamStep& step);

}  // namespace tif::kernels
