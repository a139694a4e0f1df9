#include <cstdlib>
#include <stdexcept>
#include <string>

#include "variants.hpp"

namespace tif::kernels {

namespace {

constexpr KernelTable kScalar{&scalar::dot, &scalar::axpy, &scalar::adam_update};
#if defined(TIF_HAVE_AVX2)
constexpr KernelTable kAvx2{&avx2::dot, &avx2::axpy, &avx2::adam_update};
#endif

Isa detect() {
  if (const char* pinned = std::getenv("TIF_KERNELS")) {
    const std::string name(pinned);
    if (name == "scalar") return Isa::scalar;
    if (name == "avx2" && isa_supported(Isa::avx2)) return Isa::avx2;
  }
  return isa_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

Isa& current() {
  static Isa isa = detect();
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(TIF_HAVE_AVX2)
      __builtin_cpu_init();
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() { return current(); }

void force_isa(Isa isa) {
  if (!isa_supported(isa))
    throw std::runtime_error("kernel variant not supported on this CPU: " +
                             std::string(isa_name(isa)));
  current() = isa;
}

const KernelTable& table(Isa isa) {
#if defined(TIF_HAVE_AVX2)
  if (isa == Isa::avx2) return kAvx2;
#endif
  (void)isa;
  return kScalar;
}

double dot(std::span<const double> a, std::span<const double> b) {
  return table(current()).dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  table(current()).axpy(alpha, x.data(), y.data(), x.size());
}

void adam_update(std::span<double> param, std::span<const double> grad,
                 std::span<double> m, std::span<double> v,
                 const AdamStep& step) {
  table(current()).adam_update(param.data(), grad.data(), m.data(), v.data(),
                               param.size(), step);
}

}  // namespace tif::kernels
