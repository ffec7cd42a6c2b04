#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "abcbl/simd/kernels.hpp"

namespace abcbl::simd {

namespace {

Isa initial_isa() {
  if (const char* env = std::getenv("ABCBL_SIMD"); env && std::string(env) == "scalar") return Isa::scalar;
  return detected_isa();
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

Isa detected_isa() {
#if defined(ABCBL_HAVE_AVX2)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Isa::avx2;
#endif
  return Isa::scalar;
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (isa == Isa::avx2 && detected_isa() != Isa::avx2)
    throw std::invalid_argument("AVX2 kernels are not available on this CPU or build");
  active().store(isa, std::memory_order_relaxed);
}

void scaled_distances(std::span<const double* const> columns, std::span<const double> target,
                      std::span<const double> scale, std::span<double> out) {
#if defined(ABCBL_HAVE_AVX2)
  if (active_isa() == Isa::avx2) return avx2::scaled_distances(columns, target, scale, out);
#endif
  scalar::scaled_distances(columns, target, scale, out);
}

double gaussian_kernel_sum(std::span<const double* const> columns, std::size_t n,
                           std::span<const double> query, std::span<const double> inv_bandwidth) {
#if defined(ABCBL_HAVE_AVX2)
  if (active_isa() == Isa::avx2) return avx2::gaussian_kernel_sum(columns, n, query, inv_bandwidth);
#endif
  return scalar::gaussian_kernel_sum(columns, n, query, inv_bandwidth);
}

}  // namespace abcbl::simd
