#pragma once

// Data-parallel inner loops. Each kernel has a scalar reference version and,
// on x86-64, an AVX2 version; the public entry points dispatch at runtime.
//
// Column-major inputs: `columns[k]` points at n contiguous values of the k-th
// coordinate. Kernels vectorize across rows, never across coordinates, so the
// per-row accumulation order is the same for every ISA.

#include <cstddef>
#include <span>
#include <string_view>

namespace abcbl::simd {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa);

// Best ISA supported by both the build and the running CPU.
Isa detected_isa();
// ISA used by the dispatching entry points. Defaults to detected_isa(), or to
// scalar when the environment variable ABCBL_SIMD=scalar is set.
Isa active_isa();
// Overrides the dispatch choice (tests, benchmarking). Requesting an ISA the
// CPU does not support throws std::invalid_argument.
void set_active_isa(Isa isa);

// out[i] = sqrt(sum_k ((columns[k][i] - target[k]) / scale[k])^2).
// Bit-identical across ISAs.
void scaled_distances(std::span<const double* const> columns, std::span<const double> target,
                      std::span<const double> scale, std::span<double> out);

// sum_i exp(-0.5 * sum_k ((columns[k][i] - query[k]) * inv_bandwidth[k])^2) over
// i in [0, n). Equal across ISAs to ~1e-14 relative.
double gaussian_kernel_sum(std::span<const double* const> columns, std::size_t n,
                           std::span<const double> query, std::span<const double> inv_bandwidth);

namespace scalar {
void scaled_distances(std::span<const double* const> columns, std::span<const double> target,
                      std::span<const double> scale, std::span<double> out);
double gaussian_kernel_sum(std::span<const double* const> columns, std::size_t n,
                           std::span<const double> query, std::span<const double> inv_bandwidth);
}  // namespace scalar

#if defined(ABCBL_HAVE_AVX2)
namespace avx2 {
void scaled_distances(std::span<const double* const> columns, std::span<const double> target,
                      std::span<const double> scale, std::span<double> out);
double gaussian_kernel_sum(std::span<const double* const> columns, std::size_t n,
                           std::span<const double> query, std::span<const double> inv_bandwidth);
// exp over four lanes; exposed for accuracy tests.
void exp4(const double* in, double* out);
}  // namespace avx2
#endif

}  // namespace abcbl::simd
