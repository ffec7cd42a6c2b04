#include <cmath>

#include "abcbl/simd/kernels.hpp"

namespace abcbl::simd::scalar {

void scaled_distances(std::span<const double* const> columns, std::span<const double> target,
                      std::span<const double> scale, std::span<double> out) {
  const std::size_t d = columns.size();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double u = (columns[k][i] - target[k]) / scale[k];
      acc = acc + u * u;
    }
    out[i] = std::sqrt(acc);
  }
}

double gaussian_kernel_sum(std::span<const double* const> columns, std::size_t n,
                           std::span<const double> query, std::span<const double> inv_bandwidth) {
  const std::size_t k_dims = columns.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < k_dims; ++k) {
      const double u = (columns[k][i] - query[k]) * inv_bandwidth[k];
      acc = acc + u * u;
    }
    sum += std::exp(-0.5 * acc);
  }
  return sum;
}

}  // namespace abcbl::simd::scalar
