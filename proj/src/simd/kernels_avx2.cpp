#include <immintrin.h>

#include <cmath>

#include "abcbl/simd/kernels.hpp"

namespace abcbl::simd::avx2 {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// Cody-Waite reduction x = n*ln2 + r, |r| <= ln2/2, then a degree-13 Taylor
// polynomial for e^r (truncation error below 2e-16 relative) and an exponent
// splice for 2^n. Inputs below the normal range flush to zero.
inline __m256d exp_pd(__m256d x) {
  const __m256d lo_limit = _mm256_set1_pd(-708.39);
  const __m256d hi_limit = _mm256_set1_pd(709.0);
  const __m256d underflow = _mm256_cmp_pd(x, lo_limit, _CMP_LT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, lo_limit), hi_limit);

  const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
  const __m256d ln2_hi = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);
  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
  r = _mm256_fnmadd_pd(n, ln2_lo, r);

  static constexpr double kInvFact[] = {
      1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0,
      1.0 / 362880.0,     1.0 / 40320.0,     1.0 / 5040.0,     1.0 / 720.0,
      1.0 / 120.0,        1.0 / 24.0,        1.0 / 6.0,        0.5,
      1.0,                1.0};
  __m256d p = _mm256_set1_pd(kInvFact[0]);
  for (int i = 1; i < 14; ++i) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kInvFact[i]));

  const __m256d magic = _mm256_set1_pd(6755399441055744.0);  // 1.5 * 2^52
  const __m256i ni = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(n, magic)), _mm256_castpd_si256(magic));
  const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(ni, _mm256_set1_epi64x(1023)), 52);
  const __m256d result = _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
  return _mm256_andnot_pd(underflow, result);
}

}  // namespace

void exp4(const double* in, double* out) { _mm256_storeu_pd(out, exp_pd(_mm256_loadu_pd(in))); }

void scaled_distances(std::span<const double* const> columns, std::span<const double> target,
                      std::span<const double> scale, std::span<double> out) {
  const std::size_t d = columns.size();
  const std::size_t n = out.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t k = 0; k < d; ++k) {
      const __m256d u = _mm256_div_pd(_mm256_sub_pd(_mm256_loadu_pd(columns[k] + i), _mm256_set1_pd(target[k])),
                                      _mm256_set1_pd(scale[k]));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(u, u));
    }
    _mm256_storeu_pd(out.data() + i, _mm256_sqrt_pd(acc));
  }
  for (; i < n; ++i) {
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
  const __m256d minus_half = _mm256_set1_pd(-0.5);
  __m256d sum = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t k = 0; k < k_dims; ++k) {
      const __m256d u = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(columns[k] + i), _mm256_set1_pd(query[k])),
                                      _mm256_set1_pd(inv_bandwidth[k]));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(u, u));
    }
    sum = _mm256_add_pd(sum, exp_pd(_mm256_mul_pd(minus_half, acc)));
  }
  double total = hsum(sum);
  for (; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < k_dims; ++k) {
      const double u = (columns[k][i] - query[k]) * inv_bandwidth[k];
      acc = acc + u * u;
    }
    total += std::exp(-0.5 * acc);
  }
  return total;
}

}  // namespace abcbl::simd::avx2
