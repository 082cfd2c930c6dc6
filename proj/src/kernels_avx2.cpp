// AVX2/FMA kernel variants.  This translation unit is compiled with
// -mavx2 -mfma; nothing here runs unless runtime dispatch selected Avx2.

#include "spdshrink/kernels.hpp"

#include <immintrin.h>

namespace spdshrink::kernels::avx2 {

namespace {

inline double hadd(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

double sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double tail = 0.0;
  for (; i < n; ++i) tail += x[i];
  return hadd(acc) + tail;
}

double dot(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += x[i] * y[i];
  return hadd(acc) + tail;
}

double sumsq(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += x[i] * x[i];
  return hadd(acc) + tail;
}

double sumsq_diff(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d =
        _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double tail = 0.0;
  for (; i < n; ++i) {
    const double d = x[i] - y[i];
    tail += d * d;
  }
  return hadd(acc) + tail;
}

void rowwise_dot(const double* a, const double* x, double* out,
                 std::size_t rows, std::size_t m) {
  for (std::size_t r = 0; r < rows; ++r) out[r] = dot(a + r * m, x, m);
}

void rowwise_sumsq_diff(const double* a, const double* x, double* out,
                        std::size_t rows, std::size_t m) {
  for (std::size_t r = 0; r < rows; ++r) out[r] = sumsq_diff(a + r * m, x, m);
}

void polyval(const double* c, int deg, const double* x, double* out,
             std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    __m256d acc = _mm256_set1_pd(c[deg]);
    for (int k = deg - 1; k >= 0; --k) {
      acc = _mm256_fmadd_pd(acc, xv, _mm256_set1_pd(c[k]));
    }
    _mm256_storeu_pd(out + i, acc);
  }
  for (; i < n; ++i) {
    double acc = c[deg];
    for (int k = deg - 1; k >= 0; --k) acc = acc * x[i] + c[k];
    out[i] = acc;
  }
}

}  // namespace spdshrink::kernels::avx2
