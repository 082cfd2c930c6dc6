#include "spdshrink/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <mutex>

#if defined(__x86_64__) || defined(_M_X64)
#include <cpuid.h>
#define SPDSHRINK_X86 1
#endif

namespace spdshrink::kernels {

namespace scalar {

double sum(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double dot(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double sumsq(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

double sumsq_diff(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  return acc;
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
  for (std::size_t i = 0; i < n; ++i) {
    double acc = c[deg];
    for (int k = deg - 1; k >= 0; --k) acc = acc * x[i] + c[k];
    out[i] = acc;
  }
}

}  // namespace scalar

bool avx2_supported() {
#ifdef SPDSHRINK_X86
  unsigned eax, ebx, ecx, edx;
  if (!__get_cpuid_count(7, 0, &eax, &ebx, &ecx, &edx)) return false;
  const bool avx2 = (ebx & bit_AVX2) != 0;
  if (!__get_cpuid(1, &eax, &ebx, &ecx, &edx)) return false;
  const bool fma = (ecx & bit_FMA) != 0;
  return avx2 && fma;
#else
  return false;
#endif
}

namespace {

Isa resolve_isa() {
  const char* env = std::getenv("SPDSHRINK_SIMD");
  if (env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return Isa::Scalar;
    if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return Isa::Avx2;
    // "auto" and unrecognized values fall through to detection.
  }
  return avx2_supported() ? Isa::Avx2 : Isa::Scalar;
}

}  // namespace

Isa active() {
  static const Isa isa = resolve_isa();
  return isa;
}

const char* isa_name(Isa isa) {
  return isa == Isa::Avx2 ? "avx2" : "scalar";
}

double sum(const double* x, std::size_t n) {
  return active() == Isa::Avx2 ? avx2::sum(x, n) : scalar::sum(x, n);
}

double dot(const double* x, const double* y, std::size_t n) {
  return active() == Isa::Avx2 ? avx2::dot(x, y, n) : scalar::dot(x, y, n);
}

double sumsq(const double* x, std::size_t n) {
  return active() == Isa::Avx2 ? avx2::sumsq(x, n) : scalar::sumsq(x, n);
}

double sumsq_diff(const double* x, const double* y, std::size_t n) {
  return active() == Isa::Avx2 ? avx2::sumsq_diff(x, y, n)
                               : scalar::sumsq_diff(x, y, n);
}

void rowwise_dot(const double* a, const double* x, double* out,
                 std::size_t rows, std::size_t m) {
  if (active() == Isa::Avx2) {
    avx2::rowwise_dot(a, x, out, rows, m);
  } else {
    scalar::rowwise_dot(a, x, out, rows, m);
  }
}

void rowwise_sumsq_diff(const double* a, const double* x, double* out,
                        std::size_t rows, std::size_t m) {
  if (active() == Isa::Avx2) {
    avx2::rowwise_sumsq_diff(a, x, out, rows, m);
  } else {
    scalar::rowwise_sumsq_diff(a, x, out, rows, m);
  }
}

void polyval(const double* c, int deg, const double* x, double* out,
             std::size_t n) {
  if (active() == Isa::Avx2) {
    avx2::polyval(c, deg, x, out, n);
  } else {
    scalar::polyval(c, deg, x, out, n);
  }
}

}  // namespace spdshrink::kernels
