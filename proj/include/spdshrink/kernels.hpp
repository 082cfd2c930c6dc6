#pragma once

#include <cstddef>

// Flat-array numeric kernels used by the statistical layers.  Each kernel has
// a scalar reference implementation and an AVX2/FMA variant; the active
// variant is chosen once per process from CPU capabilities, overridable with
// SPDSHRINK_SIMD=scalar|avx2|auto.  Variants are equivalence-tested against
// each other; small reassociation differences are bounded by the tests.

namespace spdshrink::kernels {

enum class Isa { Scalar, Avx2 };

// Resolved instruction set for this process (cached after first call).
Isa active();
const char* isa_name(Isa isa);
bool avx2_supported();

double sum(const double* x, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double sumsq(const double* x, std::size_t n);
double sumsq_diff(const double* x, const double* y, std::size_t n);

// out[r] = dot(a + r*m, x, m)          (a is row-major rows x m)
void rowwise_dot(const double* a, const double* x, double* out,
                 std::size_t rows, std::size_t m);
// out[r] = sum_j (a[r*m + j] - x[j])^2
void rowwise_sumsq_diff(const double* a, const double* x, double* out,
                        std::size_t rows, std::size_t m);
// Horner evaluation of a polynomial with coefficients c[0..deg] (ascending
// powers) at each x[i].
void polyval(const double* c, int deg, const double* x, double* out,
             std::size_t n);

namespace scalar {
double sum(const double* x, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double sumsq(const double* x, std::size_t n);
double sumsq_diff(const double* x, const double* y, std::size_t n);
void rowwise_dot(const double* a, const double* x, double* out,
                 std::size_t rows, std::size_t m);
void rowwise_sumsq_diff(const double* a, const double* x, double* out,
                        std::size_t rows, std::size_t m);
void polyval(const double* c, int deg, const double* x, double* out,
             std::size_t n);
}  // namespace scalar

namespace avx2 {
// Only call these when avx2_supported() is true.
double sum(const double* x, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double sumsq(const double* x, std::size_t n);
double sumsq_diff(const double* x, const double* y, std::size_t n);
void rowwise_dot(const double* a, const double* x, double* out,
                 std::size_t rows, std::size_t m);
void rowwise_sumsq_diff(const double* a, const double* x, double* out,
                        std::size_t rows, std::size_t m);
void polyval(const double* c, int deg, const double* x, double* out,
             std::size_t n);
}  // namespace avx2

}  // namespace spdshrink::kernels
