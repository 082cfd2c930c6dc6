#pragma once

#include <vector>

#include "spdshrink/geometry.hpp"

// Independent reference implementations used to cross-check library results.
// Everything here favors transparency over speed: long double forward series
// for the noncentral chi-square, explicit gradient descent for the Frechet
// mean, and the closed-form two-point-prior posterior mean used by the
// selection-bias tests.

namespace oracle {

// Regularized lower incomplete gamma P(a, x) in long double (series for
// x < a + 1, Lentz continued fraction otherwise).
long double gamma_p_ld(long double a, long double x);

// Noncentral chi-square CDF / PDF via the forward Poisson series from k = 0,
// truncated once the remaining Poisson tail mass drops below 1e-18.
long double nc_chi2_cdf_ld(long double x, double dof, double lambda);
long double nc_chi2_pdf_ld(long double x, double dof, double lambda);

// Exact posterior mean E[lambda | y] when lambda has the prior
// (1/2) delta_0 + (1/2) delta_{lambda1} and y | lambda ~ chi2_dof(lambda).
long double two_point_posterior_mean_ld(long double y, double dof,
                                        double lambda1);

// Log-Euclidean Frechet mean by explicit gradient descent on
// F(M) = sum_i d_LE(M, X_i)^2, started from the first input.
spdshrink::Matrix frechet_mean_descent(const std::vector<spdshrink::Matrix>& xs,
                                       int iters = 400);

}  // namespace oracle
