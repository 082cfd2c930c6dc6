#pragma once

#include <vector>

#include "spdshrink/geometry.hpp"
#include "spdshrink/rng.hpp"

// Matrix-variate samplers and noncentral distribution functions.
//
// Noncentral chi-square and F CDFs are evaluated as Poisson mixtures of the
// central distributions: weights are expanded outward from the modal index
// k0 = floor(lambda/2) in both directions until the remaining term mass is
// below 1e-14.  The NcMixture object holds the weights so repeated
// evaluations for one lambda (CDF calls plus a quantile solve) share the
// expansion.

namespace spdshrink {

// Parameters of the log-normal SPD distribution: log X has half-vectorized
// mean ve(log mean) and covariance cov (q x q, q = N(N+1)/2).
struct LogNormalParams {
  Matrix mean;  // SPD, N x N
  Matrix cov;   // SPD, q x q
};

struct WishartParams {
  Matrix scale;  // SPD, q x q
  double dof = 0.0;
};

// Draws `count` SPD matrices.  Throws NotSpd / DimMismatch on bad parameters.
std::vector<Matrix> sample_log_normal(const LogNormalParams& params,
                                      RngStream& rng, int count);

// Wishart draw via the Bartlett decomposition; requires dof > q - 1.
Matrix sample_wishart(const WishartParams& params, RngStream& rng);

// Inverse-Wishart with mean scale / (dof - q - 1); requires dof > q + 1.
// Consumes the same variates as sample_wishart on the inverted scale, so
// sample_inv_wishart({S, d}, rng) == inv_spd(sample_wishart({inv_spd(S), d},
// rng)) bit-exactly for streams in the same state.
Matrix sample_inv_wishart(const WishartParams& params, RngStream& rng);

// Poisson-mixture representation of a noncentrality parameter lambda >= 0.
class NcMixture {
 public:
  explicit NcMixture(double lambda);

  double lambda() const { return lambda_; }

  // CDF / density of the noncentral chi-square with dof > 0.
  double chi2_cdf(double x, double dof) const;
  double chi2_pdf(double x, double dof) const;

  // CDF of the noncentral F with dof1, dof2 > 0.
  double f_cdf(double x, double dof1, double dof2) const;

 private:
  double lambda_;
  int k_lo_;                    // first mixture index carried
  std::vector<double> weights_;  // Poisson(lambda/2) mass at k_lo_, k_lo_+1, ...
};

// Convenience wrappers constructing the mixture per call.
double nc_chi2_cdf(double x, double dof, double lambda);
double nc_chi2_pdf(double x, double dof, double lambda);
double nc_f_cdf(double x, double dof1, double dof2, double lambda);

// Inverse CDF of the noncentral chi-square: the x with cdf(x) = prob,
// bracketed by doubling and polished by bisection plus Newton steps until
// |cdf(x) - prob| <= 1e-10.  prob must lie in (0, 1).
double nc_chi2_quantile(double prob, double dof, double lambda);
double nc_chi2_quantile(double prob, double dof, const NcMixture& mixture);

// Regularized incomplete gamma P(a, x) and beta I_x(a, b) (series and
// continued-fraction evaluations; standard algorithms).
double gamma_p(double a, double x);
double inc_beta(double a, double b, double x);

}  // namespace spdshrink
