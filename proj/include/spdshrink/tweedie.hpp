#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "spdshrink/geometry.hpp"

// Two-group difference detection on SPD-valued sites with selection-bias
// correction.  Per-site Hotelling T^2 statistics (built from half-vectorized
// log means and pooled scatters) are scaled to noncentral-F statistics; the
// noncentrality map is estimated by moments and then debiased by Tweedie's
// formula, with the marginal log-density fitted by Lindsey's method (Poisson
// regression of histogram counts on a polynomial basis).

namespace spdshrink {

struct GroupData {
  std::vector<std::vector<Matrix>> group1;  // p sites, n1 observations each
  std::vector<std::vector<Matrix>> group2;  // p sites, n2 observations each
};

struct FStatistics {
  Vector z;         // z_i = (dof2 / (nu q)) t2_i, nu = n1 + n2 - 2
  double dof1 = 0;  // q
  double dof2 = 0;  // nu - q - 1
  int n1 = 0, n2 = 0, q = 0;
};

// Hotelling T^2 per site and the pooled per-site scatters
// (S_i^(1) + S_i^(2)) / (n1 + n2 - 2).
std::pair<Vector, std::vector<Matrix>> hotelling_t2(const GroupData& data);

// Scales T^2 so that z_i follows F(q, nu-q-1; lambda_i) under the model.
// Requires n1 + n2 - 2 > q + 1.
FStatistics to_f_stats(const Vector& t2, int n1, int n2, int q);

// Method-of-moments noncentrality from the F mean, truncated at zero.
// Requires dof2 > 2.
Vector mom_noncentrality(const FStatistics& fs);

// Log-density fitted on a histogram support, represented in the standardized
// variable u = (y - center) / scale to keep the Vandermonde well conditioned.
struct LogDensityPoly {
  int degree = 0;
  double center = 0.0;
  double scale = 1.0;
  Vector coeffs;       // beta_0..beta_K in the standardized variable
  double y_lo = 0.0;   // padded histogram support
  double y_hi = 1.0;

  double l(double y) const;    // log density
  double dl(double y) const;   // d/dy log density
  double d2l(double y) const;  // d^2/dy^2 log density
};

// Lindsey fit: equal-width histogram with bins = `bins` (or
// max(60, ceil(sqrt(p))) when bins == 0) over [min - pad, max + pad] with
// pad = 1% of the range; Poisson IRLS on powers 1..degree plus intercept;
// the intercept is set so the density integrates to one on the support.
LogDensityPoly lindsey_fit(const Vector& y, int degree, int bins = 0);

// Tweedie posterior-mean noncentrality at y for a chi-square kernel with
// `dof` degrees of freedom, truncated at zero.  Throws DenominatorNearZero
// when 1 + 2 l'(y) <= 1e-3.
double tweedie_chi2(double y, double dof, const LogDensityPoly& poly);

struct TweedieConfig {
  int degree = 5;            // Lindsey polynomial degree
  int bins = 0;              // 0 -> max(60, ceil(sqrt(p)))
  int max_iters = 10;        // fixed-point iteration cap
  double tol = 1e-3;         // stop when max_i |lambda change| < tol
  double top_fraction = 0.01;
};

struct NoncentralityMap {
  Vector lambda_mom;
  Vector lambda_tweedie;
  int iterations = 0;
  bool converged = false;              // false = hit max_iters (non-fatal)
  std::vector<std::uint8_t> selected;  // top-fraction mask on lambda_tweedie
  std::vector<std::uint8_t> mom_fallback;  // sites where the last iteration
                                           // fell back to the MOM value
};

// Fixed-point scheme: map each z_i through the noncentral F CDF at the
// current lambda_i onto the chi-square scale, refit the marginal by Lindsey,
// apply tweedie_chi2, repeat.  Starts from the MOM estimate.  Requires
// p >= 50 sites.
NoncentralityMap tweedie_iterate(const FStatistics& fs,
                                 const TweedieConfig& config = {});

// Mask of the ceil(fraction * p) largest scores (ties broken by lower index).
std::vector<std::uint8_t> top_fraction_mask(const Vector& score,
                                            double fraction);

// Row-major 2-D map of per-site values.
struct GridMap {
  int rows = 0;
  int cols = 0;
  Vector values;  // rows * cols entries
};

// Moving average over an odd `window` x `window` neighborhood, truncated at
// the edges (each cell averages its in-bounds neighbors).  window == 1
// returns the input unchanged.
GridMap smooth_map(const GridMap& map, int window);

}  // namespace spdshrink
