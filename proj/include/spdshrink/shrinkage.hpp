#pragma once

#include <utility>
#include <vector>

#include "spdshrink/geometry.hpp"
#include "spdshrink/optim.hpp"

// Empirical-Bayes shrinkage of per-site SPD means and covariances under the
// Log-Euclidean metric.  Sites are independent; each contributes a sample
// Frechet mean and a scatter matrix of half-vectorized logs.  Hyperparameters
// are chosen by minimizing an unbiased risk estimate (SURE) over the
// hierarchical model
//   ve(log X_ij) ~ N(ve(log M_i), Sigma_i),
//   ve(log M_i)  ~ N(ve(log mu), Sigma_i / lambda),
//   Sigma_i      ~ InverseWishart(Psi, nu).

namespace spdshrink {

struct SiteStats {
  int n = 0;  // observations per site (equal across sites)
  int N = 0;  // matrix dimension
  int q = 0;  // N(N+1)/2
  std::vector<Matrix> xbar;     // per-site Frechet means, SPD N x N
  std::vector<Matrix> scatter;  // per-site scatter S_i, symmetric PSD q x q

  // Flat caches for the risk objective (filled by site_stats / rebuild_cache):
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
      xbar_log;  // p x q, row i = ve(log xbar_i)
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
      scatter_flat;  // p x q^2, row i = S_i row-major
  Vector tr_s;       // tr S_i
  Vector tr_s2;      // tr(S_i^2)
  Vector tr_s_sq;    // (tr S_i)^2

  int p() const { return static_cast<int>(xbar.size()); }
};

// Per-site sufficient statistics.  data[i] holds the n >= 2 SPD observations
// of site i; all sites must share n and the matrix dimension.
SiteStats site_stats(const std::vector<std::vector<Matrix>>& data);

// Recomputes the flat caches from xbar / scatter / n (for callers that
// assemble SiteStats directly).
void rebuild_cache(SiteStats& stats);

struct Hyperparams {
  double lambda = 1.0;  // prior concentration of site means around mu
  Matrix mu;            // SPD N x N prior center
  Matrix psi;           // SPD q x q inverse-Wishart scale
  double nu = 0.0;      // inverse-Wishart dof, > q + 1
};

struct ShrinkageResult {
  std::vector<Matrix> means;  // SPD N x N posterior mean estimates
  std::vector<Matrix> covs;   // SPD q x q posterior covariance estimates
                              // (empty for the known-variance path)
  Hyperparams hyper;          // known-variance path: only lambda / mu are
                              // meaningful (psi empty, nu = 0)
  double sure_value = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct GroundTruth {
  std::vector<Matrix> means;
  std::vector<Matrix> covs;
};

// Default per-site variance scalarization A_i = tr(S_i) / ((n-1) q).
std::vector<double> default_site_variances(const SiteStats& stats);

// Unbiased risk estimate for mean shrinkage with known per-site variances
// a[i] (isotropic log-domain covariance A_i I_q).  Requires n >= 2.
double sure_fm_known_var(const SiteStats& stats, const std::vector<double>& a,
                         double lambda, const Matrix& mu);

// Fits (lambda, mu) by minimizing sure_fm_known_var and returns the shrunk
// means exp((n lambda log xbar_i + A_i log mu)/(n lambda + A_i)).  Passing an
// empty `a` uses default_site_variances.
ShrinkageResult estimate_fm_known_var(const SiteStats& stats,
                                      std::vector<double> a = {});

// Unbiased risk estimate for the joint mean + covariance shrinkage rule at
// hyperparameters h.  Requires n >= 3 and h.nu > q + 1.
double sure_full(const SiteStats& stats, const Hyperparams& h);

// Moment-based starting point for minimize_sure.  lambda is clamped to
// [1e-8, 1e8] (upper end hit when sites show no spread around the center);
// nu is clamped to (q+1, 1e6].  Throws SingularScatter when a scatter matrix
// cannot be inverted for the dof moment equation.
Hyperparams init_hyperparams(const SiteStats& stats);

struct SureFit {
  Hyperparams hyper;
  double sure_value = 0.0;
  int iterations = 0;
  bool converged = false;
  double grad_norm = 0.0;
  long long evaluations = 0;
};

// Minimizes sure_full over (lambda, mu, Psi, nu) with L-BFGS in an
// unconstrained parameterization: log lambda; ve(log mu); the lower Cholesky
// factor of Psi with logged diagonal; nu = q + 1 + 1e-6 + exp(w).
SureFit minimize_sure(const SiteStats& stats,
                      const LbfgsOptions& options = {});

// Posterior point estimates at fixed hyperparameters:
//   mean_i = exp((n ve(log xbar_i) + lambda ve(log mu)) / (lambda + n)),
//   cov_i  = (Psi + S_i) / (nu + n - q - 2).
ShrinkageResult posterior_estimates(const SiteStats& stats,
                                    const Hyperparams& h);

// Mean squared estimation losses against ground truth: first the average
// squared Log-Euclidean distance of the means, second the average squared
// Frobenius distance of the covariances (0 when result.covs is empty).
std::pair<double, double> loss_le(const ShrinkageResult& result,
                                  const GroundTruth& truth);

}  // namespace spdshrink
