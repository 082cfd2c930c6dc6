#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spdshrink/shrinkage.hpp"
#include "spdshrink/tweedie.hpp"

// Synthetic experiment harness.  All randomness is drawn from counter-keyed
// streams RngStream(seed, id): the risk experiment keys sites by
// (rep << 32) | site and the group experiment keys sites directly, so every
// site's data is reproducible independently of scheduling or thread count.

namespace spdshrink {

// Recognized estimator names for the risk experiment.
inline constexpr const char* kEstimatorFm = "FM.LE";
inline constexpr const char* kEstimatorSureFm = "SURE-FM";
inline constexpr const char* kEstimatorFullFm = "SURE.Full-FM";
inline constexpr const char* kEstimatorMleCov = "MLE-Cov";
inline constexpr const char* kEstimatorFullCov = "SURE.Full-Cov";

struct RiskExperimentConfig {
  std::vector<int> p_grid = {50, 100, 200, 500};
  int n = 10;
  int reps = 200;
  Hyperparams prior;  // ground-truth hierarchy (see default_risk_config)
  std::vector<std::string> estimators = {
      kEstimatorFm, kEstimatorSureFm, kEstimatorFullFm, kEstimatorMleCov,
      kEstimatorFullCov};
  std::uint64_t seed = 12345;
};

// lambda = 10, mu = I_3, Psi = I_6, nu = 15, n = 10, reps = 200.
RiskExperimentConfig default_risk_config();

// One replicate of the hierarchy at p sites: per site Sigma_i ~ IW(Psi, nu),
// ve(log M_i) ~ N(ve(log mu), Sigma_i / lambda), then n observations
// ve(log X_ij) ~ N(ve(log M_i), Sigma_i).  Fills `truth` when non-null.
std::vector<std::vector<Matrix>> gen_hier_dataset(
    const RiskExperimentConfig& config, int p, int rep,
    GroundTruth* truth = nullptr);

struct RiskRow {
  std::string estimator;
  int p = 0;
  double mean_loss = 0.0;  // across replicates
  double std_err = 0.0;    // standard error across replicates
  double runtime_sec = 0.0;  // wall time spent in this estimator (see note)
};

struct RiskTable {
  std::vector<RiskRow> rows;  // ordered by (p, estimator) as configured
};

// Runs every configured estimator over reps replicates for each p in
// p_grid.  Mean estimators are scored by squared Log-Euclidean distance,
// covariance estimators by squared Frobenius distance, averaged over sites.
// The shared SURE hyperparameter fit is timed once per replicate and its
// cost split evenly between the SURE.Full rows.  Returns rows plus the
// count of replicates where the fit did not converge.
struct RiskRun {
  RiskTable table;
  int non_converged_fits = 0;
};
RiskRun run_risk_experiment(const RiskExperimentConfig& config);

struct GroupExperimentConfig {
  int rows = 20;
  int cols = 20;
  int n1 = 30;
  int n2 = 30;
  double sigma_lo = 0.3;  // per-site log-domain noise sd ~ U(sigma_lo, sigma_hi)
  double sigma_hi = 0.8;
  Matrix mean1;  // SPD template of group 1 everywhere (default diag(0.3, 1))
  Matrix mean2;  // SPD template of group 2 on changed sites (default diag(1, 0.3))
  std::vector<std::uint8_t> changed;  // row-major mask; empty = top-left
                                      // floor(rows/2) x floor(cols/2) block
  std::uint64_t seed = 12345;
  TweedieConfig tweedie;
};

GroupExperimentConfig default_group_config();

// Resolved changed-region mask for a config (applies the default block rule).
std::vector<std::uint8_t> changed_mask(const GroupExperimentConfig& config);

// Two groups of log-normal images with isotropic log-domain covariance
// sigma_i^2 I_q per site.  When non-null, truth_lambda receives the
// noncentrality (1/n1 + 1/n2) * ||delta_i||^2 / sigma_i^2 (0 off the changed
// region) with delta_i the log-domain template difference.
GroupData gen_group_images(const GroupExperimentConfig& config,
                           Vector* truth_lambda = nullptr);

struct GroupMetrics {
  double f1_tweedie = 0.0;
  double f1_mom = 0.0;
  double mse_tweedie = 0.0;  // squared error vs truth on changed sites
  double mse_mom = 0.0;
  Vector truth_lambda;
  Vector t2;
  Vector z;
};

// Full pipeline: generate, test, estimate the noncentrality map, score
// selection (top fraction = changed count / p) and estimation against truth.
std::pair<NoncentralityMap, GroupMetrics> run_group_experiment(
    const GroupExperimentConfig& config);

}  // namespace spdshrink
