#include "spdshrink/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "spdshrink/distributions.hpp"
#include "spdshrink/errors.hpp"
#include "spdshrink/parallel.hpp"

namespace spdshrink {

namespace {

double seconds_since(
    const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

double f1_score(const std::vector<std::uint8_t>& selected,
                const std::vector<std::uint8_t>& truth) {
  int tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (selected[i] && truth[i]) ++tp;
    if (selected[i] && !truth[i]) ++fp;
    if (!selected[i] && truth[i]) ++fn;
  }
  const double denom = 2.0 * tp + fp + fn;
  return denom > 0.0 ? 2.0 * tp / denom : 0.0;
}

}  // namespace

RiskExperimentConfig default_risk_config() {
  RiskExperimentConfig config;
  config.prior.lambda = 10.0;
  config.prior.mu = Matrix::Identity(3, 3);
  config.prior.psi = Matrix::Identity(6, 6);
  config.prior.nu = 15.0;
  return config;
}

std::vector<std::vector<Matrix>> gen_hier_dataset(
    const RiskExperimentConfig& config, int p, int rep, GroundTruth* truth) {
  require(p >= 1, Err::EmptyInput, "gen_hier_dataset: p must be >= 1");
  require(rep >= 0, Err::ConfigError, "gen_hier_dataset: rep must be >= 0");
  require(config.n >= 2, Err::BadN, "gen_hier_dataset: need n >= 2");
  const Hyperparams& prior = config.prior;
  require(prior.lambda > 0.0, Err::BadDof,
          "gen_hier_dataset: prior lambda must be positive");
  const Vector mu_ve = ve(sym_log(prior.mu));
  const int q = static_cast<int>(mu_ve.size());
  require(prior.psi.rows() == q && prior.psi.cols() == q, Err::DimMismatch,
          "gen_hier_dataset: Psi must be q x q");
  require(prior.nu > q + 1, Err::BadDof,
          "gen_hier_dataset: prior nu must exceed q + 1");
  require_spd(prior.psi, "gen_hier_dataset: Psi");

  std::vector<std::vector<Matrix>> data(p);
  if (truth != nullptr) {
    truth->means.resize(p);
    truth->covs.resize(p);
  }
  const double inv_sqrt_lambda = 1.0 / std::sqrt(prior.lambda);
  parallel_for(static_cast<std::size_t>(p), [&](std::size_t site) {
    RngStream rng(config.seed,
                  (static_cast<std::uint64_t>(rep) << 32) |
                      static_cast<std::uint64_t>(site));
    const Matrix sigma = sample_inv_wishart({prior.psi, prior.nu}, rng);
    Eigen::LLT<Matrix> llt(sigma);
    require(llt.info() == Eigen::Success, Err::NotSpd,
            "gen_hier_dataset: sampled covariance is not positive definite");
    const Matrix chol = llt.matrixL();
    Vector z(q);
    for (int i = 0; i < q; ++i) z[i] = rng.normal();
    const Vector m_ve = mu_ve + inv_sqrt_lambda * (chol * z);
    auto& site_obs = data[site];
    site_obs.reserve(config.n);
    for (int j = 0; j < config.n; ++j) {
      for (int i = 0; i < q; ++i) z[i] = rng.normal();
      site_obs.push_back(sym_exp(ve_inv(m_ve + chol * z)));
    }
    if (truth != nullptr) {
      truth->means[site] = sym_exp(ve_inv(m_ve));
      truth->covs[site] = sigma;
    }
  });
  return data;
}

RiskRun run_risk_experiment(const RiskExperimentConfig& config) {
  require(!config.p_grid.empty(), Err::ConfigError,
          "run_risk_experiment: empty p grid");
  require(config.reps >= 1, Err::ConfigError,
          "run_risk_experiment: need at least 1 replicate");
  require(!config.estimators.empty(), Err::ConfigError,
          "run_risk_experiment: no estimators requested");
  const std::set<std::string> known = {kEstimatorFm, kEstimatorSureFm,
                                       kEstimatorFullFm, kEstimatorMleCov,
                                       kEstimatorFullCov};
  for (const auto& name : config.estimators) {
    require(known.count(name) == 1, Err::ConfigError,
            "run_risk_experiment: unknown estimator '" + name + "'");
  }
  const auto wants = [&](const char* name) {
    return std::find(config.estimators.begin(), config.estimators.end(),
                     name) != config.estimators.end();
  };
  const bool need_full = wants(kEstimatorFullFm) || wants(kEstimatorFullCov);
  const int full_rows = (wants(kEstimatorFullFm) ? 1 : 0) +
                        (wants(kEstimatorFullCov) ? 1 : 0);

  RiskRun run;
  for (const int p : config.p_grid) {
    require(p >= 2, Err::ConfigError,
            "run_risk_experiment: each p must be >= 2");
    std::vector<std::vector<double>> losses(config.estimators.size());
    std::vector<double> runtimes(config.estimators.size(), 0.0);
    const auto loss_slot = [&](const char* name) -> std::vector<double>& {
      const auto it = std::find(config.estimators.begin(),
                                config.estimators.end(), name);
      return losses[it - config.estimators.begin()];
    };
    const auto time_slot = [&](const char* name) -> double& {
      const auto it = std::find(config.estimators.begin(),
                                config.estimators.end(), name);
      return runtimes[it - config.estimators.begin()];
    };

    for (int rep = 0; rep < config.reps; ++rep) {
      GroundTruth truth;
      const auto data = gen_hier_dataset(config, p, rep, &truth);
      const SiteStats stats = site_stats(data);

      if (wants(kEstimatorFm)) {
        const auto start = std::chrono::steady_clock::now();
        ShrinkageResult fm;
        fm.means = stats.xbar;
        const auto [l1, l2] = loss_le(fm, truth);
        (void)l2;
        time_slot(kEstimatorFm) += seconds_since(start);
        loss_slot(kEstimatorFm).push_back(l1);
      }
      if (wants(kEstimatorSureFm)) {
        const auto start = std::chrono::steady_clock::now();
        const ShrinkageResult fit = estimate_fm_known_var(stats);
        const auto [l1, l2] = loss_le(fit, truth);
        (void)l2;
        time_slot(kEstimatorSureFm) += seconds_since(start);
        loss_slot(kEstimatorSureFm).push_back(l1);
      }
      if (wants(kEstimatorMleCov)) {
        const auto start = std::chrono::steady_clock::now();
        ShrinkageResult mle;
        mle.means = stats.xbar;
        mle.covs.resize(p);
        for (int i = 0; i < p; ++i) mle.covs[i] = stats.scatter[i] / stats.n;
        const auto [l1, l2] = loss_le(mle, truth);
        (void)l1;
        time_slot(kEstimatorMleCov) += seconds_since(start);
        loss_slot(kEstimatorMleCov).push_back(l2);
      }
      if (need_full) {
        const auto start = std::chrono::steady_clock::now();
        const SureFit fit = minimize_sure(stats);
        if (!fit.converged) ++run.non_converged_fits;
        const ShrinkageResult post = posterior_estimates(stats, fit.hyper);
        const double elapsed = seconds_since(start) / full_rows;
        const auto [l1, l2] = loss_le(post, truth);
        if (wants(kEstimatorFullFm)) {
          time_slot(kEstimatorFullFm) += elapsed;
          loss_slot(kEstimatorFullFm).push_back(l1);
        }
        if (wants(kEstimatorFullCov)) {
          time_slot(kEstimatorFullCov) += elapsed;
          loss_slot(kEstimatorFullCov).push_back(l2);
        }
      }
    }

    for (std::size_t e = 0; e < config.estimators.size(); ++e) {
      const auto& values = losses[e];
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= values.size();
      double std_err = 0.0;
      if (values.size() > 1) {
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        var /= (values.size() - 1);
        std_err = std::sqrt(var / values.size());
      }
      RiskRow row;
      row.estimator = config.estimators[e];
      row.p = p;
      row.mean_loss = mean;
      row.std_err = std_err;
      row.runtime_sec = runtimes[e];
      run.table.rows.push_back(std::move(row));
    }
  }
  return run;
}

GroupExperimentConfig default_group_config() {
  GroupExperimentConfig config;
  config.mean1 = Matrix::Zero(2, 2);
  config.mean1.diagonal() << 0.3, 1.0;
  config.mean2 = Matrix::Zero(2, 2);
  config.mean2.diagonal() << 1.0, 0.3;
  return config;
}

std::vector<std::uint8_t> changed_mask(const GroupExperimentConfig& config) {
  const int p = config.rows * config.cols;
  if (!config.changed.empty()) {
    require(static_cast<int>(config.changed.size()) == p, Err::DimMismatch,
            "changed_mask: mask size must equal rows * cols");
    return config.changed;
  }
  std::vector<std::uint8_t> mask(p, 0);
  const int block_r = config.rows / 2;
  const int block_c = config.cols / 2;
  for (int r = 0; r < block_r; ++r) {
    for (int c = 0; c < block_c; ++c) mask[r * config.cols + c] = 1;
  }
  return mask;
}

GroupData gen_group_images(const GroupExperimentConfig& config,
                           Vector* truth_lambda) {
  require(config.rows >= 1 && config.cols >= 1, Err::ConfigError,
          "gen_group_images: grid dimensions must be positive");
  require(config.n1 >= 2 && config.n2 >= 2, Err::TooFewSamples,
          "gen_group_images: each group needs at least 2 observations");
  require(config.sigma_lo > 0.0 && config.sigma_hi >= config.sigma_lo,
          Err::ConfigError, "gen_group_images: invalid sigma range");
  const Vector m1 = ve(sym_log(config.mean1));
  const Vector m2 = ve(sym_log(config.mean2));
  require(m1.size() == m2.size(), Err::DimMismatch,
          "gen_group_images: templates disagree on dimension");
  const int q = static_cast<int>(m1.size());
  const int p = config.rows * config.cols;
  const std::vector<std::uint8_t> mask = changed_mask(config);
  const double c = 1.0 / config.n1 + 1.0 / config.n2;
  const double delta2 = (m2 - m1).squaredNorm();

  GroupData data;
  data.group1.resize(p);
  data.group2.resize(p);
  if (truth_lambda != nullptr) truth_lambda->resize(p);
  parallel_for(static_cast<std::size_t>(p), [&](std::size_t site) {
    RngStream rng(config.seed, static_cast<std::uint64_t>(site));
    const double sigma =
        config.sigma_lo + (config.sigma_hi - config.sigma_lo) * rng.uniform();
    const Vector& center2 = mask[site] ? m2 : m1;
    Vector z(q);
    auto draw = [&](const Vector& center) {
      for (int i = 0; i < q; ++i) z[i] = rng.normal();
      return sym_exp(ve_inv(center + sigma * z));
    };
    auto& g1 = data.group1[site];
    g1.reserve(config.n1);
    for (int j = 0; j < config.n1; ++j) g1.push_back(draw(m1));
    auto& g2 = data.group2[site];
    g2.reserve(config.n2);
    for (int j = 0; j < config.n2; ++j) g2.push_back(draw(center2));
    if (truth_lambda != nullptr) {
      (*truth_lambda)[site] =
          mask[site] ? c * delta2 / (sigma * sigma) : 0.0;
    }
  });
  return data;
}

std::pair<NoncentralityMap, GroupMetrics> run_group_experiment(
    const GroupExperimentConfig& config) {
  Vector truth;
  const GroupData data = gen_group_images(config, &truth);
  const auto [t2, pooled] = hotelling_t2(data);
  const int q = static_cast<int>(pooled.front().rows());
  const FStatistics fs = to_f_stats(t2, config.n1, config.n2, q);

  const std::vector<std::uint8_t> mask = changed_mask(config);
  int n_changed = 0;
  for (auto m : mask) n_changed += m;
  require(n_changed > 0, Err::ConfigError,
          "run_group_experiment: changed region is empty");

  TweedieConfig tweedie = config.tweedie;
  tweedie.top_fraction =
      static_cast<double>(n_changed) / static_cast<double>(mask.size());
  NoncentralityMap map = tweedie_iterate(fs, tweedie);

  GroupMetrics metrics;
  metrics.truth_lambda = truth;
  metrics.t2 = t2;
  metrics.z = fs.z;
  metrics.f1_tweedie = f1_score(map.selected, mask);
  metrics.f1_mom =
      f1_score(top_fraction_mask(map.lambda_mom, tweedie.top_fraction), mask);
  double mse_tw = 0.0, mse_mom = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const double dt = map.lambda_tweedie[i] - truth[i];
    const double dm = map.lambda_mom[i] - truth[i];
    mse_tw += dt * dt;
    mse_mom += dm * dm;
  }
  metrics.mse_tweedie = mse_tw / n_changed;
  metrics.mse_mom = mse_mom / n_changed;
  return {std::move(map), std::move(metrics)};
}

}  // namespace spdshrink
