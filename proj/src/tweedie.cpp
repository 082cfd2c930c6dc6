#include "spdshrink/tweedie.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spdshrink/distributions.hpp"
#include "spdshrink/errors.hpp"
#include "spdshrink/kernels.hpp"
#include "spdshrink/parallel.hpp"
#include "spdshrink/shrinkage.hpp"

namespace spdshrink {

namespace {

constexpr double kDenomEps = 1e-3;   // 1 + 2 l'(y) floor for the adjustment
constexpr double kCdfClamp = 1e-14;  // keep CDF values inside (0, 1)
constexpr int kIrlsMaxIters = 100;
// Sparse histograms (counts of zero over long stretches) can push the
// unpenalized Poisson MLE to infinity along directions that empty out tail
// bins.  A vanishing ridge on the standardized-basis coefficients keeps the
// optimum finite and unique without measurably biasing informative fits.
constexpr double kLindseyRidge = 1e-6;

// Internal non-throwing variant used by the iteration: returns false when
// the denominator collapses and the caller should fall back to MOM.
bool tweedie_chi2_guarded(double y, double dof, const LogDensityPoly& poly,
                          double* out) {
  const double lp = poly.dl(y);
  const double lpp = poly.d2l(y);
  const double denom = 1.0 + 2.0 * lp;
  if (!(denom > kDenomEps)) return false;
  const double value =
      ((y - dof + 4.0) + 2.0 * y * (2.0 * lpp / denom + lp)) * denom;
  *out = std::max(value, 0.0);
  return std::isfinite(*out);
}

}  // namespace

std::pair<Vector, std::vector<Matrix>> hotelling_t2(const GroupData& data) {
  require(!data.group1.empty(), Err::EmptyInput, "hotelling_t2: no sites");
  require(data.group1.size() == data.group2.size(), Err::DimMismatch,
          "hotelling_t2: groups disagree on the number of sites");
  require(data.group1.front().size() >= 2 && data.group2.front().size() >= 2,
          Err::TooFewSamples,
          "hotelling_t2: each group needs at least 2 observations per site");

  const SiteStats s1 = site_stats(data.group1);
  const SiteStats s2 = site_stats(data.group2);
  require(s1.N == s2.N, Err::DimMismatch,
          "hotelling_t2: groups disagree on matrix dimension");
  const int p = s1.p();
  const double n1 = s1.n;
  const double n2 = s2.n;
  const double pool_dof = n1 + n2 - 2.0;
  const double c = 1.0 / n1 + 1.0 / n2;

  Vector t2(p);
  std::vector<Matrix> pooled(p);
  parallel_for(static_cast<std::size_t>(p), [&](std::size_t i) {
    const Matrix sp =
        symmetrize((s1.scatter[i] + s2.scatter[i]) / pool_dof);
    Eigen::LLT<Matrix> llt(sp);
    require(llt.info() == Eigen::Success, Err::SingularPooled,
            "hotelling_t2: pooled scatter is singular at site " +
                std::to_string(i));
    const Vector d =
        (s1.xbar_log.row(i) - s2.xbar_log.row(i)).transpose();
    t2[i] = d.dot(llt.solve(d)) / c;
    pooled[i] = sp;
  });
  return {t2, std::move(pooled)};
}

FStatistics to_f_stats(const Vector& t2, int n1, int n2, int q) {
  require(t2.size() > 0, Err::EmptyInput, "to_f_stats: no statistics");
  require(n1 >= 2 && n2 >= 2, Err::TooFewSamples,
          "to_f_stats: each group needs at least 2 observations");
  const double nu = n1 + n2 - 2.0;
  require(nu - q - 1.0 >= 1.0, Err::BadDof,
          "to_f_stats: need n1 + n2 - 2 > q + 1");
  FStatistics fs;
  fs.n1 = n1;
  fs.n2 = n2;
  fs.q = q;
  fs.dof1 = q;
  fs.dof2 = nu - q - 1.0;
  fs.z = (fs.dof2 / (nu * q)) * t2;
  return fs;
}

Vector mom_noncentrality(const FStatistics& fs) {
  require(fs.z.size() > 0, Err::EmptyInput, "mom_noncentrality: no statistics");
  require(fs.dof2 > 2.0, Err::BadDof,
          "mom_noncentrality: needs dof2 > 2 for a finite F mean");
  const double d1 = fs.dof1;
  const double d2 = fs.dof2;
  Vector lambda(fs.z.size());
  for (Eigen::Index i = 0; i < fs.z.size(); ++i) {
    lambda[i] = std::max(d1 * (d2 - 2.0) / d2 * fs.z[i] - d1, 0.0);
  }
  return lambda;
}

double LogDensityPoly::l(double y) const {
  const double u = (y - center) / scale;
  double acc = coeffs[degree];
  for (int k = degree - 1; k >= 0; --k) acc = acc * u + coeffs[k];
  return acc;
}

double LogDensityPoly::dl(double y) const {
  const double u = (y - center) / scale;
  double acc = degree * coeffs[degree];
  for (int k = degree - 1; k >= 1; --k) acc = acc * u + k * coeffs[k];
  return acc / scale;
}

double LogDensityPoly::d2l(double y) const {
  if (degree < 2) return 0.0;
  const double u = (y - center) / scale;
  double acc = degree * (degree - 1.0) * coeffs[degree];
  for (int k = degree - 1; k >= 2; --k) acc = acc * u + k * (k - 1.0) * coeffs[k];
  return acc / (scale * scale);
}

LogDensityPoly lindsey_fit(const Vector& y, int degree, int bins) {
  const int p = static_cast<int>(y.size());
  require(degree >= 1, Err::ConfigError, "lindsey_fit: degree must be >= 1");
  require(bins >= 0, Err::ConfigError, "lindsey_fit: bins must be >= 0");
  require(p >= 10 * degree, Err::TooFewSamples,
          "lindsey_fit: need at least 10 samples per polynomial degree");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int i = 0; i < p; ++i) {
    require(std::isfinite(y[i]), Err::DegenerateSupport,
            "lindsey_fit: values must be finite");
    lo = std::min(lo, y[i]);
    hi = std::max(hi, y[i]);
  }
  require(hi > lo, Err::DegenerateSupport,
          "lindsey_fit: all values are identical");
  const int b = bins > 0
                    ? bins
                    : std::max(60, static_cast<int>(std::ceil(std::sqrt(
                                       static_cast<double>(p)))));
  require(b >= degree + 2, Err::ConfigError,
          "lindsey_fit: too few bins for the polynomial degree");
  const double pad = 0.01 * (hi - lo);
  const double support_lo = lo - pad;
  const double support_hi = hi + pad;
  const double width = (support_hi - support_lo) / b;

  Vector counts = Vector::Zero(b);
  for (int i = 0; i < p; ++i) {
    const int idx = std::min(
        b - 1, static_cast<int>((y[i] - support_lo) / width));
    counts[std::max(0, idx)] += 1.0;
  }

  // Standardized bin centers keep the polynomial basis well conditioned.
  const double center = 0.5 * (support_lo + support_hi);
  const double scale = 0.5 * (support_hi - support_lo);
  Matrix design(b, degree + 1);
  for (int r = 0; r < b; ++r) {
    const double u =
        (support_lo + (r + 0.5) * width - center) / scale;
    design(r, 0) = 1.0;
    for (int k = 1; k <= degree; ++k) design(r, k) = design(r, k - 1) * u;
  }

  // Poisson regression with offset log(p * width): counts ~ Poisson(mu),
  // log mu = design * beta + offset.  Damped Newton on the log-likelihood.
  const double offset = std::log(static_cast<double>(p) * width);
  Vector beta = Vector::Zero(degree + 1);
  beta[0] = std::log(counts.mean() / (p * width));
  const auto log_lik = [&](const Vector& bta, Vector* mu_out) {
    const Vector eta = (design * bta).array() + offset;
    Vector mu(b);
    double ll = -0.5 * kLindseyRidge * bta.squaredNorm();
    for (int r = 0; r < b; ++r) {
      if (eta[r] > 690.0) return -std::numeric_limits<double>::infinity();
      mu[r] = std::exp(eta[r]);
      ll += counts[r] * eta[r] - mu[r];
    }
    if (mu_out != nullptr) *mu_out = mu;
    return ll;
  };

  Vector mu(b);
  double ll = log_lik(beta, &mu);
  require(std::isfinite(ll), Err::IrlsDiverged,
          "lindsey_fit: infeasible start for the Poisson regression");
  bool converged = false;
  for (int iter = 0; iter < kIrlsMaxIters; ++iter) {
    const double ll_before = ll;
    const Vector grad =
        design.transpose() * (counts - mu) - kLindseyRidge * beta;
    Matrix hess = design.transpose() * mu.asDiagonal() * design;
    hess.diagonal().array() += kLindseyRidge;
    const Vector step = hess.ldlt().solve(grad);
    require(step.allFinite(), Err::IrlsDiverged,
            "lindsey_fit: Newton step is not finite");
    double damp = 1.0;
    bool improved = false;
    for (int h = 0; h < 30; ++h) {
      const Vector trial = beta + damp * step;
      Vector mu_trial;
      const double ll_trial = log_lik(trial, &mu_trial);
      if (std::isfinite(ll_trial) && ll_trial >= ll - 1e-12) {
        const double delta = damp * step.cwiseAbs().maxCoeff();
        beta = trial;
        ll = ll_trial;
        mu = mu_trial;
        improved = true;
        if (delta < 1e-10) converged = true;
        break;
      }
      damp *= 0.5;
    }
    require(improved, Err::IrlsDiverged,
            "lindsey_fit: Poisson regression cannot make progress");
    // Empty tail bins flatten the likelihood, leaving noise-dominated Newton
    // steps near the optimum; a stalled log-likelihood is the usual GLM
    // convergence signal, so accept either trigger.
    if (std::fabs(ll - ll_before) < 1e-9 * (1.0 + std::fabs(ll))) {
      converged = true;
    }
    if (converged) break;
  }
  require(converged, Err::IrlsDiverged,
          "lindsey_fit: Poisson regression did not converge");

  LogDensityPoly poly;
  poly.degree = degree;
  poly.center = center;
  poly.scale = scale;
  poly.coeffs = beta;
  poly.y_lo = support_lo;
  poly.y_hi = support_hi;

  // Renormalize the intercept so exp(l) integrates to one on the support
  // (composite Simpson on a fixed grid).
  const int simpson_n = 4000;  // even number of intervals
  const double h = (support_hi - support_lo) / simpson_n;
  double integral = 0.0;
  for (int i = 0; i <= simpson_n; ++i) {
    const double u = (support_lo + i * h - center) / scale;
    double acc = beta[degree];
    for (int k = degree - 1; k >= 0; --k) acc = acc * u + beta[k];
    const double w = (i == 0 || i == simpson_n) ? 1.0
                     : (i % 2 == 1)             ? 4.0
                                                : 2.0;
    integral += w * std::exp(std::min(acc, 690.0));
  }
  integral *= h / 3.0;
  require(std::isfinite(integral) && integral > 0.0, Err::IrlsDiverged,
          "lindsey_fit: fitted density cannot be normalized");
  poly.coeffs[0] -= std::log(integral);
  return poly;
}

double tweedie_chi2(double y, double dof, const LogDensityPoly& poly) {
  require(dof > 0.0, Err::BadDof, "tweedie_chi2: dof must be positive");
  double value = 0.0;
  require(tweedie_chi2_guarded(y, dof, poly, &value), Err::DenominatorNearZero,
          "tweedie_chi2: selection-adjustment denominator is near zero");
  return value;
}

std::vector<std::uint8_t> top_fraction_mask(const Vector& score,
                                            double fraction) {
  const int p = static_cast<int>(score.size());
  require(p > 0, Err::EmptyInput, "top_fraction_mask: no scores");
  require(fraction > 0.0 && fraction <= 1.0, Err::ConfigError,
          "top_fraction_mask: fraction must lie in (0, 1]");
  const int k = std::min(
      p, std::max(1, static_cast<int>(std::ceil(fraction * p))));
  std::vector<int> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return score[a] > score[b];
  });
  std::vector<std::uint8_t> mask(p, 0);
  for (int i = 0; i < k; ++i) mask[order[i]] = 1;
  return mask;
}

NoncentralityMap tweedie_iterate(const FStatistics& fs,
                                 const TweedieConfig& config) {
  const int p = static_cast<int>(fs.z.size());
  require(p >= 50, Err::TooFewSamples,
          "tweedie_iterate: need at least 50 sites");
  require(config.max_iters >= 1, Err::ConfigError,
          "tweedie_iterate: max_iters must be >= 1");
  require(config.tol > 0.0, Err::ConfigError,
          "tweedie_iterate: tol must be positive");

  NoncentralityMap out;
  out.lambda_mom = mom_noncentrality(fs);
  out.mom_fallback.assign(p, 0);

  Vector lambda = out.lambda_mom;
  Vector chi2_scale(p);
  bool converged = false;
  int iterations = 0;
  for (int t = 1; t <= config.max_iters; ++t) {
    // Map each statistic to the chi-square scale at the current lambda.  The
    // Poisson mixture is shared between the F CDF and the quantile solve.
    parallel_for(static_cast<std::size_t>(p), [&](std::size_t i) {
      const NcMixture mixture(lambda[i]);
      double u = mixture.f_cdf(fs.z[i], fs.dof1, fs.dof2);
      u = std::clamp(u, kCdfClamp, 1.0 - kCdfClamp);
      chi2_scale[i] = nc_chi2_quantile(u, fs.dof1, mixture);
    });
    const LogDensityPoly poly =
        lindsey_fit(chi2_scale, config.degree, config.bins);
    double delta = 0.0;
    std::vector<std::uint8_t> fallback(p, 0);
    Vector next(p);
    for (int i = 0; i < p; ++i) {
      double value = 0.0;
      if (tweedie_chi2_guarded(chi2_scale[i], fs.dof1, poly, &value)) {
        next[i] = value;
      } else {
        next[i] = out.lambda_mom[i];
        fallback[i] = 1;
      }
      delta = std::max(delta, std::fabs(next[i] - lambda[i]));
    }
    lambda = next;
    out.mom_fallback = std::move(fallback);
    iterations = t;
    if (delta < config.tol) {
      converged = true;
      break;
    }
  }
  out.lambda_tweedie = lambda;
  out.iterations = iterations;
  out.converged = converged;
  out.selected = top_fraction_mask(lambda, config.top_fraction);
  return out;
}

GridMap smooth_map(const GridMap& map, int window) {
  require(window >= 1 && window % 2 == 1, Err::ConfigError,
          "smooth_map: window must be odd and >= 1");
  require(map.rows > 0 && map.cols > 0, Err::DimMismatch,
          "smooth_map: grid dimensions must be positive");
  require(static_cast<Eigen::Index>(map.rows) * map.cols == map.values.size(),
          Err::DimMismatch, "smooth_map: value count must equal rows * cols");
  if (window == 1) return map;
  GridMap out;
  out.rows = map.rows;
  out.cols = map.cols;
  out.values.resize(map.values.size());
  const int half = window / 2;
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      double acc = 0.0;
      int count = 0;
      for (int rr = std::max(0, r - half);
           rr <= std::min(map.rows - 1, r + half); ++rr) {
        for (int cc = std::max(0, c - half);
             cc <= std::min(map.cols - 1, c + half); ++cc) {
          acc += map.values[rr * map.cols + cc];
          ++count;
        }
      }
      out.values[r * map.cols + c] = acc / count;
    }
  }
  return out;
}

}  // namespace spdshrink
