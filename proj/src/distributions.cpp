#include "spdshrink/distributions.hpp"

#include <algorithm>
#include <cmath>

#include "spdshrink/errors.hpp"

namespace spdshrink {

namespace {

constexpr double kTermTol = 1e-14;    // Poisson mixture tail cutoff
constexpr double kQuantileTol = 1e-10;  // |cdf(x) - prob| target
constexpr int kMaxSeriesIters = 1000;

// Continued fraction for the regularized incomplete beta (modified Lentz).
double beta_cf(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxSeriesIters; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return h;
}

double chi2_pdf_central(double x, double dof) {
  if (x <= 0.0) return 0.0;
  const double h = 0.5 * dof;
  return std::exp((h - 1.0) * std::log(x) - 0.5 * x - h * std::log(2.0) -
                  std::lgamma(h));
}

}  // namespace

double gamma_p(double a, double x) {
  require(a > 0.0, Err::BadDof, "gamma_p: shape must be positive");
  require(x >= 0.0, Err::BadProb, "gamma_p: argument must be nonnegative");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) {
    // Lower series: P(a,x) = e^{-x} x^a / Gamma(a) * sum x^n / (a)_{n+1}.
    double ap = a;
    double term = 1.0 / a;
    double sum = term;
    for (int n = 0; n < kMaxSeriesIters; ++n) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  // Upper continued fraction (modified Lentz) for Q(a,x).
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxSeriesIters; ++i) {
    const double an = -static_cast<double>(i) * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  const double q = std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
  return 1.0 - q;
}

double inc_beta(double a, double b, double x) {
  require(a > 0.0 && b > 0.0, Err::BadDof,
          "inc_beta: shape parameters must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * beta_cf(a, b, x) / a;
  return 1.0 - bt * beta_cf(b, a, 1.0 - x) / b;
}

NcMixture::NcMixture(double lambda) : lambda_(lambda) {
  require(std::isfinite(lambda) && lambda >= 0.0, Err::BadDof,
          "NcMixture: noncentrality must be finite and nonnegative");
  const double half = 0.5 * lambda;
  if (half <= 0.0) {
    k_lo_ = 0;
    weights_ = {1.0};
    return;
  }
  const int k0 = static_cast<int>(std::floor(half));
  const double w0 =
      std::exp(-half + k0 * std::log(half) - std::lgamma(k0 + 1.0));
  std::vector<double> up;
  double w = w0;
  for (int k = k0;;) {
    w *= half / (k + 1);
    ++k;
    if (w < kTermTol || up.size() > 200000) break;
    up.push_back(w);
  }
  std::vector<double> down;
  w = w0;
  for (int k = k0; k > 0;) {
    w *= k / half;
    --k;
    if (w < kTermTol) break;
    down.push_back(w);
  }
  k_lo_ = k0 - static_cast<int>(down.size());
  weights_.assign(down.rbegin(), down.rend());
  weights_.push_back(w0);
  weights_.insert(weights_.end(), up.begin(), up.end());
  // Normalize so the CDF limits are exactly 0 and 1 despite tail truncation;
  // the adjustment is bounded by the cutoff times the term count.
  double total = 0.0;
  for (double wi : weights_) total += wi;
  for (double& wi : weights_) wi /= total;
}

double NcMixture::chi2_cdf(double x, double dof) const {
  require(dof > 0.0, Err::BadDof, "chi2_cdf: dof must be positive");
  if (x <= 0.0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const double k = static_cast<double>(k_lo_) + static_cast<double>(i);
    acc += weights_[i] * gamma_p(0.5 * dof + k, 0.5 * x);
  }
  return std::clamp(acc, 0.0, 1.0);
}

double NcMixture::chi2_pdf(double x, double dof) const {
  require(dof > 0.0, Err::BadDof, "chi2_pdf: dof must be positive");
  if (x <= 0.0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const double k = static_cast<double>(k_lo_) + static_cast<double>(i);
    acc += weights_[i] * chi2_pdf_central(x, dof + 2.0 * k);
  }
  return acc;
}

double NcMixture::f_cdf(double x, double dof1, double dof2) const {
  require(dof1 > 0.0 && dof2 > 0.0, Err::BadDof,
          "f_cdf: dof must be positive");
  if (x <= 0.0) return 0.0;
  const double y = dof1 * x / (dof1 * x + dof2);
  double acc = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const double k = static_cast<double>(k_lo_) + static_cast<double>(i);
    acc += weights_[i] * inc_beta(0.5 * dof1 + k, 0.5 * dof2, y);
  }
  return std::clamp(acc, 0.0, 1.0);
}

double nc_chi2_cdf(double x, double dof, double lambda) {
  return NcMixture(lambda).chi2_cdf(x, dof);
}

double nc_chi2_pdf(double x, double dof, double lambda) {
  return NcMixture(lambda).chi2_pdf(x, dof);
}

double nc_f_cdf(double x, double dof1, double dof2, double lambda) {
  return NcMixture(lambda).f_cdf(x, dof1, dof2);
}

double nc_chi2_quantile(double prob, double dof, const NcMixture& mixture) {
  require(prob > 0.0 && prob < 1.0, Err::BadProb,
          "nc_chi2_quantile: probability must lie in (0, 1)");
  require(dof > 0.0, Err::BadDof, "nc_chi2_quantile: dof must be positive");
  // Bracket the root by doubling from a moment-based guess.
  const double mean = dof + mixture.lambda();
  const double sd = std::sqrt(2.0 * (dof + 2.0 * mixture.lambda()));
  double lo = 0.0;
  double hi = mean + 10.0 * sd + 10.0;
  for (int i = 0; i < 200 && mixture.chi2_cdf(hi, dof) < prob; ++i) {
    lo = hi;
    hi *= 2.0;
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double c = mixture.chi2_cdf(x, dof);
    if (std::fabs(c - prob) <= kQuantileTol) return x;
    if (c < prob) {
      lo = x;
    } else {
      hi = x;
    }
    // Prefer a Newton step when the density supports it and the step stays
    // inside the bracket; otherwise bisect.
    const double p = mixture.chi2_pdf(x, dof);
    double next = 0.5 * (lo + hi);
    if (p > 0.0) {
      const double newton = x - (c - prob) / p;
      if (newton > lo && newton < hi) next = newton;
    }
    x = next;
    if (hi - lo <= 1e-13 * std::max(1.0, hi)) break;
  }
  return x;
}

double nc_chi2_quantile(double prob, double dof, double lambda) {
  const NcMixture mixture(lambda);
  return nc_chi2_quantile(prob, dof, mixture);
}

std::vector<Matrix> sample_log_normal(const LogNormalParams& params,
                                      RngStream& rng, int count) {
  require(count >= 1, Err::EmptyInput,
          "sample_log_normal: count must be at least 1");
  const Vector mu = ve(sym_log(params.mean));
  const int q = static_cast<int>(mu.size());
  require(params.cov.rows() == q && params.cov.cols() == q, Err::DimMismatch,
          "sample_log_normal: cov must be q x q with q = N(N+1)/2");
  Eigen::LLT<Matrix> llt(symmetrize(params.cov));
  require(llt.info() == Eigen::Success, Err::NotSpd,
          "sample_log_normal: cov is not positive definite");
  const Matrix chol = llt.matrixL();
  std::vector<Matrix> out;
  out.reserve(count);
  Vector z(q);
  for (int c = 0; c < count; ++c) {
    for (int i = 0; i < q; ++i) z[i] = rng.normal();
    out.push_back(sym_exp(ve_inv(mu + chol * z)));
  }
  return out;
}

Matrix sample_wishart(const WishartParams& params, RngStream& rng) {
  require_spd(params.scale, "sample_wishart: scale");
  const int q = static_cast<int>(params.scale.rows());
  require(params.dof > q - 1, Err::BadDof,
          "sample_wishart: dof must exceed q - 1");
  Eigen::LLT<Matrix> llt(symmetrize(params.scale));
  require(llt.info() == Eigen::Success, Err::NotSpd,
          "sample_wishart: scale is not positive definite");
  const Matrix chol = llt.matrixL();
  // Bartlett factor: chi distributed diagonal, standard normals below, drawn
  // row by row (diagonal entry first) for a fixed stream layout.
  Matrix a = Matrix::Zero(q, q);
  for (int i = 0; i < q; ++i) {
    a(i, i) = std::sqrt(rng.chi2(params.dof - i));
    for (int j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  const Matrix la = chol * a;
  return symmetrize(la * la.transpose());
}

Matrix sample_inv_wishart(const WishartParams& params, RngStream& rng) {
  require_spd(params.scale, "sample_inv_wishart: scale");
  const int q = static_cast<int>(params.scale.rows());
  require(params.dof > q + 1, Err::BadDof,
          "sample_inv_wishart: dof must exceed q + 1 for a finite mean");
  const Matrix w = sample_wishart({inv_spd(params.scale), params.dof}, rng);
  return inv_spd(w);
}

}  // namespace spdshrink
