#include "spdshrink/shrinkage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spdshrink/errors.hpp"
#include "spdshrink/kernels.hpp"
#include "spdshrink/parallel.hpp"

namespace spdshrink {

namespace {

constexpr double kLambdaMin = 1e-8;
constexpr double kLambdaMax = 1e8;
constexpr double kNuGap = 1e-6;  // nu = q + 1 + kNuGap + exp(w)
constexpr double kNuMax = 1e6;

Vector ve_of_log(const Matrix& mu, int n_dim, const char* what) {
  require(mu.rows() == n_dim && mu.cols() == n_dim, Err::DimMismatch,
          std::string(what) + ": center dimension disagrees with the data");
  return ve(sym_log(mu));
}

void check_lambda(double lambda, const char* what) {
  require(std::isfinite(lambda) && lambda >= 0.0, Err::BadDof,
          std::string(what) + ": lambda must be finite and nonnegative");
}

}  // namespace

SiteStats site_stats(const std::vector<std::vector<Matrix>>& data) {
  require(!data.empty(), Err::EmptyInput, "site_stats: no sites given");
  const int p = static_cast<int>(data.size());
  const int n = static_cast<int>(data.front().size());
  require(n >= 2, Err::BadN,
          "site_stats: need at least 2 observations per site");
  require(data.front().front().rows() == data.front().front().cols(),
          Err::DimMismatch, "site_stats: observations must be square");
  const int N = static_cast<int>(data.front().front().rows());
  const int q = vec_dim(N);

  SiteStats st;
  st.n = n;
  st.N = N;
  st.q = q;
  st.xbar.resize(p);
  st.scatter.resize(p);
  st.xbar_log.resize(p, q);
  st.scatter_flat.resize(p, q * q);
  st.tr_s.resize(p);
  st.tr_s2.resize(p);
  st.tr_s_sq.resize(p);

  parallel_for(static_cast<std::size_t>(p), [&](std::size_t i) {
    const auto& site = data[i];
    require(static_cast<int>(site.size()) == n, Err::DimMismatch,
            "site_stats: sites disagree on the number of observations");
    std::vector<Vector> logs(site.size());
    Vector mean = Vector::Zero(q);
    for (std::size_t j = 0; j < site.size(); ++j) {
      require(site[j].rows() == N && site[j].cols() == N, Err::DimMismatch,
              "site_stats: observations disagree on matrix dimension");
      logs[j] = ve(sym_log(site[j]));
      mean += logs[j];
    }
    mean /= static_cast<double>(n);
    Matrix s = Matrix::Zero(q, q);
    for (const Vector& lg : logs) {
      const Vector d = lg - mean;
      s.noalias() += d * d.transpose();
    }
    s = symmetrize(s);
    st.xbar[i] = sym_exp(ve_inv(mean));
    st.scatter[i] = s;
    st.xbar_log.row(i) = mean.transpose();
    for (int r = 0; r < q; ++r) {
      for (int c = 0; c < q; ++c) st.scatter_flat(i, r * q + c) = s(r, c);
    }
    st.tr_s[i] = s.trace();
    st.tr_s2[i] = s.squaredNorm();
    st.tr_s_sq[i] = st.tr_s[i] * st.tr_s[i];
  });
  return st;
}

void rebuild_cache(SiteStats& st) {
  const int p = st.p();
  require(p > 0, Err::EmptyInput, "rebuild_cache: no sites");
  require(static_cast<int>(st.scatter.size()) == p, Err::DimMismatch,
          "rebuild_cache: xbar and scatter lengths disagree");
  st.N = static_cast<int>(st.xbar.front().rows());
  st.q = vec_dim(st.N);
  const int q = st.q;
  st.xbar_log.resize(p, q);
  st.scatter_flat.resize(p, q * q);
  st.tr_s.resize(p);
  st.tr_s2.resize(p);
  st.tr_s_sq.resize(p);
  parallel_for(static_cast<std::size_t>(p), [&](std::size_t i) {
    st.xbar_log.row(i) = ve(sym_log(st.xbar[i])).transpose();
    const Matrix s = symmetrize(st.scatter[i]);
    require(s.rows() == q, Err::DimMismatch,
            "rebuild_cache: scatter dimension disagrees with xbar");
    for (int r = 0; r < q; ++r) {
      for (int c = 0; c < q; ++c) st.scatter_flat(i, r * q + c) = s(r, c);
    }
    st.tr_s[i] = s.trace();
    st.tr_s2[i] = s.squaredNorm();
    st.tr_s_sq[i] = st.tr_s[i] * st.tr_s[i];
  });
}

std::vector<double> default_site_variances(const SiteStats& st) {
  require(st.p() > 0, Err::EmptyInput, "default_site_variances: no sites");
  require(st.n >= 2, Err::BadN, "default_site_variances: need n >= 2");
  std::vector<double> a(st.p());
  const double scale = 1.0 / (static_cast<double>(st.n - 1) * st.q);
  for (int i = 0; i < st.p(); ++i) a[i] = st.tr_s[i] * scale;
  return a;
}

namespace {

// Known-variance SURE with the center already in half-vectorized log form.
double sure_known_var_ve(const SiteStats& st, const std::vector<double>& a,
                         double lambda, const Vector& mu_ve,
                         std::vector<double>& d2, std::vector<double>& terms) {
  const int p = st.p();
  const int q = st.q;
  const double n = st.n;
  kernels::rowwise_sumsq_diff(st.xbar_log.data(), mu_ve.data(), d2.data(), p,
                              q);
  for (int i = 0; i < p; ++i) {
    const double ai = a[i];
    const double denom = n * lambda + ai;
    terms[i] = ai / (denom * denom) *
               (ai * d2[i] + q * (n * n * lambda * lambda - ai * ai) / n);
  }
  return kernels::sum(terms.data(), p) / p;
}

}  // namespace

double sure_fm_known_var(const SiteStats& st, const std::vector<double>& a,
                         double lambda, const Matrix& mu) {
  require(st.p() > 0, Err::EmptyInput, "sure_fm_known_var: no sites");
  require(st.n >= 2, Err::BadN, "sure_fm_known_var: need n >= 2");
  require(static_cast<int>(a.size()) == st.p(), Err::DimMismatch,
          "sure_fm_known_var: one variance per site required");
  check_lambda(lambda, "sure_fm_known_var");
  const Vector mu_ve = ve_of_log(mu, st.N, "sure_fm_known_var");
  std::vector<double> d2(st.p()), terms(st.p());
  return sure_known_var_ve(st, a, lambda, mu_ve, d2, terms);
}

ShrinkageResult estimate_fm_known_var(const SiteStats& st,
                                      std::vector<double> a) {
  require(st.p() > 0, Err::EmptyInput, "estimate_fm_known_var: no sites");
  require(st.n >= 2, Err::BadN, "estimate_fm_known_var: need n >= 2");
  if (a.empty()) a = default_site_variances(st);
  require(static_cast<int>(a.size()) == st.p(), Err::DimMismatch,
          "estimate_fm_known_var: one variance per site required");
  for (double ai : a) {
    require(std::isfinite(ai) && ai > 0.0, Err::BadDof,
            "estimate_fm_known_var: site variances must be positive");
  }
  const int p = st.p();
  const int q = st.q;
  const double n = st.n;

  // Moment start: center at the mean of site means; the prior variance
  // lambda is the per-coordinate spread in excess of the sampling noise.
  const Vector mu0 = st.xbar_log.colwise().mean().transpose();
  double mean_d2 = 0.0;
  for (int i = 0; i < p; ++i) {
    mean_d2 += (st.xbar_log.row(i).transpose() - mu0).squaredNorm();
  }
  mean_d2 /= p;
  double mean_a = 0.0;
  for (double ai : a) mean_a += ai;
  mean_a /= p;
  const double lam0 = std::max((mean_d2 - q * mean_a / n) / q, 1e-4);

  Vector x0(1 + q);
  x0[0] = std::log(lam0);
  x0.tail(q) = mu0;

  std::vector<double> d2(p), terms(p);
  const double log_min = std::log(kLambdaMin);
  const double log_max = std::log(kLambdaMax);
  const Objective obj = [&](const Vector& x) {
    const double lambda = std::exp(std::clamp(x[0], log_min, log_max));
    const Vector mu_ve = x.tail(q);
    return sure_known_var_ve(st, a, lambda, mu_ve, d2, terms);
  };
  const LbfgsResult fit = lbfgs_minimize(obj, x0);

  const double lambda = std::exp(std::clamp(fit.x[0], log_min, log_max));
  const Vector mu_ve = fit.x.tail(q);

  ShrinkageResult out;
  out.means.resize(p);
  parallel_for(static_cast<std::size_t>(p), [&](std::size_t i) {
    const double w = n * lambda + a[i];
    const Vector blend =
        (n * lambda * st.xbar_log.row(i).transpose() + a[i] * mu_ve) / w;
    out.means[i] = sym_exp(ve_inv(blend));
  });
  out.hyper.lambda = lambda;
  out.hyper.mu = sym_exp(ve_inv(mu_ve));
  out.hyper.psi = Matrix();
  out.hyper.nu = 0.0;
  out.sure_value = fit.value;
  out.iterations = fit.iterations;
  out.converged = fit.converged;
  return out;
}

double sure_full(const SiteStats& st, const Hyperparams& h) {
  const int p = st.p();
  const int q = st.q;
  require(p > 0, Err::EmptyInput, "sure_full: no sites");
  require(st.n >= 3, Err::BadN, "sure_full: need n >= 3");
  check_lambda(h.lambda, "sure_full");
  require(h.nu > q + 1, Err::BadDof, "sure_full: nu must exceed q + 1");
  require(h.psi.rows() == q && h.psi.cols() == q, Err::DimMismatch,
          "sure_full: Psi must be q x q");
  const Vector mu_ve = ve_of_log(h.mu, st.N, "sure_full");
  const Matrix psi = symmetrize(h.psi);

  const double n = st.n;
  const double lambda = h.lambda;
  const double kappa = h.nu - q - 1.0;
  const double c_mean = 1.0 / ((lambda + n) * (lambda + n));
  const double a1 = (n - lambda * lambda / n) / (n - 1.0);
  const double denom_cov = h.nu + n - q - 2.0;
  const double c_cov = 1.0 / (denom_cov * denom_cov);
  const double b1 = (n - 3.0 + kappa * kappa) / ((n + 1.0) * (n - 2.0));
  const double b2 = ((n - 1.0) * (n - 1.0) - kappa * kappa) /
                    ((n - 1.0) * (n + 1.0) * (n - 2.0));
  const double b3 = 2.0 * kappa / (n - 1.0);
  const double tr_psi2 = psi.squaredNorm();

  std::vector<double> psi_flat(q * q);
  for (int r = 0; r < q; ++r) {
    for (int c = 0; c < q; ++c) psi_flat[r * q + c] = psi(r, c);
  }
  std::vector<double> d2(p), psi_s(p), terms(p);
  kernels::rowwise_sumsq_diff(st.xbar_log.data(), mu_ve.data(), d2.data(), p,
                              q);
  kernels::rowwise_dot(st.scatter_flat.data(), psi_flat.data(), psi_s.data(),
                       p, q * q);
  for (int i = 0; i < p; ++i) {
    terms[i] = c_mean * (a1 * st.tr_s[i] + lambda * lambda * d2[i]) +
               c_cov * (b1 * st.tr_s2[i] + b2 * st.tr_s_sq[i] -
                        b3 * psi_s[i] + tr_psi2);
  }
  return kernels::sum(terms.data(), p) / p;
}

Hyperparams init_hyperparams(const SiteStats& st) {
  const int p = st.p();
  const int q = st.q;
  require(p >= 2, Err::TooFewSamples,
          "init_hyperparams: need at least 2 sites");
  require(st.n >= 2, Err::BadN, "init_hyperparams: need n >= 2");
  const double n = st.n;

  Hyperparams h;
  const Vector mu0 = st.xbar_log.colwise().mean().transpose();
  h.mu = sym_exp(ve_inv(mu0));

  // lambda from the spread of site means in excess of sampling noise:
  // E||xbar_i - mu||^2 = tr(Sigma_i)(1/n + 1/lambda), E trS_i = (n-1)trSigma_i.
  const double tau = st.tr_s.sum() / (p * (n - 1.0));
  double spread = 0.0;
  for (int i = 0; i < p; ++i) {
    spread += (st.xbar_log.row(i).transpose() - mu0).squaredNorm();
  }
  spread /= p;
  const double denom = n * spread - tau;
  h.lambda = denom > 0.0
                 ? std::clamp(n * tau / denom, kLambdaMin, kLambdaMax)
                 : kLambdaMax;

  // nu from the first moments of S and S^{-1}:
  // r := (n-q-2)/(p^2 q (n-1)) tr(sum S_i sum S_j^{-1}) -> nu/(nu-q-1).
  Matrix sum_s = Matrix::Zero(q, q);
  for (const Matrix& s : st.scatter) sum_s += s;
  double nu0;
  if (st.n - q - 2 > 0) {
    Matrix sum_sinv = Matrix::Zero(q, q);
    for (const Matrix& s : st.scatter) {
      Eigen::LLT<Matrix> llt(symmetrize(s));
      require(llt.info() == Eigen::Success, Err::SingularScatter,
              "init_hyperparams: a site scatter matrix is singular");
      sum_sinv += llt.solve(Matrix::Identity(q, q));
    }
    const double r = (n - q - 2.0) / (static_cast<double>(p) * p * q *
                                      (n - 1.0)) *
                     (sum_s * sum_sinv).trace();
    nu0 = r > 1.0 + 1e-12 ? (q + 1.0) / (r - 1.0) + q + 1.0 : kNuMax;
  } else {
    // Too few observations per site for the tail-moment equation.
    nu0 = q + 3.0;
  }
  h.nu = std::clamp(nu0, q + 1.0 + 1e-3, kNuMax);

  h.psi = symmetrize(((h.nu - q - 1.0) / (p * (n - 1.0))) * sum_s);
  return h;
}

namespace {

int pack_dim(int q) { return 1 + q + q * (q + 1) / 2 + 1; }

Vector pack_hyper(const Hyperparams& h, int q) {
  Vector x(pack_dim(q));
  x[0] = std::log(std::clamp(h.lambda, kLambdaMin, kLambdaMax));
  x.segment(1, q) = ve(sym_log(h.mu));
  Matrix psi = symmetrize(h.psi);
  Eigen::LLT<Matrix> llt(psi);
  if (llt.info() != Eigen::Success) {
    // Ridge the scale matrix just enough to factorize.
    const double ridge = 1e-8 * std::max(psi.trace() / q, 1.0);
    psi += ridge * Matrix::Identity(q, q);
    llt.compute(psi);
    require(llt.info() == Eigen::Success, Err::SingularScatter,
            "minimize_sure: cannot factorize the initial scale matrix");
  }
  const Matrix chol = llt.matrixL();
  int pos = 1 + q;
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j <= i; ++j) {
      x[pos++] = (i == j) ? std::log(chol(i, i)) : chol(i, j);
    }
  }
  x[pos] = std::log(std::max(h.nu - (q + 1.0) - kNuGap, 1e-12));
  return x;
}

Hyperparams unpack_hyper(const Vector& x, int big_n, int q) {
  Hyperparams h;
  h.lambda = std::exp(std::clamp(x[0], std::log(kLambdaMin),
                                 std::log(kLambdaMax)));
  h.mu = sym_exp(ve_inv(x.segment(1, q)));
  Matrix chol = Matrix::Zero(q, q);
  int pos = 1 + q;
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j <= i; ++j) {
      chol(i, j) = (i == j) ? std::exp(std::clamp(x[pos], -350.0, 350.0))
                            : x[pos];
      ++pos;
    }
  }
  h.psi = symmetrize(chol * chol.transpose());
  h.nu = q + 1.0 + kNuGap + std::exp(std::clamp(x[pos], -46.0, 46.0));
  (void)big_n;
  return h;
}

}  // namespace

SureFit minimize_sure(const SiteStats& st, const LbfgsOptions& options) {
  const int q = st.q;
  require(st.n >= 3, Err::BadN, "minimize_sure: need n >= 3");
  const Hyperparams h0 = init_hyperparams(st);
  const Vector x0 = pack_hyper(h0, q);

  const Objective obj = [&](const Vector& x) {
    // Out-of-domain probes (e.g. an exp overflow while line searching) are
    // treated as infeasible rather than fatal.
    try {
      return sure_full(st, unpack_hyper(x, st.N, q));
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const LbfgsResult fit = lbfgs_minimize(obj, x0, options);

  SureFit out;
  out.hyper = unpack_hyper(fit.x, st.N, q);
  out.sure_value = fit.value;
  out.iterations = fit.iterations;
  out.converged = fit.converged;
  out.grad_norm = fit.grad_norm;
  out.evaluations = fit.evaluations;
  return out;
}

ShrinkageResult posterior_estimates(const SiteStats& st,
                                    const Hyperparams& h) {
  const int p = st.p();
  const int q = st.q;
  require(p > 0, Err::EmptyInput, "posterior_estimates: no sites");
  check_lambda(h.lambda, "posterior_estimates");
  require(h.nu > q + 1, Err::BadDof,
          "posterior_estimates: nu must exceed q + 1");
  require(h.psi.rows() == q && h.psi.cols() == q, Err::DimMismatch,
          "posterior_estimates: Psi must be q x q");
  const Vector mu_ve = ve_of_log(h.mu, st.N, "posterior_estimates");
  const Matrix psi = symmetrize(h.psi);
  const double n = st.n;
  const double denom_cov = h.nu + n - q - 2.0;

  ShrinkageResult out;
  out.means.resize(p);
  out.covs.resize(p);
  parallel_for(static_cast<std::size_t>(p), [&](std::size_t i) {
    const Vector blend =
        (n * st.xbar_log.row(i).transpose() + h.lambda * mu_ve) /
        (h.lambda + n);
    out.means[i] = sym_exp(ve_inv(blend));
    out.covs[i] = symmetrize((psi + st.scatter[i]) / denom_cov);
  });
  out.hyper = h;
  out.sure_value = st.n >= 3 ? sure_full(st, h) : 0.0;
  out.iterations = 0;
  out.converged = true;
  return out;
}

std::pair<double, double> loss_le(const ShrinkageResult& result,
                                  const GroundTruth& truth) {
  require(!result.means.empty(), Err::EmptyInput, "loss_le: no estimates");
  require(result.means.size() == truth.means.size(), Err::DimMismatch,
          "loss_le: mean counts disagree");
  const int p = static_cast<int>(result.means.size());
  std::vector<double> m_terms(p);
  parallel_for(static_cast<std::size_t>(p), [&](std::size_t i) {
    const double d = dist_le(result.means[i], truth.means[i]);
    m_terms[i] = d * d;
  });
  const double l_mean = kernels::sum(m_terms.data(), p) / p;

  double l_cov = 0.0;
  if (!result.covs.empty()) {
    require(result.covs.size() == truth.covs.size(), Err::DimMismatch,
            "loss_le: covariance counts disagree");
    std::vector<double> c_terms(p);
    for (int i = 0; i < p; ++i) {
      c_terms[i] = (result.covs[i] - truth.covs[i]).squaredNorm();
    }
    l_cov = kernels::sum(c_terms.data(), p) / p;
  }
  return {l_mean, l_cov};
}

}  // namespace spdshrink
