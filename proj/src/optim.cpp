#include "spdshrink/optim.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include "spdshrink/errors.hpp"

namespace spdshrink {

namespace {

constexpr double kC1 = 1e-4;  // Armijo (sufficient decrease)
constexpr double kC2 = 0.9;   // curvature
constexpr int kMaxLineTrials = 25;
constexpr long long kMaxEvaluations = 200000;

struct Probe {
  double alpha = 0.0;
  double value = 0.0;
  double slope = 0.0;  // directional derivative g(x + alpha d) . d
  Vector grad;
};

class Driver {
 public:
  Driver(const Objective& f, double fd_step) : f_(f), fd_step_(fd_step) {}

  double value(const Vector& x) {
    ++evaluations_;
    return f_(x);
  }

  Vector gradient(const Vector& x) {
    const int dim = static_cast<int>(x.size());
    Vector g(dim);
    Vector probe = x;
    for (int j = 0; j < dim; ++j) {
      const double h = fd_step_ * (1.0 + std::fabs(x[j]));
      const double orig = probe[j];
      probe[j] = orig + h;
      const double fp = value(probe);
      probe[j] = orig - h;
      const double fm = value(probe);
      probe[j] = orig;
      g[j] = (fp - fm) / (2.0 * h);
    }
    return g;
  }

  long long evaluations() const { return evaluations_; }
  bool budget_left() const { return evaluations_ < kMaxEvaluations; }

 private:
  const Objective& f_;
  double fd_step_;
  long long evaluations_ = 0;
};

double cubic_step(double a_lo, double f_lo, double d_lo, double a_hi,
                  double f_hi, double d_hi) {
  // Minimizer of the cubic interpolant; falls back to bisection when the
  // formula is undefined or lands too close to the interval ends.
  const double d1 = d_lo + d_hi - 3.0 * (f_lo - f_hi) / (a_lo - a_hi);
  const double disc = d1 * d1 - d_lo * d_hi;
  const double mid = 0.5 * (a_lo + a_hi);
  if (disc < 0.0) return mid;
  const double d2 = std::copysign(std::sqrt(disc), a_hi - a_lo);
  const double t =
      a_hi - (a_hi - a_lo) * (d_hi + d2 - d1) / (d_hi - d_lo + 2.0 * d2);
  if (!std::isfinite(t)) return mid;
  const double lo = std::min(a_lo, a_hi);
  const double hi = std::max(a_lo, a_hi);
  const double margin = 0.1 * (hi - lo);
  if (t < lo + margin || t > hi - margin) return mid;
  return t;
}

}  // namespace

Vector fd_gradient(const Objective& f, const Vector& x, double fd_step) {
  Driver driver(f, fd_step);
  return driver.gradient(x);
}

LbfgsResult lbfgs_minimize(const Objective& f, const Vector& x0,
                           const LbfgsOptions& options) {
  Driver driver(f, options.fd_step);
  LbfgsResult result;
  result.x = x0;
  result.value = driver.value(x0);
  require(std::isfinite(result.value), Err::OptFailed,
          "lbfgs_minimize: objective not finite at the start point");

  Vector x = x0;
  double fx = result.value;
  Vector g = driver.gradient(x);

  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;

  const auto finish = [&](bool converged) {
    result.x = x;
    result.value = fx;
    result.converged = converged;
    result.grad_norm = g.norm();
    result.evaluations = driver.evaluations();
    return result;
  };

  if (g.norm() <= options.grad_tol) return finish(true);

  // Evaluates objective and directional slope at x + alpha d.
  const auto probe_at = [&](double alpha, const Vector& d) {
    Probe p;
    p.alpha = alpha;
    const Vector xt = x + alpha * d;
    p.value = driver.value(xt);
    if (std::isfinite(p.value)) {
      p.grad = driver.gradient(xt);
      p.slope = p.grad.dot(d);
    } else {
      p.value = std::numeric_limits<double>::infinity();
      p.slope = 0.0;
    }
    return p;
  };

  for (int iter = 0; iter < options.max_iters; ++iter) {
    if (!driver.budget_left()) return finish(false);

    // Two-loop recursion for the search direction.
    Vector d = -g;
    const int hist = static_cast<int>(s_hist.size());
    std::vector<double> alpha_coef(hist);
    for (int i = hist - 1; i >= 0; --i) {
      alpha_coef[i] = rho_hist[i] * s_hist[i].dot(d);
      d -= alpha_coef[i] * y_hist[i];
    }
    if (hist > 0) {
      const double gamma =
          s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      d *= gamma;
    }
    for (int i = 0; i < hist; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(d);
      d += (alpha_coef[i] - beta) * s_hist[i];
    }

    double d0 = g.dot(d);
    if (d0 >= 0.0) {  // not a descent direction; restart from steepest descent
      d = -g;
      d0 = g.dot(d);
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    // Strong Wolfe line search (bracket then zoom with cubic interpolation).
    Probe accepted;
    bool have_accepted = false;
    double alpha = (iter == 0) ? std::min(1.0, 1.0 / std::max(1.0, g.norm()))
                               : 1.0;
    double alpha_prev = 0.0;
    double f_prev = fx;
    double slope_prev = d0;
    Probe lo_probe;  // endpoint of the zoom interval with the lower value
    Probe hi_probe;
    bool bracketed = false;
    for (int trial = 0; trial < kMaxLineTrials; ++trial) {
      Probe p = probe_at(alpha, d);
      if (p.value > fx + kC1 * alpha * d0 || (trial > 0 && p.value >= f_prev)) {
        lo_probe = Probe{alpha_prev, f_prev, slope_prev, {}};
        hi_probe = p;
        bracketed = true;
        break;
      }
      if (std::fabs(p.slope) <= -kC2 * d0) {
        accepted = p;
        have_accepted = true;
        break;
      }
      if (p.slope >= 0.0) {
        lo_probe = p;
        hi_probe = Probe{alpha_prev, f_prev, slope_prev, {}};
        bracketed = true;
        break;
      }
      alpha_prev = alpha;
      f_prev = p.value;
      slope_prev = p.slope;
      alpha *= 2.0;
      if (alpha > 1e6) break;
    }
    if (bracketed && !have_accepted) {
      for (int trial = 0; trial < kMaxLineTrials; ++trial) {
        const double a = cubic_step(lo_probe.alpha, lo_probe.value,
                                    lo_probe.slope, hi_probe.alpha,
                                    hi_probe.value, hi_probe.slope);
        Probe p = probe_at(a, d);
        if (p.value > fx + kC1 * a * d0 || p.value >= lo_probe.value) {
          hi_probe = p;
        } else {
          if (std::fabs(p.slope) <= -kC2 * d0) {
            accepted = p;
            have_accepted = true;
            break;
          }
          if (p.slope * (hi_probe.alpha - lo_probe.alpha) >= 0.0) {
            hi_probe = lo_probe;
          }
          lo_probe = p;
        }
        if (std::fabs(hi_probe.alpha - lo_probe.alpha) <
            1e-12 * std::max(1.0, std::fabs(hi_probe.alpha))) {
          break;
        }
      }
      // Fall back to the better interval endpoint when no Wolfe point was
      // found but it still improves the objective.
      if (!have_accepted && lo_probe.alpha > 0.0 && lo_probe.value < fx &&
          lo_probe.grad.size() == x.size()) {
        accepted = lo_probe;
        have_accepted = true;
      }
    }
    if (!have_accepted) return finish(false);

    const Vector x_new = x + accepted.alpha * d;
    const Vector s = x_new - x;
    const Vector y = accepted.grad - g;
    x = x_new;
    fx = accepted.value;
    g = accepted.grad;
    result.iterations = iter + 1;

    if (g.norm() <= options.grad_tol) return finish(true);

    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > options.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
  }
  return finish(false);
}

}  // namespace spdshrink
