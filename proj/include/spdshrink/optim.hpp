#pragma once

#include <functional>

#include "spdshrink/geometry.hpp"

// Limited-memory BFGS for smooth unconstrained minimization with gradients
// approximated by central differences.  Used by the risk-criterion fitter;
// kept generic so tests can exercise it on classical benchmark functions.

namespace spdshrink {

struct LbfgsOptions {
  int max_iters = 200;      // accepted quasi-Newton steps
  double grad_tol = 1e-6;   // stop when ||grad||_2 <= grad_tol
  int memory = 8;           // (s, y) pair history
  double fd_step = 1e-6;    // central difference step scale: h_j = fd_step*(1+|x_j|)
};

struct LbfgsResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  double grad_norm = 0.0;
  long long evaluations = 0;  // objective calls, including gradient stencils
};

using Objective = std::function<double(const Vector&)>;

// Central-difference gradient of f at x (2 * dim evaluations).
Vector fd_gradient(const Objective& f, const Vector& x, double fd_step);

// Minimizes f from x0.  Throws OptFailed when the objective is not finite at
// the start point.  A line-search breakdown terminates the loop and reports
// converged = false with the best point found.
LbfgsResult lbfgs_minimize(const Objective& f, const Vector& x0,
                           const LbfgsOptions& options = {});

}  // namespace spdshrink
