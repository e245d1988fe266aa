#pragma once

#include <functional>
#include <limits>

#include "choreeq/instance.hpp"

namespace choreeq {

// Accelerated projected gradient (FISTA with backtracking and adaptive
// restart) over a convex set given by a projection callback. Shared by the
// nearest-point programs, the feasibility subproblems, and the verification
// minimizations.

struct ApgOptions {
  long max_iters = 200000;
  // Stop when the gradient-mapping norm L*||x - P(x - g/L)|| drops below
  // this (absolute).
  double gm_tol = 1e-12;
  // Optional Frank-Wolfe gap stop (requires a linear minimization oracle);
  // negative disables.
  double gap_tol = -1.0;
  // Initial curvature estimate (backtracking doubles it as needed).
  double initial_curvature = 1.0;
  // Stop when the best value improves by less than
  // stagnation_eps*(1+|best|) over stagnation_window iterations.
  double stagnation_eps = 1e-16;
  long stagnation_window = 4000;
  long check_interval = 25;
};

struct ApgResult {
  Mat x;
  double value = 0.0;
  long iters = 0;
  bool converged = false;
  double achieved_gm = std::numeric_limits<double>::quiet_NaN();
  double achieved_gap = std::numeric_limits<double>::quiet_NaN();
};

using ValueFn = std::function<double(const Mat&)>;
using GradFn = std::function<Mat(const Mat&)>;
using ProjectFn = std::function<void(Mat&)>;
// argmin_{w in X} <g, w>; enables duality-gap certificates.
using LinMinFn = std::function<Mat(const Mat&)>;

ApgResult apg_minimize(const ValueFn& value, const GradFn& grad, const ProjectFn& project,
                       Mat x0, const ApgOptions& opts, const LinMinFn& linmin = nullptr);

}  // namespace choreeq
