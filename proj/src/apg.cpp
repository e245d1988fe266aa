#include "choreeq/apg.hpp"

#include <cmath>

namespace choreeq {

ApgResult apg_minimize(const ValueFn& value, const GradFn& grad, const ProjectFn& project,
                       Mat x0, const ApgOptions& opts, const LinMinFn& linmin) {
  project(x0);
  Mat x = x0;
  Mat x_prev = x;
  Mat y = x;
  double fx = value(x);
  double best = fx;
  double best_at_window_start = fx;
  double L = std::max(opts.initial_curvature, 1e-12);
  double t = 1.0;

  ApgResult res;
  res.x = x;
  res.value = fx;

  for (long k = 0; k < opts.max_iters; ++k) {
    Mat g = grad(y);
    double fy = value(y);

    // Backtracking on the quadratic upper model.
    Mat x_new;
    double fx_new = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      x_new = y - g / L;
      project(x_new);
      fx_new = value(x_new);
      Mat diff = x_new - y;
      double quad = fy + (g.array() * diff.array()).sum() + 0.5 * L * diff.squaredNorm();
      if (fx_new <= quad + 1e-15 * (1.0 + std::abs(quad))) break;
      L *= 2.0;
    }

    double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if (fx_new > fx) {
      // Function restart: drop momentum.
      y = x_new;
      t_new = 1.0;
    } else {
      // Keep the extrapolated point inside the constraint set: value and
      // gradient callbacks are entitled to assume feasible (nonnegative)
      // arguments.
      y = x_new + ((t - 1.0) / t_new) * (x_new - x);
      project(y);
    }
    x_prev = x;
    x = x_new;
    fx = fx_new;
    t = t_new;
    L *= 0.97;  // allow the step to grow back after conservative backtracks
    if (fx < best) best = fx;

    bool last = (k + 1 == opts.max_iters);
    if ((k + 1) % opts.check_interval == 0 || last) {
      Mat gx = grad(x);
      Mat xp = x - gx / L;
      project(xp);
      double gm = L * (x - xp).norm();
      res.achieved_gm = gm;
      bool stop = gm <= opts.gm_tol;
      if (linmin && opts.gap_tol >= 0.0) {
        Mat w = linmin(gx);
        double gap = (gx.array() * (x - w).array()).sum();
        res.achieved_gap = gap;
        stop = stop || gap <= opts.gap_tol;
      }
      if (stop) {
        res.x = x;
        res.value = fx;
        res.iters = k + 1;
        res.converged = true;
        return res;
      }
      // Stagnation: no meaningful progress over the window.
      if ((k + 1) % opts.stagnation_window == 0) {
        if (best_at_window_start - best <= opts.stagnation_eps * (1.0 + std::abs(best))) {
          res.x = x;
          res.value = fx;
          res.iters = k + 1;
          res.converged = false;
          return res;
        }
        best_at_window_start = best;
      }
    }
  }
  res.x = x;
  res.value = fx;
  res.iters = opts.max_iters;
  res.converged = false;
  return res;
}

}  // namespace choreeq
