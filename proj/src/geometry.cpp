#include "choreeq/geometry.hpp"

#include <Eigen/QR>

#include <cmath>

#include "choreeq/apg.hpp"
#include "choreeq/errors.hpp"
#include "choreeq/logging.hpp"

namespace choreeq {

namespace {

bool allowed(const SupportMask* mask, int i, int j) {
  if (mask == nullptr) return true;
  const auto& col = (*mask)[j];
  return col.empty() || col[i];
}

// Complementarity residual of the column-simplex QP, normalized by the query
// scale: max over columns of max_i x_ij * (g_ij - min_i' g_i'j).
double qp_kkt_residual(const Mat& D, const Mat& x, const Vec& q, const SupportMask* mask) {
  const int n = static_cast<int>(D.rows());
  const int m = static_cast<int>(D.cols());
  Vec r(n);
  for (int i = 0; i < n; ++i) r[i] = D.row(i).dot(x.row(i)) - q[i];
  double worst = 0.0;
  for (int j = 0; j < m; ++j) {
    double nu = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (!allowed(mask, i, j)) continue;
      nu = std::min(nu, 2.0 * r[i] * D(i, j));
    }
    for (int i = 0; i < n; ++i) {
      if (!allowed(mask, i, j)) continue;
      worst = std::max(worst, x(i, j) * (2.0 * r[i] * D(i, j) - nu));
    }
  }
  return worst / (1.0 + q.squaredNorm());
}

// Finishes the QP combinatorially. On a fixed pattern of nonzero entries the
// problem is an equality-constrained least-squares system solved to machine
// precision; pattern changes follow the usual primal active-set pivot rules.
// The first-order loop above gets the pattern approximately right but leaves
// sqrt-of-tolerance mass on entries that should be exactly zero, which is
// what this pass removes. Downstream consumers rely on the sharpened
// complementarity: the exit hyperplane normal and the argmin support of the
// allocation both come straight from this solution.
void polish_active_set(const Mat& D, const Vec& q, const SupportMask* mask, Mat& x) {
  const int n = static_cast<int>(D.rows());
  const int m = static_cast<int>(D.cols());
  if (n * m > 900) return;

  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> clamped(n, m);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) {
      clamped(i, j) = !allowed(mask, i, j) || x(i, j) <= 1e-11;
    }
  }
  Mat cur = x;
  for (int j = 0; j < m; ++j) {
    bool any = false;
    for (int i = 0; i < n; ++i) any = any || !clamped(i, j);
    if (!any) {
      // never clamp a whole column; keep its heaviest admissible entry free
      int arg = -1;
      double best = -1.0;
      for (int i = 0; i < n; ++i) {
        if (allowed(mask, i, j) && x(i, j) > best) {
          best = x(i, j);
          arg = i;
        }
      }
      if (arg < 0) return;
      clamped(arg, j) = false;
    }
    for (int i = 0; i < n; ++i) {
      if (clamped(i, j)) cur(i, j) = 0.0;
    }
    double s = cur.col(j).sum();
    if (!(s > 0.0)) return;
    cur.col(j) /= s;
  }

  const double scale = (1.0 + q.cwiseAbs().maxCoeff()) * (1.0 + D.cwiseAbs().maxCoeff());
  const double dual_tol = 1e-11 * scale;
  const long pivot_cap = 8L * n * m + 32;

  for (long pivot = 0; pivot < pivot_cap; ++pivot) {
    Eigen::MatrixXi id = Eigen::MatrixXi::Constant(n, m, -1);
    int F = 0;
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < n; ++i) {
        if (!clamped(i, j)) id(i, j) = F++;
      }
    }

    // Stationarity rows tie each free entry's gradient to its column
    // multiplier; the last m rows are the exact column sums.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(F + m, F + m);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(F + m);
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < n; ++i) {
        if (clamped(i, j)) continue;
        int row = id(i, j);
        for (int j2 = 0; j2 < m; ++j2) {
          if (!clamped(i, j2)) A(row, id(i, j2)) = 2.0 * D(i, j) * D(i, j2);
        }
        A(row, F + j) = -1.0;
        rhs[row] = 2.0 * q[i] * D(i, j);
        A(F + j, row) = 1.0;
      }
      rhs[F + j] = 1.0;
    }
    Eigen::VectorXd sol = A.colPivHouseholderQr().solve(rhs);
    if (!sol.allFinite() || (A * sol - rhs).cwiseAbs().maxCoeff() > 1e-8 * scale) return;

    // Step toward the subproblem optimum, stopping at the first bound.
    double alpha = 1.0;
    int block_i = -1, block_j = -1;
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < n; ++i) {
        if (clamped(i, j)) continue;
        double target = sol[id(i, j)];
        if (target < -1e-13) {
          double denom = cur(i, j) - target;
          double a = denom > 0.0 ? cur(i, j) / denom : 0.0;
          if (a < alpha) {
            alpha = a;
            block_i = i;
            block_j = j;
          }
        }
      }
    }
    if (block_i >= 0) {
      for (int j = 0; j < m; ++j) {
        for (int i = 0; i < n; ++i) {
          if (!clamped(i, j)) cur(i, j) = (1.0 - alpha) * cur(i, j) + alpha * sol[id(i, j)];
        }
      }
      cur(block_i, block_j) = 0.0;
      clamped(block_i, block_j) = true;
      continue;
    }
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < n; ++i) {
        if (!clamped(i, j)) cur(i, j) = std::max(sol[id(i, j)], 0.0);
      }
    }

    // Dual feasibility over the clamped entries; release the worst violator.
    Vec r(n);
    for (int i = 0; i < n; ++i) r[i] = D.row(i).dot(cur.row(i)) - q[i];
    double worst = -dual_tol;
    int drop_i = -1, drop_j = -1;
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < n; ++i) {
        if (!clamped(i, j) || !allowed(mask, i, j)) continue;
        double v = 2.0 * r[i] * D(i, j) - sol[F + j];
        if (v < worst) {
          worst = v;
          drop_i = i;
          drop_j = j;
        }
      }
    }
    if (drop_i < 0) {
      x = cur;
      return;
    }
    clamped(drop_i, drop_j) = false;
  }
  // pivot cap reached: leave the first-order answer untouched
}

}  // namespace

NearestPointResult nearest_point_linear(const Mat& D, const Vec& query, const QpOptions& opts) {
  const int n = static_cast<int>(D.rows());
  const int m = static_cast<int>(D.cols());
  if (query.size() != n) throw DimensionMismatch("query length must match agent count");
  if (m == 0) throw ValidationError("nearest point requires at least one chore");

  // Curvature of ||D(x) - q||^2 is block diagonal per agent: 2 * D_i D_i^T.
  double curv = 0.0;
  for (int i = 0; i < n; ++i) {
    double sq = 0.0;
    for (int j = 0; j < m; ++j) {
      if (allowed(opts.mask, i, j)) sq += D(i, j) * D(i, j);
    }
    curv = std::max(curv, 2.0 * sq);
  }
  if (curv <= 0.0) throw ValidationError("all-zero coefficient matrix");
  const double step = 1.0 / curv;

  Mat x = opts.warm_start ? *opts.warm_start : Mat::Constant(n, m, 1.0 / n);
  project_columns_simplex(x, opts.mask);
  Mat y = x;
  double t = 1.0;
  double res = std::numeric_limits<double>::infinity();
  double best_obj = std::numeric_limits<double>::infinity();
  double window_best = best_obj;
  long it = 0;
  long checks = 0;

  auto objective = [&](const Mat& z) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      double r = D.row(i).dot(z.row(i)) - query[i];
      s += r * r;
    }
    return s;
  };

  for (; it < opts.max_iters; ++it) {
    Vec r(n);
    for (int i = 0; i < n; ++i) r[i] = D.row(i).dot(y.row(i)) - query[i];
    Mat g = 2.0 * r.asDiagonal() * D;
    Mat x_new = y - step * g;
    project_columns_simplex(x_new, opts.mask);

    double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    // Gradient-scheme restart.
    if (((y - x_new).array() * (x_new - x).array()).sum() > 0.0) {
      t_new = 1.0;
      y = x_new;
    } else {
      y = x_new + ((t - 1.0) / t_new) * (x_new - x);
    }
    x = x_new;
    t = t_new;

    if ((it + 1) % 32 == 0 || it + 1 == opts.max_iters) {
      res = qp_kkt_residual(D, x, query, opts.mask);
      if (res <= opts.tol) break;
      double obj = objective(x);
      best_obj = std::min(best_obj, obj);
      if (++checks % 128 == 0) {
        if (window_best - best_obj <= 1e-18 * (1.0 + std::abs(best_obj))) {
          // No further progress representable; accept if close to tolerance.
          if (res <= 100.0 * opts.tol) break;
          throw SolverStall("nearest-point QP stagnated at residual " + std::to_string(res));
        }
        window_best = best_obj;
      }
    }
  }
  if (it >= opts.max_iters) {
    res = qp_kkt_residual(D, x, query, opts.mask);
    if (res > 100.0 * opts.tol) {
      throw SolverStall("nearest-point QP hit iteration cap at residual " + std::to_string(res));
    }
  }

  polish_active_set(D, query, opts.mask, x);
  res = qp_kkt_residual(D, x, query, opts.mask);

  NearestPointResult out;
  out.query = query;
  out.tolerance_used = res;
  Vec d_cur(n);
  for (int i = 0; i < n; ++i) d_cur[i] = D.row(i).dot(x.row(i));
  Vec d_rep = d_cur.cwiseMax(query);
  if (opts.rescale_rows) {
    // Absorb tolerance-level slack: realize the repaired profile exactly by
    // scaling each agent's bundle up (stays within the relaxed region).
    for (int i = 0; i < n; ++i) {
      if (d_rep[i] > d_cur[i]) {
        if (d_cur[i] <= 0.0 || d_rep[i] - d_cur[i] > 1e-3 * (1.0 + d_rep[i])) {
          throw SolverStall("nearest-point repair needed more than tolerance-level rescaling");
        }
        x.row(i) *= d_rep[i] / d_cur[i];
      }
    }
  }
  out.x_star = x;
  out.d_star = d_rep;
  out.distance = (d_rep - query).norm();
  return out;
}

NearestPointResult nearest_point_linear(const Instance& inst, const Vec& query,
                                        const QpOptions& opts) {
  return nearest_point_linear(inst.linear_matrix(), query, opts);
}

NearestPointResult nearest_point_general(const ProfileMap& pm, const Vec& query, double eps1,
                                         const GeneralNpOptions& opts) {
  const int n = pm.n();
  const int m = pm.m();
  if (query.size() != n) throw DimensionMismatch("query length must match agent count");
  if (eps1 <= 0.0) throw ValidationError("eps1 must be positive");

  auto hinge = [&](const Mat& z) {
    Vec d = pm.profile(z);
    return (d - query).cwiseMax(0.0).eval();
  };
  auto value = [&](const Mat& z) { return hinge(z).squaredNorm(); };
  auto grad = [&](const Mat& z) {
    Vec h = hinge(z);
    Mat g = Mat::Zero(n, m);
    for (int i = 0; i < n; ++i) {
      if (h[i] > 0.0) {
        g.row(i) = 2.0 * h[i] * pm.oracle(i).gradient_safe(z.row(i).transpose()).transpose();
      }
    }
    return g;
  };
  auto project = [&](Mat& z) { project_columns_lower_box(z, kAllocBound); };
  auto linmin = [&](const Mat& g) {
    Mat w = Mat::Zero(n, m);
    for (int j = 0; j < m; ++j) {
      double filled = 0.0;
      int arg = 0;
      for (int i = 0; i < n; ++i) {
        if (g(i, j) < 0.0) {
          w(i, j) = kAllocBound;
          filled += kAllocBound;
        }
        if (g(i, j) < g(arg, j)) arg = i;
      }
      if (filled < 1.0) w(arg, j) = std::max(w(arg, j), 1.0);
    }
    return w;
  };

  Mat z0 = opts.warm_start ? *opts.warm_start : Mat::Constant(n, m, 1.0 / n);
  ApgOptions aopts;
  aopts.max_iters = opts.max_iters;
  aopts.gm_tol = 1e-13 * (1.0 + query.norm());
  aopts.gap_tol = std::max(0.25 * eps1 * eps1, opts.gap_floor * (1.0 + value(z0)));
  ApgResult sol = apg_minimize(value, grad, project, z0, aopts, linmin);
  double gap = std::isnan(sol.achieved_gap) ? sol.value : sol.achieved_gap;
  if (!sol.converged && gap > 1e-4 * (1.0 + query.squaredNorm())) {
    throw SolverStall("general nearest-point program stalled with duality gap " +
                      std::to_string(gap));
  }

  Mat z = sol.x;
  Vec beta = hinge(z);
  // Realize q + beta exactly: scale rows up (never down), replacing
  // near-empty rows by a uniform ray.
  for (int i = 0; i < n; ++i) {
    double target = query[i] + beta[i];
    double cur = pm.oracle(i).value(z.row(i).transpose());
    if (target <= cur) continue;
    if (cur <= 1e-300) {
      double unit = pm.oracle(i).value(Vec::Ones(m));
      z.row(i) = Vec::Constant(m, target / unit).transpose();
    } else {
      z.row(i) *= target / cur;
    }
  }

  // Snap to the eps1 grid when the quantum is representable at this scale;
  // restore column feasibility by rounding deficient columns up.
  const double h = std::ldexp(eps1, -20);
  double zmax = std::max(1.0, z.cwiseAbs().maxCoeff());
  if (h >= 1e-18 * zmax) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) {
        z(i, j) = std::max(0.0, std::round(z(i, j) / h) * h);
      }
    }
    for (int j = 0; j < m; ++j) {
      double s = z.col(j).sum();
      if (s < 1.0) {
        int arg = 0;
        z.col(j).maxCoeff(&arg);
        z(arg, j) += 1.0 - s;
      }
    }
  }

  NearestPointResult out;
  out.query = query;
  out.x_star = z;
  out.d_star = pm.profile(z);
  out.distance = (out.d_star - query).norm();
  out.tolerance_used = std::sqrt(std::max(gap, 0.0));
  return out;
}

NearestPointResult pareto_lift(const ProfileMap& pm, NearestPointResult result, double eps1) {
  const int n = pm.n();
  const double lift = 2.0 * pm.lipschitz() * eps1;
  if (lift > 0.0 && lift >= 1e-18 * std::max(1.0, result.x_star.cwiseAbs().maxCoeff())) {
    result.x_star.array() += lift;
  }
  Vec d = pm.profile(result.x_star);
  for (int i = 0; i < n; ++i) {
    double target = std::max(d[i], result.query[i]);
    if (target > d[i]) {
      double cur = d[i];
      if (cur <= 1e-300) {
        double unit = pm.oracle(i).value(Vec::Ones(pm.m()));
        result.x_star.row(i) = Vec::Constant(pm.m(), target / unit).transpose();
      } else {
        result.x_star.row(i) *= target / cur;
      }
    }
  }
  result.d_star = pm.profile(result.x_star).cwiseMax(result.query);
  result.distance = (result.d_star - result.query).norm();
  return result;
}

Hyperplane supporting_hyperplane(const Vec& query, const Vec& d_plus, double offset,
                                 double delta) {
  if (query.size() != d_plus.size()) throw DimensionMismatch("query/d_plus size mismatch");
  const double b = offset > 0.0 ? offset : static_cast<double>(query.size());
  Vec diff = d_plus - query;
  double denom = diff.dot(d_plus);
  if (!(denom > 0.0)) {
    throw DegenerateDirection("supporting hyperplane undefined: <d_plus - q, d_plus> <= 0");
  }
  Hyperplane h;
  h.normal = (b / denom) * diff;
  h.offset = b;
  h.delta = delta;
  h.zero_entry = (h.normal.array() <= 0.0).any();
  if (h.zero_entry) {
    log::warn("supporting hyperplane has a nonpositive normal entry");
  }
  return h;
}

Vec hyperplane_max_nsw(const Hyperplane& h, const std::optional<Vec>& weights) {
  const int n = static_cast<int>(h.normal.size());
  Vec eta = weights ? *weights : Vec::Ones(n);
  if (eta.size() != n) throw DimensionMismatch("weights length must match normal length");
  Vec d(n);
  for (int i = 0; i < n; ++i) {
    if (h.normal[i] <= 0.0) {
      throw DegenerateDirection("log objective unbounded over hyperplane with nonpositive normal");
    }
    d[i] = eta[i] / h.normal[i];
  }
  return d;
}

double membership_distance(const ProfileMap& pm, const Vec& query, double gm_tol,
                           const SupportMask* mask) {
  const int n = pm.n();
  const int m = pm.m();
  auto hinge = [&](const Mat& z) { return (pm.profile(z) - query).cwiseMax(0.0).eval(); };
  auto value = [&](const Mat& z) { return hinge(z).squaredNorm(); };
  auto grad = [&](const Mat& z) {
    Vec h = hinge(z);
    Mat g = Mat::Zero(n, m);
    for (int i = 0; i < n; ++i) {
      if (h[i] > 0.0) {
        g.row(i) = 2.0 * h[i] * pm.oracle(i).gradient_safe(z.row(i).transpose()).transpose();
      }
    }
    return g;
  };
  auto project = [mask](Mat& z) { project_columns_simplex(z, mask); };
  ApgOptions opts;
  opts.max_iters = 100000;
  opts.gm_tol = gm_tol;
  Mat z0 = Mat::Constant(n, m, 1.0 / n);
  project(z0);
  ApgResult sol = apg_minimize(value, grad, project, z0, opts);
  return std::sqrt(std::max(sol.value, 0.0));
}

double min_weighted_profile_linear(const Mat& D, const Vec& a, const SupportMask* mask) {
  const int n = static_cast<int>(D.rows());
  const int m = static_cast<int>(D.cols());
  if (a.size() != n) throw DimensionMismatch("normal length must match agent count");
  double total = 0.0;
  for (int j = 0; j < m; ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (!allowed(mask, i, j)) continue;
      best = std::min(best, a[i] * D(i, j));
    }
    if (!std::isfinite(best)) throw ZeroColumn("column with empty support");
    total += best;
  }
  return total;
}

WeightedProfileMin min_weighted_profile_point(const ProfileMap& pm, const Vec& a,
                                              const SupportMask* mask) {
  const int n = pm.n();
  const int m = pm.m();
  if (a.size() != n) throw DimensionMismatch("normal length must match agent count");
  WeightedProfileMin out;
  if (pm.all_linear()) {
    const Mat D = pm.linear_matrix();
    out.x = Mat::Zero(n, m);
    out.value = 0.0;
    for (int j = 0; j < m; ++j) {
      double best = std::numeric_limits<double>::infinity();
      int arg = -1;
      for (int i = 0; i < n; ++i) {
        if (!allowed(mask, i, j)) continue;
        double v = a[i] * D(i, j);
        if (v < best) {
          best = v;
          arg = i;
        }
      }
      if (arg < 0) throw ZeroColumn("column with empty support");
      out.x(arg, j) = 1.0;
      out.value += best;
    }
    return out;
  }
  auto value = [&](const Mat& z) { return a.dot(pm.profile(z)); };
  auto grad = [&](const Mat& z) {
    Mat g(n, m);
    for (int i = 0; i < n; ++i) {
      g.row(i) = a[i] * pm.oracle(i).gradient_safe(z.row(i).transpose()).transpose();
    }
    return g;
  };
  auto project = [mask](Mat& z) { project_columns_simplex(z, mask); };
  ApgOptions opts;
  opts.max_iters = 150000;
  opts.gm_tol = 1e-11 * (1.0 + a.norm());
  ApgResult sol = apg_minimize(value, grad, project, Mat::Constant(n, m, 1.0 / n), opts);
  out.value = sol.value;
  out.x = sol.x;
  return out;
}

double min_weighted_profile(const ProfileMap& pm, const Vec& a, const SupportMask* mask) {
  if (pm.all_linear()) return min_weighted_profile_linear(pm.linear_matrix(), a, mask);
  return min_weighted_profile_point(pm, a, mask).value;
}

}  // namespace choreeq
