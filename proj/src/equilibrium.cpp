#include "choreeq/equilibrium.hpp"

#include <cmath>
#include <limits>

#include "choreeq/apg.hpp"
#include "choreeq/errors.hpp"
#include "choreeq/geometry.hpp"
#include "choreeq/logging.hpp"
#include "choreeq/projection.hpp"

namespace choreeq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// A certificate can measure epsilon below what double arithmetic in the
// allocation and prices actually delivers. Claims are floored here so the
// independent verifier, run at the claimed epsilon, confirms them.
constexpr double kEpsilonClaimFloor = 1e-7;

ProfileMap profile_map_from_matrix(const Mat& D) {
  std::vector<DisutilityOracle> oracles;
  oracles.reserve(D.rows());
  for (int i = 0; i < D.rows(); ++i) {
    oracles.emplace_back(DisutilitySpec::linear(D.row(i).transpose()));
  }
  return ProfileMap(std::move(oracles));
}

// Smallest eps >= 0 making (1 - eps) * lhs <= rhs hold; +inf if none does.
double eps_residual(double lhs, double rhs) {
  constexpr double tiny = 1e-12;
  if (lhs > tiny) return std::max(0.0, 1.0 - rhs / lhs);
  if (lhs >= -tiny) return rhs >= -tiny ? 0.0 : kInf;
  // Negative left side: the multiplicative relaxation no longer widens with
  // eps, so only the exact comparison is meaningful.
  log::warn("verify: negative quantity in a multiplicative condition");
  return rhs >= lhs - tiny ? 0.0 : kInf;
}

// Cheapest linear disutility subject to earning `budget`, by the dual of
// min <c,y> s.t. <p,y> >= budget, y >= 0: the multiplier interval
// [lo, hi] = {mu >= 0 : mu p_j <= c_j for all j}.
double linear_budget_optimum(const Vec& c, const Vec& p, double budget) {
  const double p_scale = p.cwiseAbs().maxCoeff();
  const double p_tol = 1e-14 * std::max(1.0, p_scale);
  double lo = 0.0;
  double hi = kInf;
  for (int j = 0; j < p.size(); ++j) {
    if (p[j] > p_tol) {
      hi = std::min(hi, c[j] / p[j]);
    } else if (p[j] < -p_tol) {
      if (c[j] < 0.0) lo = std::max(lo, c[j] / p[j]);
    } else if (c[j] < -p_tol) {
      return -kInf;  // free disutility reduction at zero price
    }
  }
  if (lo > hi * (1.0 + 1e-12) + 1e-300) return -kInf;
  double mu = budget >= 0.0 ? hi : lo;
  if (std::isinf(mu)) return budget > 0.0 ? kInf : 0.0;
  return budget * mu;
}

// Minimum of a CES disutility over { y >= 0, <p, y> = 1 }, restricted to
// strictly positive prices; mass on zero-price chores never helps because
// the disutility is nondecreasing.
double ces_price_simplex_minimum(const DisutilityOracle& oracle, const Vec& p) {
  const int m = static_cast<int>(p.size());
  const double p_scale = p.cwiseAbs().maxCoeff();
  const double p_tol = 1e-14 * std::max(1.0, p_scale);
  std::vector<int> support;
  for (int j = 0; j < m; ++j) {
    if (p[j] > p_tol) support.push_back(j);
  }
  if (support.empty()) return kInf;
  const int k = static_cast<int>(support.size());
  Vec p_sub(k);
  for (int s = 0; s < k; ++s) p_sub[s] = p[support[s]];

  auto scatter = [&](const Mat& z) {
    Vec y = Vec::Zero(m);
    for (int s = 0; s < k; ++s) y[support[s]] = std::max(z(s, 0), 0.0);
    return y;
  };
  ValueFn value = [&](const Mat& z) { return oracle.value(scatter(z)); };
  GradFn grad = [&](const Mat& z) {
    Vec g_full = oracle.gradient_safe(scatter(z));
    Mat g(k, 1);
    for (int s = 0; s < k; ++s) g(s, 0) = g_full[support[s]];
    return g;
  };
  ProjectFn project = [&](Mat& z) {
    Vec col = z.col(0);
    z.col(0) = project_weighted_simplex(col, p_sub, 1.0);
  };

  Mat z0(k, 1);
  for (int s = 0; s < k; ++s) z0(s, 0) = 1.0 / (k * p_sub[s]);

  ApgOptions opts;
  opts.max_iters = 200000;
  opts.gm_tol = 1e-11;
  opts.check_interval = 10;
  ApgResult res = apg_minimize(value, grad, project, z0, opts);
  return value(res.x);
}

double hinge_sq(const Vec& profile, const Vec& target) {
  double s = 0.0;
  for (int i = 0; i < profile.size(); ++i) {
    double v = std::max(profile[i] - target[i], 0.0);
    s += v * v;
  }
  return s;
}

// min over x in F of ||max(D(x) - target, 0)||, warm-startable so the
// Pareto bisection can reuse iterates across nearby targets.
double profile_feasibility_gap(const ProfileMap& pm, const Vec& target, Mat& warm) {
  const int n = pm.n();
  ValueFn value = [&](const Mat& z) { return hinge_sq(pm.profile(z), target); };
  GradFn grad = [&](const Mat& z) {
    Vec prof = pm.profile(z);
    Mat g = Mat::Zero(z.rows(), z.cols());
    for (int i = 0; i < n; ++i) {
      double h = prof[i] - target[i];
      if (h > 0.0) g.row(i) = 2.0 * h * pm.oracle(i).gradient_safe(z.row(i).transpose()).transpose();
    }
    return g;
  };
  ProjectFn project = [&](Mat& z) { project_columns_simplex(z); };

  ApgOptions opts;
  opts.max_iters = 150000;
  opts.gm_tol = 1e-11 * (1.0 + target.cwiseAbs().maxCoeff());
  ApgResult res = apg_minimize(value, grad, project, warm, opts);
  warm = res.x;
  return std::sqrt(std::max(res.value, 0.0));
}

}  // namespace

double optimal_bundle_disutility(const DisutilityOracle& oracle, const Vec& p, double budget) {
  if (oracle.m() != p.size()) throw DimensionMismatch("price vector length mismatch");
  if (oracle.is_linear()) return linear_budget_optimum(oracle.spec().coeffs, p, budget);
  if (budget <= 0.0) return 0.0;
  double unit = ces_price_simplex_minimum(oracle, p);
  return std::isinf(unit) ? kInf : budget * unit;
}

VerifyReport verify_ceei(const ProfileMap& pm, const Mat& x, const Vec& p, double epsilon,
                         const std::optional<Vec>& weights) {
  const int n = pm.n();
  const int m = pm.m();
  if (x.rows() != n || x.cols() != m || p.size() != m) {
    throw DimensionMismatch("allocation/price dimensions do not match the instance");
  }
  if (p.cwiseAbs().maxCoeff() <= 0.0) throw ZeroPrices("all prices are zero");
  Vec eta = Vec::Ones(n);
  if (weights) {
    if (weights->size() != n) throw DimensionMismatch("weights length mismatch");
    eta = *weights;
  }

  VerifyReport rep;
  rep.earnings = x * p;
  rep.optimal_bundle = Vec(n);

  // Condition (1): weighted earnings within a (1 - eps) factor of each other.
  double worst_income = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      worst_income =
          std::max(worst_income, eps_residual(rep.earnings[i] / eta[i], rep.earnings[j] / eta[j]));
    }
  }
  rep.residuals.income_ratio_worst = worst_income;

  // Condition (2): no cheaper bundle earns as much.
  double worst_bundle = 0.0;
  for (int i = 0; i < n; ++i) {
    double d_i = pm.oracle(i).value(x.row(i).transpose());
    double opt = optimal_bundle_disutility(pm.oracle(i), p, rep.earnings[i]);
    rep.optimal_bundle[i] = opt;
    worst_bundle = std::max(worst_bundle, eps_residual(d_i, opt));
  }
  rep.residuals.optimal_bundle_worst = worst_bundle;

  // Condition (3): every chore completed within a (1 +- eps) margin.
  double worst_col = 0.0;
  for (int j = 0; j < m; ++j) {
    worst_col = std::max(worst_col, std::abs(x.col(j).sum() - 1.0));
  }
  rep.residuals.feasibility_worst = worst_col;

  constexpr double slack = 1e-12;
  rep.cond_income = rep.residuals.income_ratio_worst <= epsilon + slack;
  rep.cond_bundle = rep.residuals.optimal_bundle_worst <= epsilon + slack;
  rep.cond_feasible = rep.residuals.feasibility_worst <= epsilon + slack;
  rep.pass = rep.cond_income && rep.cond_bundle && rep.cond_feasible;
  return rep;
}

VerifyReport verify_ceei(const Instance& inst, const Mat& x, const Vec& p, double epsilon,
                         const std::optional<Vec>& weights) {
  return verify_ceei(make_profile_map(inst), x, p, epsilon, weights);
}

EquilibriumCertificate from_kkt_linear(const Mat& D, const KktCertificate& cert,
                                       const SupportMask* mask) {
  const int n = static_cast<int>(D.rows());
  const int m = static_cast<int>(D.cols());
  if (cert.a.size() != n || cert.d.size() != n) {
    throw DimensionMismatch("certificate does not match the coefficient matrix");
  }

  Vec p(m);
  for (int j = 0; j < m; ++j) {
    double best = kInf;
    for (int i = 0; i < n; ++i) {
      if (mask && !(*mask)[j].empty() && !(*mask)[j][i]) continue;
      best = std::min(best, cert.a[i] * D(i, j));
    }
    if (std::isinf(best)) throw ZeroColumn("every agent masked out of a chore");
    p[j] = best;
  }

  // Realize the certificate profile exactly on exact column sums. The
  // certificate allocation is already within numerical noise of both
  // constraint families, so alternation converges immediately; a fresh
  // projection run backs it up if the input is badly off.
  Mat x = cert.x;
  auto system_residual = [&](const Mat& z) {
    double r = 0.0;
    for (int j = 0; j < m; ++j) r = std::max(r, std::abs(z.col(j).sum() - 1.0));
    Vec prof = D.cwiseProduct(z).rowwise().sum();
    for (int i = 0; i < n; ++i) {
      r = std::max(r, std::abs(prof[i] - cert.d[i]) / (1.0 + std::abs(cert.d[i])));
    }
    return r;
  };

  if (system_residual(x) > 1e-4) {
    QpOptions qp;
    qp.tol = 1e-13;
    qp.warm_start = x;
    qp.mask = mask;
    qp.rescale_rows = mask == nullptr;
    x = nearest_point_linear(D, cert.d, qp).x_star;
  }
  for (int round = 0; round < 8 && system_residual(x) > 1e-12; ++round) {
    Vec prof = D.cwiseProduct(x).rowwise().sum();
    for (int i = 0; i < n; ++i) {
      if (prof[i] > 0.0 && cert.d[i] > 0.0) x.row(i) *= cert.d[i] / prof[i];
    }
    for (int j = 0; j < m; ++j) {
      double s = x.col(j).sum();
      if (s > 0.0) x.col(j) /= s;
    }
  }
  // The alternation's fixed point carries ~1e-9 double noise on larger
  // instances; anything an order below the claim floor is a faithful
  // realization.
  double resid = system_residual(x);
  if (resid > 1e-8) {
    throw InfeasibleRecovery("could not realize the certificate profile on exact column sums");
  }

  EquilibriumCertificate eq;
  eq.x = x;
  eq.p = p;
  eq.mode = EqMode::kLinearStrong;
  eq.epsilon = std::max(2.0 * (cert.gamma - 1.0), kEpsilonClaimFloor);
  eq.weights = cert.weights.size() == n ? cert.weights : Vec(Vec::Ones(n));
  VerifyReport rep = verify_ceei(profile_map_from_matrix(D), x, p, eq.epsilon, eq.weights);
  eq.earnings = rep.earnings;
  eq.residuals = rep.residuals;
  return eq;
}

EquilibriumCertificate from_kkt_linear(const Instance& inst, const KktCertificate& cert) {
  return from_kkt_linear(inst.linear_matrix(), cert);
}

EquilibriumCertificate from_kkt_general(const ProfileMap& pm, const KktCertificate& cert) {
  const int n = pm.n();
  const int m = pm.m();
  if (cert.x.rows() != n || cert.x.cols() != m) {
    throw DimensionMismatch("certificate allocation does not match the instance");
  }

  // Prices come from the point where the half-space {<a, D(y)> >= min} is
  // tangent to the feasible region, not from the certificate allocation:
  // the weighted gradients there form a supporting hyperplane of the
  // allocation polytope, and its column minima are the payments.
  WeightedProfileMin tangent = min_weighted_profile_point(pm, cert.a);
  Vec p = Vec::Constant(m, kInf);
  for (int i = 0; i < n; ++i) {
    Vec g = pm.oracle(i).gradient_safe(tangent.x.row(i).transpose());
    for (int j = 0; j < m; ++j) p[j] = std::min(p[j], cert.a[i] * g[j]);
  }

  EquilibriumCertificate eq;
  eq.x = cert.x;
  eq.p = p;
  eq.mode = EqMode::kGeneral;
  eq.epsilon = std::max({3.0 * (cert.gamma - 1.0) + 5.0 * cert.delta,
                         cert.lambda - 1.0, kEpsilonClaimFloor});
  eq.weights = cert.weights.size() == n ? cert.weights : Vec(Vec::Ones(n));
  VerifyReport rep = verify_ceei(pm, eq.x, p, eq.epsilon, eq.weights);
  eq.earnings = rep.earnings;
  eq.residuals = rep.residuals;
  return eq;
}

Allocation ef_po_round(const ProfileMap& pm, const Mat& x) {
  const int m = static_cast<int>(x.cols());
  Vec sums = x.colwise().sum();
  double a_min = kInf;
  double a_max = 0.0;
  for (int j = 0; j < m; ++j) {
    if (!(sums[j] > 0.0)) throw ZeroColumn("cannot normalize a chore nobody performs");
    a_min = std::min(a_min, sums[j]);
    a_max = std::max(a_max, sums[j]);
  }
  Mat y = x;
  for (int j = 0; j < m; ++j) y.col(j) /= sums[j];

  bool monotone = true;
  for (int i = 0; i < pm.n(); ++i) {
    const auto& spec = pm.oracle(i).spec();
    if (spec.is_linear() && spec.coeffs.minCoeff() < 0.0) monotone = false;
  }
  if (monotone) {
    Vec before = pm.profile(x);
    Vec after = pm.profile(y);
    for (int i = 0; i < pm.n(); ++i) {
      double hi = before[i] / a_min;
      double lo = before[i] / a_max;
      if (after[i] > hi * (1.0 + 1e-9) + 1e-12 || after[i] < lo * (1.0 - 1e-9) - 1e-12) {
        throw ValidationError("column normalization moved a disutility outside its bracket");
      }
    }
  }
  return y;
}

EfReport check_ef(const ProfileMap& pm, const Mat& y, double epsilon) {
  const int n = pm.n();
  EfReport rep;
  double min_ratio = kInf;
  for (int i = 0; i < n; ++i) {
    double own = pm.oracle(i).value(y.row(i).transpose());
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      ++rep.pairs;
      double other = pm.oracle(i).value(y.row(j).transpose());
      if (own > 1e-300) {
        min_ratio = std::min(min_ratio, other / own);
      }
    }
  }
  rep.min_ratio = std::isinf(min_ratio) ? 1.0 : min_ratio;
  rep.pass = rep.min_ratio >= 1.0 - 4.0 * epsilon - 1e-12;
  return rep;
}

PoReport check_po(const ProfileMap& pm, const Mat& y, double epsilon) {
  const int n = pm.n();
  const int m = pm.m();
  Vec d = pm.profile(y);
  PoReport rep;
  rep.threshold = 1.0 - 2.0 * epsilon - 1e-9;

  Mat warm = Mat::Constant(n, m, 1.0 / n);
  const double feas_tol = 1e-8 * (1.0 + d.norm());
  auto feasible = [&](double t) {
    Vec target = t * d;
    return profile_feasibility_gap(pm, target, warm) <= feas_tol;
  };

  rep.pass = rep.threshold <= 0.0 || !feasible(rep.threshold);

  // Bisect the smallest dominated scaling for the report; y itself shows
  // t = 1 is always attainable.
  double lo = 0.0;
  double hi = 1.0;
  if (feasible(0.0)) {
    rep.t_star = 0.0;
    return rep;
  }
  for (int it = 0; it < 25 && hi - lo > 1e-6; ++it) {
    double mid = 0.5 * (lo + hi);
    if (feasible(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  rep.t_star = 0.5 * (lo + hi);
  return rep;
}

}  // namespace choreeq
