#include "choreeq/solver.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "choreeq/errors.hpp"
#include "choreeq/logging.hpp"

namespace choreeq {

namespace {

constexpr double kRoundQuantum = 1e-12;  // 12 decimal digits

// Rounds the iterate down onto the fixed-precision grid; keeps coordinates
// already below the grid untouched so strict positivity survives.
Vec round_down_iterate(const Vec& d) {
  Vec out(d.size());
  for (int i = 0; i < d.size(); ++i) {
    double r = std::floor(d[i] / kRoundQuantum) * kRoundQuantum;
    out[i] = r > 0.0 ? r : d[i];
  }
  return out;
}

Vec resolve_weights(const SolverParams& p, int n) {
  if (!p.weights) return Vec::Ones(n);
  if (p.weights->size() != n) throw DimensionMismatch("weights length must match agent count");
  for (int i = 0; i < n; ++i) {
    if (!((*p.weights)[i] > 0.0)) throw NonpositiveEntry("weights must be strictly positive");
  }
  return *p.weights;
}

double measured_gamma(const Vec& a, const Vec& d, const Vec& eta) {
  double g = 1.0;
  for (int i = 0; i < a.size(); ++i) {
    double prod = a[i] * d[i] / eta[i];
    if (!(prod > 0.0)) throw NonpositiveEntry("certificate has nonpositive a_i * d_i");
    g = std::max(g, std::max(prod, 1.0 / prod));
  }
  return g;
}

double measured_lambda(const Mat& x) {
  double lam = 1.0;
  for (int j = 0; j < x.cols(); ++j) {
    double s = x.col(j).sum();
    if (!(s > 0.0)) throw ZeroColumn("certificate allocation has an empty column");
    lam = std::max(lam, std::max(s, 1.0 / s));
  }
  return lam;
}

}  // namespace

SolverParams derive_params(double epsilon, int n, int m, double L) {
  if (!(epsilon > 0.0) || epsilon >= 1.0) throw ValidationError("epsilon must lie in (0, 1)");
  SolverParams p;
  p.epsilon = epsilon;
  p.eps3 = epsilon;
  const double n4 = std::pow(double(n), 4);
  const double m4 = std::pow(double(m), 4);
  const double L3 = L * L * L;
  const double L6 = L3 * L3;
  double eps1 = epsilon * 1e-6 / (n4 * m4 * L6);
  double eps2 = n4 * std::pow(double(m), 3) * L3 * std::pow(eps1, 1.0 / 6.0);
  eps2 = std::min(eps2, 0.1 * p.eps3 * (1.0 - 1e-9));
  eps1 = std::min(eps1, eps2 * eps2 * eps2 / (48.0 * std::pow(double(n), 7) * m * L6));
  p.eps1 = std::max(eps1, 1e-300);
  p.eps2 = eps2;
  return p;
}

std::string trace_to_csv(const std::vector<TraceRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "iter,potential,dist_to_feasible,logd_step,branch\n";
  for (const auto& r : rows) {
    os << r.iter << ',' << r.potential << ',' << r.dist_to_feasible << ',';
    if (std::isfinite(r.logd_step)) os << r.logd_step;
    os << ',' << r.branch << '\n';
  }
  return os.str();
}

double log_nsw(const Vec& d, const std::optional<Vec>& weights) {
  double s = 0.0;
  for (int i = 0; i < d.size(); ++i) {
    if (!(d[i] > 0.0)) throw NonpositiveEntry("log objective requires strictly positive profile");
    double w = weights ? (*weights)[i] : 1.0;
    s += w * std::log(d[i]);
  }
  return s;
}

double log_dist(const Vec& x, const Vec& y) {
  if (x.size() != y.size()) throw DimensionMismatch("logd arguments differ in length");
  double s = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
      throw NonpositiveEntry("logd requires strictly positive vectors");
    }
    s += std::abs(std::log(x[i] / y[i]));
  }
  return s;
}

Vec initial_point_linear(const Mat& D) {
  const int n = static_cast<int>(D.rows());
  const int m = static_cast<int>(D.cols());
  double min_c = D.minCoeff();
  if (!(min_c > 0.0)) {
    throw ValidationError("default linear start requires strictly positive coefficients");
  }
  return Vec::Constant(n, m * min_c / (2.0 * n));
}

Vec initial_point_linear(const Instance& inst) { return initial_point_linear(inst.linear_matrix()); }

std::pair<Mat, Vec> initial_point_general(const ProfileMap& pm) {
  const int n = pm.n();
  const int m = pm.m();
  const double L = pm.lipschitz();
  Mat x = Mat::Constant(n, m, 1.0 / (2.0 * n * m * L * L));
  Vec d = pm.profile(x);
  for (int i = 0; i < n; ++i) {
    if (!(d[i] > 0.0)) throw SolverStall("general start failed to produce a positive profile");
  }
  return {x, d};
}

long iteration_bound_linear(int n, int m, double epsilon, double min_coeff, double max_coeff) {
  double range = n * std::log(m * max_coeff) - n * std::log(m * min_coeff / (2.0 * n));
  return static_cast<long>(std::ceil(16.0 * n * n / (epsilon * epsilon) * range));
}

KktCertificate solve_kkt_linear(const Mat& D, const SolverParams& params) {
  const int n = static_cast<int>(D.rows());
  const Vec eta = resolve_weights(params, n);
  const double b = eta.sum();
  const double eps = params.eps3 > 0.0 ? params.eps3 : params.epsilon;
  if (!(eps > 0.0)) throw ValidationError("stopping tolerance must be positive");
  const SupportMask* mask = params.mask.empty() ? nullptr : &params.mask;

  Vec d = params.initial_d ? *params.initial_d : initial_point_linear(D);
  if (d.size() != n) throw DimensionMismatch("initial point has wrong length");

  KktCertificate cert;
  cert.b = b;
  cert.weights = eta;
  cert.epsilon_run = eps;

  std::optional<Vec> a_prev;
  std::optional<Mat> warm;

  for (long k = 0; k < params.max_iters; ++k) {
    d = round_down_iterate(d);

    QpOptions qp;
    qp.tol = params.qp_tol;
    qp.mask = mask;
    qp.warm_start = warm;
    qp.rescale_rows = mask == nullptr;
    NearestPointResult np = nearest_point_linear(D, d, qp);
    warm = np.x_star;

    double pot_d = log_nsw(d, eta);
    double pot_star = log_nsw(np.d_star, eta);
    cert.potential_trace.push_back(pot_d);
    cert.potential_trace.push_back(pot_star);

    TraceRow row;
    row.iter = k;
    row.potential = pot_d;
    row.dist_to_feasible = np.distance;

    const double near_thresh = std::max(1e-9 * (1.0 + d.norm()), 10.0 * np.tolerance_used);
    if (np.distance <= near_thresh) {
      // The iterate landed on the feasible boundary (flat-face case): it is
      // the log-welfare maximizer on the previous hyperplane, so that
      // hyperplane certifies it directly.
      if (!a_prev) {
        throw SolverStall("initial point is not strictly below the feasible region");
      }
      double support = a_prev->dot(d);
      if (std::abs(support - b) > 1e-6 * b) {
        throw SolverStall("near-feasible return lost the hyperplane identity");
      }
      row.branch = "stop_near";
      cert.trace.push_back(row);
      // Realize d exactly by scaling rows of the nearest-point allocation.
      Mat x = np.x_star;
      for (int i = 0; i < n; ++i) {
        if (np.d_star[i] > 0.0) x.row(i) *= d[i] / np.d_star[i];
      }
      cert.a = *a_prev;
      cert.d = d;
      cert.x = x;
      cert.iterations = k + 1;
      cert.stop_reason = "near_feasible";
      break;
    }

    Hyperplane h = supporting_hyperplane(d, np.d_star, b, 0.0);
    Vec d_next = hyperplane_max_nsw(h, eta);
    double step = log_dist(d_next, np.d_star);
    row.logd_step = step;

    if (step < eps) {
      row.branch = "stop_logd";
      cert.trace.push_back(row);
      cert.a = h.normal;
      cert.d = np.d_star;
      cert.x = np.x_star;
      cert.iterations = k + 1;
      cert.stop_reason = "logd";
      break;
    }

    row.branch = "continue";
    cert.trace.push_back(row);
    a_prev = h.normal;
    d = d_next;
  }

  if (cert.stop_reason.empty()) {
    throw IterationCapExceeded("linear exterior-point loop hit the iteration cap",
                               trace_to_csv(cert.trace));
  }

  cert.gamma = measured_gamma(cert.a, cert.d, eta);
  cert.lambda = measured_lambda(cert.x);
  cert.delta_analytic = 0.0;
  cert.delta = std::max(0.0, b - min_weighted_profile_linear(D, cert.a, mask));
  return cert;
}

KktCertificate solve_kkt_linear(const Instance& inst, const SolverParams& params) {
  return solve_kkt_linear(inst.linear_matrix(), params);
}

KktCertificate solve_kkt_general(const ProfileMap& pm, const SolverParams& params) {
  const int n = pm.n();
  const int m = pm.m();
  const Vec eta = resolve_weights(params, n);
  const double b = eta.sum();

  SolverParams p = params;
  if (p.eps1 <= 0.0 || p.eps2 <= 0.0 || p.eps3 <= 0.0) {
    SolverParams derived = derive_params(params.epsilon, n, m, pm.lipschitz());
    if (p.eps1 <= 0.0) p.eps1 = derived.eps1;
    if (p.eps2 <= 0.0) p.eps2 = derived.eps2;
    if (p.eps3 <= 0.0) p.eps3 = derived.eps3;
  }
  const double delta_analytic =
      9.0 * std::pow(double(n), 5) * m * std::pow(pm.lipschitz(), 3) * p.eps1 / (p.eps2 * p.eps2);

  Vec d;
  if (params.initial_d) {
    d = *params.initial_d;
  } else {
    d = initial_point_general(pm).second;
  }

  KktCertificate cert;
  cert.b = b;
  cert.weights = eta;
  cert.epsilon_run = p.eps3;

  std::optional<Vec> a_prev;
  std::optional<Mat> warm;

  for (long k = 0; k < p.max_iters; ++k) {
    d = round_down_iterate(d);

    GeneralNpOptions gopts;
    gopts.warm_start = warm;
    NearestPointResult np = nearest_point_general(pm, d, p.eps1, gopts);
    warm = np.x_star;
    np = pareto_lift(pm, std::move(np), p.eps1);

    double pot_d = log_nsw(d, eta);
    double pot_star = log_nsw(np.d_star, eta);
    cert.potential_trace.push_back(pot_d);
    cert.potential_trace.push_back(pot_star);

    TraceRow row;
    row.iter = k;
    row.potential = pot_d;
    row.dist_to_feasible = np.distance;

    const double eps2_eff = std::max(p.eps2, 10.0 * np.tolerance_used);
    if (np.distance <= eps2_eff) {
      if (k == 0) {
        throw SolverStall("early branch on the first iteration: start is not strictly below");
      }
      double support = a_prev->dot(d);
      if (std::abs(support - b) > 1e-6 * b) {
        throw SolverStall("near-feasible return lost the hyperplane identity");
      }
      row.branch = "stop_near";
      cert.trace.push_back(row);
      // Adjust coordinates: keep the previous hyperplane as the certifying
      // normal and return the realized nearest-point allocation; the eps2
      // gap between its profile and d lands in the measured gamma.
      cert.a = *a_prev;
      cert.d = np.d_star;
      cert.x = np.x_star;
      cert.iterations = k + 1;
      cert.stop_reason = "near_feasible";
      break;
    }

    Hyperplane h = supporting_hyperplane(d, np.d_star, b, delta_analytic);
    Vec d_next = hyperplane_max_nsw(h, eta);
    double step = log_dist(d_next, np.d_star);
    row.logd_step = step;

    if (step < p.eps3) {
      row.branch = "stop_logd";
      cert.trace.push_back(row);
      cert.a = h.normal;
      cert.d = np.d_star;
      cert.x = np.x_star;
      cert.iterations = k + 1;
      cert.stop_reason = "logd";
      break;
    }

    row.branch = "continue";
    cert.trace.push_back(row);
    a_prev = h.normal;
    d = d_next;
  }

  if (cert.stop_reason.empty()) {
    throw IterationCapExceeded("general exterior-point loop hit the iteration cap",
                               trace_to_csv(cert.trace));
  }

  // The relaxed region lets column sums drift above one (row repair, Pareto
  // lift). Normalize down to exact feasibility and measure the certificate
  // on the realized profile, so gamma absorbs the distortion honestly.
  for (int j = 0; j < m; ++j) {
    double s = cert.x.col(j).sum();
    if (s > 1.0) cert.x.col(j) /= s;
  }
  cert.d = pm.profile(cert.x);

  cert.gamma = measured_gamma(cert.a, cert.d, eta);
  cert.lambda = measured_lambda(cert.x);
  cert.delta_analytic = delta_analytic;
  cert.delta = std::max(0.0, b - min_weighted_profile(pm, cert.a));
  return cert;
}

ProgressReport progress_check(const std::vector<double>& potential_trace, double epsilon, int n,
                              const std::optional<Vec>& weights) {
  ProgressReport rep;
  if (potential_trace.size() < 2 || potential_trace.size() % 2 != 0) {
    throw ValidationError("potential trace must hold an L(d), L(d_*) pair per iteration");
  }
  double min_eta = 1.0;
  if (weights) min_eta = weights->minCoeff();
  rep.required_gain = epsilon * epsilon * min_eta / (16.0 * n * n) - 1e-12;
  rep.iterations = static_cast<long>(potential_trace.size() / 2);

  constexpr double slack = 1e-12;
  for (size_t i = 0; i + 1 < potential_trace.size(); ++i) {
    double diff = potential_trace[i + 1] - potential_trace[i];
    if (diff < -slack) {
      ++rep.monotonicity_violations;
      rep.worst_violation = std::max(rep.worst_violation, -diff);
    }
  }

  rep.min_gain = std::numeric_limits<double>::infinity();
  for (long k = 0; k + 1 < rep.iterations; ++k) {
    double gain = potential_trace[2 * (k + 1)] - potential_trace[2 * k];
    rep.min_gain = std::min(rep.min_gain, gain);
  }
  if (rep.iterations <= 1) rep.min_gain = std::numeric_limits<double>::infinity();

  bool gains_ok = rep.iterations <= 1 || rep.min_gain >= rep.required_gain;
  rep.pass = rep.monotonicity_violations == 0 && gains_ok;
  return rep;
}

}  // namespace choreeq
