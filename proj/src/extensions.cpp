#include "choreeq/extensions.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "choreeq/apg.hpp"
#include "choreeq/disutility.hpp"
#include "choreeq/errors.hpp"
#include "choreeq/geometry.hpp"
#include "choreeq/logging.hpp"

namespace choreeq {

namespace {

constexpr double kWitnessTol = 1e-9;

void require_mixed_linear(const Instance& inst) {
  if (inst.mode != Mode::kMixedManna) {
    throw ValidationError("mixed-manna pipeline requires a mixed-mode instance");
  }
  if (!inst.all_linear()) {
    throw ValidationError("mixed-manna pipeline supports linear utilities only");
  }
}

std::vector<std::uint8_t> positive_agent_set(const Mat& U) {
  std::vector<std::uint8_t> pos(U.rows(), 0);
  for (int i = 0; i < U.rows(); ++i) {
    pos[i] = U.row(i).maxCoeff() > 0.0 ? 1 : 0;
  }
  return pos;
}

// Support restriction for the positive/null programs: agents outside N+
// can only reach zero utility by avoiding everything they strictly dislike.
SupportMask positive_case_mask(const Mat& U, const std::vector<std::uint8_t>& pos) {
  const int n = static_cast<int>(U.rows());
  const int m = static_cast<int>(U.cols());
  SupportMask mask(m);
  for (int j = 0; j < m; ++j) {
    bool restricted = false;
    std::vector<std::uint8_t> col(n, 1);
    for (int i = 0; i < n; ++i) {
      if (!pos[i] && U(i, j) < 0.0) {
        col[i] = 0;
        restricted = true;
      }
    }
    if (restricted) mask[j] = std::move(col);
  }
  return mask;
}

bool mask_has_empty_column(const SupportMask& mask) {
  for (const auto& col : mask) {
    if (col.empty()) continue;
    bool any = false;
    for (auto v : col) any = any || v != 0;
    if (!any) return true;
  }
  return false;
}

// min over the masked exact-allocation polytope of
// sum_{i in N+} max(s - U_i(x_i), 0)^2; zero iff every N+ agent can reach
// utility s while N- agents stay at zero.
double positive_hinge_gap(const Mat& U, const std::vector<std::uint8_t>& pos,
                          const SupportMask& mask, double s, Mat& warm) {
  const int n = static_cast<int>(U.rows());
  auto utilities = [&](const Mat& z) { return (U.cwiseProduct(z)).rowwise().sum().eval(); };
  ValueFn value = [&](const Mat& z) {
    Vec u = utilities(z);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      if (!pos[i]) continue;
      double h = std::max(s - u[i], 0.0);
      total += h * h;
    }
    return total;
  };
  GradFn grad = [&](const Mat& z) {
    Vec u = utilities(z);
    Mat g = Mat::Zero(z.rows(), z.cols());
    for (int i = 0; i < n; ++i) {
      if (!pos[i]) continue;
      double h = std::max(s - u[i], 0.0);
      if (h > 0.0) g.row(i) = -2.0 * h * U.row(i);
    }
    return g;
  };
  ProjectFn project = [&](Mat& z) { project_columns_simplex(z, &mask); };

  ApgOptions opts;
  opts.max_iters = 120000;
  opts.gm_tol = 1e-13 * (1.0 + U.cwiseAbs().maxCoeff());
  project(warm);
  ApgResult res = apg_minimize(value, grad, project, warm, opts);
  warm = res.x;
  return res.value;
}

// min over F of sum_i U_i(x_i)^2; zero iff everyone can be held at exactly
// zero utility.
double null_gap(const Mat& U, Mat& witness) {
  const int n = static_cast<int>(U.rows());
  const int m = static_cast<int>(U.cols());
  auto utilities = [&](const Mat& z) { return (U.cwiseProduct(z)).rowwise().sum().eval(); };
  ValueFn value = [&](const Mat& z) { return utilities(z).squaredNorm(); };
  GradFn grad = [&](const Mat& z) {
    Vec u = utilities(z);
    Mat g(z.rows(), z.cols());
    for (int i = 0; i < n; ++i) g.row(i) = 2.0 * u[i] * U.row(i);
    return g;
  };
  ProjectFn project = [](Mat& z) { project_columns_simplex(z); };

  ApgOptions opts;
  opts.max_iters = 120000;
  opts.gm_tol = 1e-13 * (1.0 + U.cwiseAbs().maxCoeff());
  ApgResult res = apg_minimize(value, grad, project, Mat::Constant(n, m, 1.0 / n), opts);
  witness = res.x;
  return res.value;
}

// Monotone projected gradient with backtracking. The Eisenberg-Gale
// objective blows up at the boundary of its domain, so accelerated steps
// (which evaluate gradients at extrapolated points) are unsafe here.
Mat projected_gradient_descent(const ValueFn& value, const GradFn& grad, const ProjectFn& project,
                               Mat x, long max_iters, double tol) {
  double fx = value(x);
  double curvature = 1.0;
  for (long it = 0; it < max_iters; ++it) {
    Mat g = grad(x);
    Mat x_new;
    double fx_new = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 80; ++bt) {
      x_new = x - g / curvature;
      project(x_new);
      fx_new = value(x_new);
      Mat diff = x_new - x;
      double model = fx + (g.array() * diff.array()).sum() + 0.5 * curvature * diff.squaredNorm();
      if (std::isfinite(fx_new) && fx_new <= model + 1e-15 * (1.0 + std::abs(fx))) {
        accepted = true;
        break;
      }
      curvature *= 2.0;
    }
    if (!accepted) break;
    double move = curvature * (x_new - x).norm();
    x = x_new;
    fx = fx_new;
    curvature = std::max(curvature * 0.9, 1e-12);
    if (move <= tol * (1.0 + std::abs(fx))) break;
  }
  return x;
}

struct EgSetup {
  std::vector<std::uint8_t> good_column;  // j in G: disposal allowed
  SupportMask mask;
};

// Per-column projection for the Eisenberg-Gale feasible set: goods may be
// under-allocated, chores must be fully covered.
void project_eg(Mat& x, const EgSetup& setup) {
  const int n = static_cast<int>(x.rows());
  for (int j = 0; j < x.cols(); ++j) {
    const auto& colmask = setup.mask[j];
    std::vector<int> idx;
    idx.reserve(n);
    for (int i = 0; i < n; ++i) {
      if (colmask.empty() || colmask[i]) {
        idx.push_back(i);
      } else {
        x(i, j) = 0.0;
      }
    }
    Vec sub(static_cast<int>(idx.size()));
    for (size_t s = 0; s < idx.size(); ++s) sub[static_cast<int>(s)] = x(idx[s], j);
    Vec proj = setup.good_column[j] ? project_capped_simplex(sub, 1.0)
                                    : project_lower_box(sub, 1.0, kAllocBound);
    for (size_t s = 0; s < idx.size(); ++s) x(idx[s], j) = proj[static_cast<int>(s)];
  }
}

MixedSolution solve_positive(const Instance& inst, const MixedClassification& cls) {
  const Mat U = -inst.linear_matrix();
  const int n = inst.n;
  const int m = inst.m;
  const auto& pos = cls.positive_agents;

  EgSetup setup;
  setup.good_column.resize(m);
  for (int j = 0; j < m; ++j) setup.good_column[j] = U.col(j).maxCoeff() > 0.0 ? 1 : 0;
  setup.mask = positive_case_mask(U, pos);

  auto utilities = [&](const Mat& z) { return (U.cwiseProduct(z)).rowwise().sum().eval(); };
  ValueFn value = [&](const Mat& z) {
    Vec u = utilities(z);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      if (!pos[i]) continue;
      if (!(u[i] > 0.0)) return std::numeric_limits<double>::infinity();
      total -= std::log(u[i]);
    }
    return total;
  };
  GradFn grad = [&](const Mat& z) {
    Vec u = utilities(z);
    Mat g = Mat::Zero(n, m);
    for (int i = 0; i < n; ++i) {
      if (pos[i]) g.row(i) = -U.row(i) / u[i];
    }
    return g;
  };
  ProjectFn project = [&](Mat& z) { project_eg(z, setup); };

  // Start from the uniform point when it already lies in the objective's
  // domain; otherwise blend toward the classification witness, which gives
  // every N+ agent strictly positive utility.
  Mat uniform = Mat::Constant(n, m, 1.0 / n);
  project(uniform);
  Mat start = uniform;
  double theta = 0.0;
  while (!std::isfinite(value(start)) && theta < 1.0) {
    theta = theta == 0.0 ? 0.5 : std::min(1.0, theta * 1.5);
    start = (1.0 - theta) * uniform + theta * cls.witness;
    project(start);
  }
  if (!std::isfinite(value(start))) start = cls.witness;

  Mat x = projected_gradient_descent(value, grad, project, start, 200000, 1e-12);

  Vec u = utilities(x);
  Vec p = Vec::Zero(m);
  for (int j = 0; j < m; ++j) {
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (!pos[i]) continue;
      best = std::max(best, U(i, j) / u[i]);
    }
    p[j] = best;
  }

  MixedSolution sol;
  sol.category = MixedCategory::kPositive;
  sol.x = x;
  sol.p = p;
  sol.utilities = u;
  sol.mask = setup.mask;
  return sol;
}

}  // namespace

MixedClassification classify_mixed(const Instance& inst) {
  require_mixed_linear(inst);
  const Mat D = inst.linear_matrix();
  const Mat U = -D;
  const int n = inst.n;
  const int m = inst.m;

  MixedClassification cls;
  cls.positive_agents = positive_agent_set(U);

  bool any_positive_agent = false;
  for (auto v : cls.positive_agents) any_positive_agent = any_positive_agent || v != 0;

  if (any_positive_agent) {
    SupportMask mask = positive_case_mask(U, cls.positive_agents);
    if (!mask_has_empty_column(mask)) {
      Mat warm = Mat::Constant(n, m, 1.0 / n);
      const double gap_tol = kWitnessTol * kWitnessTol;
      double probe = 2.0 * kWitnessTol;
      if (positive_hinge_gap(U, cls.positive_agents, mask, probe, warm) <= gap_tol) {
        // Push the attained min utility up for a well-separated witness.
        double s_hi = 0.0;
        for (int i = 0; i < n; ++i) s_hi = std::max(s_hi, U.row(i).cwiseMax(0.0).sum());
        double lo = probe;
        Mat lo_witness = warm;
        if (positive_hinge_gap(U, cls.positive_agents, mask, s_hi, warm) <= gap_tol) {
          lo = s_hi;
          lo_witness = warm;
        } else {
          double hi = s_hi;
          for (int it = 0; it < 50 && hi - lo > 1e-6 * s_hi; ++it) {
            double mid = 0.5 * (lo + hi);
            if (positive_hinge_gap(U, cls.positive_agents, mask, mid, warm) <= gap_tol) {
              lo = mid;
              lo_witness = warm;
            } else {
              hi = mid;
            }
          }
        }
        cls.category = MixedCategory::kPositive;
        cls.witness = lo_witness;
        cls.witness_value = lo;
        return cls;
      }
    }
  }

  Mat null_witness;
  if (null_gap(U, null_witness) <= kWitnessTol * kWitnessTol) {
    cls.category = MixedCategory::kNull;
    cls.witness = null_witness;
    cls.witness_value = 0.0;
    return cls;
  }

  cls.category = MixedCategory::kNegative;
  return cls;
}

SupportMask negative_case_mask(const Mat& D) {
  const int n = static_cast<int>(D.rows());
  const int m = static_cast<int>(D.cols());
  SupportMask mask(m);
  for (int j = 0; j < m; ++j) {
    if (D.col(j).minCoeff() >= 0.0) continue;  // chore for everyone
    std::vector<std::uint8_t> col(n, 0);
    for (int i = 0; i < n; ++i) col[i] = D(i, j) < 0.0 ? 1 : 0;
    mask[j] = std::move(col);
  }
  return mask;
}

Vec initial_point_mixed_negative(const Instance& inst, const SupportMask* mask) {
  require_mixed_linear(inst);
  const Mat D = inst.linear_matrix();
  ProfileMap pm = make_profile_map(inst);
  const int n = inst.n;

  const double scale = D.cwiseAbs().maxCoeff();
  double t_hi = 2.0 * kAllocBound * inst.m * std::max(scale, 1.0) + 1.0;
  auto infeasible = [&](double t) {
    return membership_distance(pm, Vec::Constant(n, t), 1e-11, mask) > 1e-9 * (1.0 + t);
  };

  if (infeasible(t_hi)) {
    return Vec::Constant(n, t_hi);
  }
  double hi = t_hi;  // feasible end
  double lo = t_hi;
  int steps = 0;
  do {
    hi = lo;
    lo *= 0.5;
    if (++steps > 200) {
      throw SearchFailed("no infeasible point on the diagonal ray: instance is not negative");
    }
  } while (!infeasible(lo));

  // Locate the boundary crossing, then start at half of it: hugging the
  // boundary saves at most n log 2 of potential but would trip the
  // near-feasible stop on the very first iteration.
  while (hi - lo > 1e-6 * t_hi && ++steps <= 200) {
    double mid = 0.5 * (lo + hi);
    if (infeasible(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double t0 = std::floor(0.5 * lo * 1e12) / 1e12;
  int backoff = 0;
  while ((!(t0 > 0.0) || !infeasible(t0)) && ++backoff <= 60) t0 *= 0.5;
  if (!(t0 > 0.0)) throw SearchFailed("could not find a positive infeasible start");
  return Vec::Constant(n, t0);
}

MixedSolution solve_mixed(const Instance& inst, double epsilon, const SolverParams* overrides) {
  MixedClassification cls = classify_mixed(inst);
  const Mat D = inst.linear_matrix();

  if (cls.category == MixedCategory::kNull) {
    MixedSolution sol;
    sol.category = MixedCategory::kNull;
    sol.x = cls.witness;
    sol.p = Vec::Zero(inst.m);
    sol.utilities = (-D).cwiseProduct(cls.witness).rowwise().sum();
    return sol;
  }

  if (cls.category == MixedCategory::kPositive) {
    return solve_positive(inst, cls);
  }

  SupportMask mask = negative_case_mask(D);
  Vec d0 = initial_point_mixed_negative(inst, &mask);

  SolverParams params = overrides ? *overrides : SolverParams{};
  params.epsilon = epsilon;
  params.mask = mask;
  params.initial_d = d0;

  KktCertificate cert = solve_kkt_linear(D, params);
  EquilibriumCertificate eq = from_kkt_linear(D, cert, &mask);

  MixedSolution sol;
  sol.category = MixedCategory::kNegative;
  sol.x = eq.x;
  sol.p = eq.p;
  sol.utilities = (-D).cwiseProduct(eq.x).rowwise().sum();
  sol.kkt = std::move(cert);
  sol.eq = std::move(eq);
  sol.mask = std::move(mask);
  return sol;
}

EquilibriumCertificate solve_weighted(const Instance& inst, const Vec& eta, double epsilon,
                                      const SolverParams* overrides, KktCertificate* kkt_out) {
  if (eta.size() != inst.n) throw DimensionMismatch("weights length must match agent count");
  for (int i = 0; i < eta.size(); ++i) {
    if (!(eta[i] > 0.0) || !std::isfinite(eta[i])) {
      throw NonpositiveEntry("weights must be strictly positive and finite");
    }
  }
  if (inst.mode != Mode::kChoresOnly) {
    throw ValidationError("unequal incomes are supported for chores instances");
  }

  Vec norm = eta / eta.maxCoeff();
  double ratio = 1.0 / norm.minCoeff();
  if (ratio > 1e6) {
    std::ostringstream os;
    os << "weight ratio " << ratio << " exceeds 1e6; iteration bound scales with it";
    log::warn(os.str());
  }

  SolverParams params = overrides ? *overrides : SolverParams{};
  params.epsilon = epsilon;
  params.weights = norm;

  if (inst.all_linear()) {
    KktCertificate cert = solve_kkt_linear(inst, params);
    if (kkt_out) *kkt_out = cert;
    return from_kkt_linear(inst, cert);
  }
  ProfileMap pm = make_profile_map(inst);
  KktCertificate cert = solve_kkt_general(pm, params);
  if (kkt_out) *kkt_out = cert;
  return from_kkt_general(pm, cert);
}

}  // namespace choreeq
