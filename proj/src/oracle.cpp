#include "choreeq/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "choreeq/errors.hpp"

namespace choreeq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double binomial(int top, int bottom) {
  double r = 1.0;
  for (int k = 1; k <= bottom; ++k) r *= double(top - bottom + k) / k;
  return r;
}

// All ways to split `units` grid steps among `cells` slots.
void compositions(int units, int cells, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (cells == 1) {
    cur.push_back(units);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int k = 0; k <= units; ++k) {
    cur.push_back(k);
    compositions(units - k, cells - 1, cur, out);
    cur.pop_back();
  }
}

std::vector<std::vector<int>> column_grid(int resolution, int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  compositions(resolution, n, cur, out);
  return out;
}

void check_resolution(const GridSpec& g) {
  if (g.resolution < 2) throw ValidationError("grid resolution must be at least 2");
}

// Smallest eps >= 0 with (1 - eps) * lhs <= rhs; +inf if none.
double eps_needed(double lhs, double rhs) {
  if (lhs > 1e-12) return std::max(0.0, 1.0 - rhs / lhs);
  return rhs >= -1e-12 ? 0.0 : kInf;
}

}  // namespace

GridNearestResult grid_nearest_point(const ProfileMap& pm, const Vec& query, const GridSpec& g) {
  check_resolution(g);
  const int n = pm.n();
  const int m = pm.m();
  if (query.size() != n) throw DimensionMismatch("query length must match agent count");

  const double per_column = binomial(g.resolution + n - 1, n - 1);
  if (m * std::log(per_column) > std::log(kGridPointCap)) {
    throw GridTooLarge("grid enumeration exceeds the point cap");
  }

  const auto cols = column_grid(g.resolution, n);
  const int c = static_cast<int>(cols.size());

  Mat x = Mat::Zero(n, m);
  std::vector<int> idx(m, 0);
  auto load_column = [&](int j) {
    for (int i = 0; i < n; ++i) x(i, j) = double(cols[idx[j]][i]) / g.resolution;
  };
  for (int j = 0; j < m; ++j) load_column(j);

  GridNearestResult best;
  best.distance = kInf;
  while (true) {
    double dist = (pm.profile(x) - query).norm();
    if (dist < best.distance) {
      best.distance = dist;
      best.x_best = x;
    }
    int j = 0;
    while (j < m) {
      if (++idx[j] < c) {
        load_column(j);
        break;
      }
      idx[j] = 0;
      load_column(j);
      ++j;
    }
    if (j == m) break;
  }
  return best;
}

std::vector<KktCandidate> grid_kkt_scan(const Mat& D, const GridSpec& g, double gamma) {
  check_resolution(g);
  if (D.rows() != 2) throw UnsupportedDims("the KKT scan supports exactly two agents");
  if (!(gamma >= 1.0)) throw ValidationError("gamma must be at least 1");
  const int m = static_cast<int>(D.cols());

  const double per_column = g.resolution + 1.0;
  if (m * std::log(per_column) > std::log(kGridPointCap)) {
    throw GridTooLarge("grid enumeration exceeds the point cap");
  }

  // Profile cloud over the grid.
  std::vector<std::array<double, 2>> pts;
  std::vector<int> idx(m, 0);
  while (true) {
    double d1 = 0.0;
    double d2 = 0.0;
    for (int j = 0; j < m; ++j) {
      double share = double(idx[j]) / g.resolution;
      d1 += D(0, j) * share;
      d2 += D(1, j) * (1.0 - share);
    }
    pts.push_back({d1, d2});
    int j = 0;
    while (j < m && ++idx[j] > g.resolution) {
      idx[j] = 0;
      ++j;
    }
    if (j == m) break;
  }

  // Lower-left convex hull: the Pareto boundary of the upward closure.
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]);
  });
  std::vector<std::array<double, 2>> uniq;
  for (const auto& p : pts) {
    if (uniq.empty() || uniq.back()[0] != p[0]) uniq.push_back(p);
  }
  std::vector<std::array<double, 2>> hull;
  for (const auto& p : uniq) {
    while (hull.size() >= 2) {
      const auto& a = hull[hull.size() - 2];
      const auto& b = hull[hull.size() - 1];
      double cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
      if (cross <= 0.0) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(p);
  }
  // Keep the strictly decreasing chain; flat or rising edges of the lower
  // hull are interior to the upward closure.
  std::vector<std::array<double, 2>> chain;
  for (const auto& p : hull) {
    if (chain.empty() || p[1] < chain.back()[1] - 1e-15) chain.push_back(p);
  }

  std::vector<KktCandidate> found;
  auto consider = [&](double d1, double d2, double a1, double a2) {
    if (!(a1 > 0.0) || !(a2 > 0.0) || !(d1 > 0.0) || !(d2 > 0.0)) return;
    double s = a1 * d1 + a2 * d2;
    a1 *= 2.0 / s;
    a2 *= 2.0 / s;
    double g1 = std::max(a1 * d1, 1.0 / (a1 * d1));
    double g2 = std::max(a2 * d2, 1.0 / (a2 * d2));
    double achieved = std::max(g1, g2);
    if (achieved <= gamma) {
      KktCandidate cand;
      cand.d = Vec(2);
      cand.d << d1, d2;
      cand.normal = Vec(2);
      cand.normal << a1, a2;
      cand.gamma_achieved = achieved;
      found.push_back(cand);
    }
  };

  const int kEdgeSamples = 16;
  for (size_t e = 0; e + 1 < chain.size(); ++e) {
    const auto& p = chain[e];
    const auto& q = chain[e + 1];
    double a1 = p[1] - q[1];  // outward normal of a decreasing edge
    double a2 = q[0] - p[0];
    for (int s = 0; s <= kEdgeSamples; ++s) {
      double t = double(s) / kEdgeSamples;
      consider((1 - t) * p[0] + t * q[0], (1 - t) * p[1] + t * q[1], a1, a2);
    }
  }
  // Vertex normal cones between adjacent edges.
  const int kConeSamples = 8;
  for (size_t v = 1; v + 1 < chain.size(); ++v) {
    double l1 = chain[v - 1][1] - chain[v][1];
    double l2 = chain[v][0] - chain[v - 1][0];
    double r1 = chain[v][1] - chain[v + 1][1];
    double r2 = chain[v + 1][0] - chain[v][0];
    double ln = std::hypot(l1, l2);
    double rn = std::hypot(r1, r2);
    if (ln <= 0.0 || rn <= 0.0) continue;
    for (int s = 1; s < kConeSamples; ++s) {
      double t = double(s) / kConeSamples;
      consider(chain[v][0], chain[v][1], (1 - t) * l1 / ln + t * r1 / rn,
               (1 - t) * l2 / ln + t * r2 / rn);
    }
  }
  return found;
}

ExhaustiveReport exhaustive_verify(const ProfileMap& pm, const Mat& x, const Vec& p,
                                   double epsilon, const GridSpec& g) {
  check_resolution(g);
  const int n = pm.n();
  const int m = pm.m();
  if (x.rows() != n || x.cols() != m || p.size() != m) {
    throw DimensionMismatch("allocation/price dimensions do not match");
  }

  ExhaustiveReport rep;
  Vec earnings = x * p;

  double worst_income = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j) worst_income = std::max(worst_income, eps_needed(earnings[i], earnings[j]));
    }
  }
  rep.residuals.income_ratio_worst = worst_income;

  // Bundles on the unit-budget simplex: weights w on positive-price chores,
  // y_j = w_j / p_j, so every enumerated bundle earns exactly 1 and scales
  // to any budget by homogeneity.
  std::vector<int> support;
  for (int j = 0; j < m; ++j) {
    if (p[j] > 1e-14 * std::max(1.0, p.cwiseAbs().maxCoeff())) support.push_back(j);
  }
  if (support.empty()) throw ZeroPrices("no positive price to enumerate against");
  const int k = static_cast<int>(support.size());
  if (std::log(binomial(g.resolution + k - 1, k - 1)) > std::log(kGridPointCap)) {
    throw GridTooLarge("bundle enumeration exceeds the point cap");
  }
  const auto combos = column_grid(g.resolution, k);

  double worst_bundle = 0.0;
  for (int i = 0; i < n; ++i) {
    double unit_best = kInf;
    Vec y = Vec::Zero(m);
    for (const auto& combo : combos) {
      for (int s = 0; s < k; ++s) {
        y[support[s]] = double(combo[s]) / g.resolution / p[support[s]];
      }
      unit_best = std::min(unit_best, pm.oracle(i).value(y));
    }
    double d_i = pm.oracle(i).value(x.row(i).transpose());
    double opt = earnings[i] > 0.0 ? earnings[i] * unit_best : 0.0;
    worst_bundle = std::max(worst_bundle, eps_needed(d_i, opt));
  }
  rep.residuals.optimal_bundle_worst = worst_bundle;

  double worst_col = 0.0;
  for (int j = 0; j < m; ++j) worst_col = std::max(worst_col, std::abs(x.col(j).sum() - 1.0));
  rep.residuals.feasibility_worst = worst_col;

  constexpr double slack = 1e-12;
  rep.cond_income = rep.residuals.income_ratio_worst <= epsilon + slack;
  rep.cond_bundle = rep.residuals.optimal_bundle_worst <= epsilon + slack;
  rep.cond_feasible = rep.residuals.feasibility_worst <= epsilon + slack;
  rep.pass = rep.cond_income && rep.cond_bundle && rep.cond_feasible;
  return rep;
}

}  // namespace choreeq
