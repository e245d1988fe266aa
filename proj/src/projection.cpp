#include "choreeq/projection.hpp"

#include <algorithm>
#include <cmath>

#include "choreeq/errors.hpp"

namespace choreeq {

Vec project_simplex(const Vec& v, double total) {
  const int n = static_cast<int>(v.size());
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cssv = 0.0;
  double tau = 0.0;
  int rho = 0;
  for (int k = 0; k < n; ++k) {
    cssv += u[k];
    double t = (cssv - total) / (k + 1);
    if (u[k] - t > 0.0) {
      rho = k + 1;
      tau = t;
    }
  }
  (void)rho;
  return (v.array() - tau).cwiseMax(0.0);
}

Vec project_lower_box(const Vec& v, double lo, double hi) {
  Vec w = v.cwiseMax(0.0).cwiseMin(hi);
  if (w.sum() >= lo) return w;
  // Project onto { sum = lo, 0 <= v <= hi }: shift by theta >= 0 with
  // clamping; the clamped sum is nondecreasing in theta, so bisect.
  double t_lo = 0.0;
  double t_hi = lo;  // at theta = lo every coordinate reaches at least lo/n... widen below
  auto sum_at = [&](double th) {
    double s = 0.0;
    for (int i = 0; i < v.size(); ++i) s += std::clamp(v[i] + th, 0.0, hi);
    return s;
  };
  while (sum_at(t_hi) < lo) {
    t_hi *= 2.0;
    if (t_hi > 1e12) throw SolverStall("lower-box projection bisection failed to bracket");
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (t_lo + t_hi);
    if (sum_at(mid) < lo) {
      t_lo = mid;
    } else {
      t_hi = mid;
    }
  }
  Vec out(v.size());
  for (int i = 0; i < v.size(); ++i) out[i] = std::clamp(v[i] + t_hi, 0.0, hi);
  return out;
}

Vec project_capped_simplex(const Vec& v, double hi_total) {
  Vec w = v.cwiseMax(0.0);
  if (w.sum() <= hi_total) return w;
  return project_simplex(v, hi_total);
}

Vec project_weighted_simplex(const Vec& v, const Vec& p, double budget) {
  if (v.size() != p.size()) throw DimensionMismatch("weighted simplex projection size mismatch");
  for (int i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) throw NonpositiveEntry("weighted simplex projection requires p > 0");
  }
  // y(theta) = max(v - theta*p, 0); <p, y(theta)> is continuous and
  // nonincreasing in theta. Bracket then bisect.
  auto spend = [&](double th) {
    double s = 0.0;
    for (int i = 0; i < v.size(); ++i) s += p[i] * std::max(v[i] - th * p[i], 0.0);
    return s;
  };
  double t_hi = 0.0;
  double t_lo = 0.0;
  if (spend(0.0) >= budget) {
    t_hi = 1.0;
    while (spend(t_hi) > budget) {
      t_hi *= 2.0;
      if (t_hi > 1e15) throw SolverStall("weighted simplex projection failed to bracket");
    }
  } else {
    t_lo = -1.0;
    while (spend(t_lo) < budget) {
      t_lo *= 2.0;
      if (t_lo < -1e15) throw SolverStall("weighted simplex projection failed to bracket");
    }
    t_hi = 0.0;
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (t_lo + t_hi);
    if (spend(mid) > budget) {
      t_lo = mid;
    } else {
      t_hi = mid;
    }
  }
  double th = 0.5 * (t_lo + t_hi);
  Vec out(v.size());
  for (int i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - th * p[i], 0.0);
  // Polish the budget equation exactly: rescale the support.
  double s = 0.0;
  for (int i = 0; i < v.size(); ++i) s += p[i] * out[i];
  if (s > 0.0) out *= budget / s;
  return out;
}

namespace {

// Gathers the allowed entries of a column, projects in the reduced space,
// and scatters back (masked entries stay zero).
template <typename Proj>
void project_columns_masked(Mat& x, const SupportMask* mask, Proj proj) {
  const int n = static_cast<int>(x.rows());
  const int m = static_cast<int>(x.cols());
  for (int j = 0; j < m; ++j) {
    if (mask == nullptr || (*mask)[j].empty()) {
      Vec col = x.col(j);
      x.col(j) = proj(col);
      continue;
    }
    const auto& allow = (*mask)[j];
    int cnt = 0;
    for (int i = 0; i < n; ++i) cnt += allow[i] ? 1 : 0;
    if (cnt == 0) throw ZeroColumn("column " + std::to_string(j) + " has empty support");
    Vec sub(cnt);
    int k = 0;
    for (int i = 0; i < n; ++i) {
      if (allow[i]) sub[k++] = x(i, j);
    }
    Vec psub = proj(sub);
    k = 0;
    for (int i = 0; i < n; ++i) {
      x(i, j) = allow[i] ? psub[k++] : 0.0;
    }
  }
}

}  // namespace

void project_columns_simplex(Mat& x, const SupportMask* mask) {
  project_columns_masked(x, mask, [](const Vec& v) { return project_simplex(v, 1.0); });
}

void project_columns_lower_box(Mat& x, double hi, const SupportMask* mask) {
  project_columns_masked(x, mask,
                         [hi](const Vec& v) { return project_lower_box(v, 1.0, hi); });
}

}  // namespace choreeq
