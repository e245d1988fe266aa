#include "choreeq/disutility.hpp"

#include <cmath>

#include "choreeq/errors.hpp"

namespace choreeq {

double lipschitz_constant(const DisutilitySpec& spec, double grad_floor, double alloc_bound) {
  const Vec& c = spec.coeffs;
  if (c.size() == 0) return 1.0;
  if (spec.is_linear()) {
    // Mixed-manna instances may carry zero coefficients (indifference); the
    // reciprocal part then ranges over the nonzero ones only.
    double hi = c.cwiseAbs().maxCoeff();
    double lo = 0.0;
    for (int j = 0; j < c.size(); ++j) {
      double a = std::abs(c[j]);
      if (a > 0.0 && (lo == 0.0 || a < lo)) lo = a;
    }
    if (lo == 0.0) return std::max(hi, 1.0);
    return std::max(std::max(hi, 1.0 / lo), 1.0);
  }
  const double rho = spec.rho;
  // Upper bound: the axis derivative of (sum c_j x_j^rho)^(1/rho) never
  // exceeds c_j^(1/rho).
  double upper = 0.0;
  for (int j = 0; j < c.size(); ++j) upper = std::max(upper, std::pow(c[j], 1.0 / rho));
  // Lower bound: the axis derivative is minimized at x_j = grad_floor with
  // every other coordinate at alloc_bound.
  double inv_lower = 0.0;
  double sum_all = 0.0;
  for (int j = 0; j < c.size(); ++j) sum_all += c[j] * std::pow(alloc_bound, rho);
  for (int j = 0; j < c.size(); ++j) {
    double s = sum_all - c[j] * std::pow(alloc_bound, rho) + c[j] * std::pow(grad_floor, rho);
    double deriv = c[j] * std::pow(grad_floor, rho - 1.0) * std::pow(s, (1.0 - rho) / rho);
    if (rho == 1.0) deriv = c[j];
    inv_lower = std::max(inv_lower, 1.0 / deriv);
  }
  return std::max(std::max(upper, inv_lower), 1.0);
}

DisutilityOracle::DisutilityOracle(DisutilitySpec spec)
    : spec_(std::move(spec)), lipschitz_(lipschitz_constant(spec_)) {}

double DisutilityOracle::value(const Vec& x) const {
  if (x.size() != spec_.coeffs.size()) throw DimensionMismatch("bundle has wrong length");
  if (x.minCoeff() < 0.0) throw NegativeInput("disutility requires a nonnegative bundle");
  if (spec_.is_linear()) return spec_.coeffs.dot(x);
  const double rho = spec_.rho;
  double s = 0.0;
  for (int j = 0; j < x.size(); ++j) {
    s += spec_.coeffs[j] * std::pow(x[j], rho);
  }
  return std::pow(s, 1.0 / rho);
}

Vec DisutilityOracle::gradient(const Vec& x) const {
  if (x.size() != spec_.coeffs.size()) throw DimensionMismatch("bundle has wrong length");
  if (spec_.is_linear()) return spec_.coeffs;
  const double rho = spec_.rho;
  if (rho > 1.0 && x.maxCoeff() <= 0.0) {
    throw GradientSingularity("CES gradient undefined at the zero bundle for rho > 1");
  }
  double s = 0.0;
  for (int j = 0; j < x.size(); ++j) {
    if (x[j] < 0.0) throw NegativeInput("CES gradient requires a nonnegative bundle");
    s += spec_.coeffs[j] * std::pow(x[j], rho);
  }
  Vec g(x.size());
  double outer = std::pow(s, (1.0 - rho) / rho);
  for (int j = 0; j < x.size(); ++j) {
    g[j] = spec_.coeffs[j] * std::pow(x[j], rho - 1.0) * outer;
  }
  return g;
}

Vec DisutilityOracle::gradient_safe(const Vec& x) const {
  if (spec_.is_linear()) return spec_.coeffs;
  Vec y = x.cwiseMax(kGradFloor);
  return gradient(y);
}

ProfileMap::ProfileMap(std::vector<DisutilityOracle> oracles) : oracles_(std::move(oracles)) {}

Vec ProfileMap::profile(const Mat& x) const {
  if (x.rows() != n() || x.cols() != m()) {
    throw DimensionMismatch("allocation shape does not match profile map");
  }
  Vec d(n());
  for (int i = 0; i < n(); ++i) d[i] = oracles_[i].value(x.row(i).transpose());
  return d;
}

double ProfileMap::lipschitz() const {
  double L = 1.0;
  for (const auto& o : oracles_) L = std::max(L, o.lipschitz());
  return L;
}

bool ProfileMap::all_linear() const {
  for (const auto& o : oracles_) {
    if (!o.is_linear()) return false;
  }
  return true;
}

Mat ProfileMap::linear_matrix() const {
  if (!all_linear()) throw ValidationError("linear_matrix requires all-linear oracles");
  Mat D(n(), m());
  for (int i = 0; i < n(); ++i) D.row(i) = oracles_[i].spec().coeffs.transpose();
  return D;
}

ProfileMap make_profile_map(const Instance& inst) {
  std::vector<DisutilityOracle> oracles;
  oracles.reserve(inst.n);
  for (const auto& spec : inst.disutilities) oracles.emplace_back(spec);
  return ProfileMap(std::move(oracles));
}

}  // namespace choreeq
