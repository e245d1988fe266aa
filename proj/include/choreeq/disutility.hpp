#pragma once

#include <vector>

#include "choreeq/instance.hpp"

namespace choreeq {

// Lower corner of the box on which the CES Lipschitz constant is certified.
// CES derivatives vanish at the boundary for rho > 1, so the axis-increment
// lower bound of the growth assumption only holds away from zero; evaluation
// gradients are floored at the same constant.
inline constexpr double kGradFloor = 1e-9;

// Upper corner of the certification box. No agent ever holds more than the
// whole supply of a chore plus slack, so 2 covers every allocation seen here.
inline constexpr double kAllocBound = 2.0;

// Computes L such that, along coordinate directions within
// [grad_floor, alloc_bound]^m, increments of the disutility lie between
// delta/L and delta*L. Linear: max(max_j c_j, 1/min_j c_j).
double lipschitz_constant(const DisutilitySpec& spec, double grad_floor = kGradFloor,
                          double alloc_bound = kAllocBound);

// Evaluation wrapper around one agent's DisutilitySpec.
class DisutilityOracle {
public:
  explicit DisutilityOracle(DisutilitySpec spec);

  double value(const Vec& x) const;

  // Exact gradient. Throws GradientSingularity for CES with rho > 1 at the
  // zero vector; callers that iterate near the boundary should use
  // gradient_safe instead.
  Vec gradient(const Vec& x) const;

  // Gradient evaluated at max(x, grad_floor) componentwise; never throws.
  Vec gradient_safe(const Vec& x) const;

  double lipschitz() const { return lipschitz_; }
  const DisutilitySpec& spec() const { return spec_; }
  bool is_linear() const { return spec_.is_linear(); }
  int m() const { return static_cast<int>(spec_.coeffs.size()); }

private:
  DisutilitySpec spec_;
  double lipschitz_;
};

// All agents' oracles; maps allocations to disutility profiles.
class ProfileMap {
public:
  ProfileMap() = default;
  explicit ProfileMap(std::vector<DisutilityOracle> oracles);

  // Profile D(x): entry i is agent i's disutility for row i of x.
  Vec profile(const Mat& x) const;

  const DisutilityOracle& oracle(int i) const { return oracles_[i]; }
  int n() const { return static_cast<int>(oracles_.size()); }
  int m() const { return oracles_.empty() ? 0 : oracles_[0].m(); }

  // Largest per-agent Lipschitz constant.
  double lipschitz() const;

  bool all_linear() const;

  // Per-agent coefficient matrix; requires all_linear().
  Mat linear_matrix() const;

private:
  std::vector<DisutilityOracle> oracles_;
};

ProfileMap make_profile_map(const Instance& inst);

}  // namespace choreeq
