#pragma once

#include <optional>

#include "choreeq/disutility.hpp"
#include "choreeq/instance.hpp"
#include "choreeq/projection.hpp"

namespace choreeq {

// Output of a nearest-point computation against the upward-closed feasible
// profile region. d_star is the profile of x_star after numerical repair;
// once Pareto adjustment has run, d_star dominates the query componentwise.
struct NearestPointResult {
  Mat x_star;
  Vec d_star;
  Vec query;
  double distance = 0.0;
  // Achieved accuracy: QP complementarity residual on the linear path,
  // certified profile-space error bound on the general path.
  double tolerance_used = 0.0;
};

struct QpOptions {
  double tol = 1e-10;
  long max_iters = 1000000;
  // Scale each agent's bundle so the repaired profile is realized exactly.
  // Disabled for mixed-manna profiles where entries may be negative.
  bool rescale_rows = true;
  std::optional<Mat> warm_start;
  const SupportMask* mask = nullptr;
};

// Projects the query onto the profile image of exact allocations by solving
// min ||D(x) - q||^2 over x in F with accelerated projected gradient.
// For queries below the feasible region this is the distance to the
// upward-closed region itself.
NearestPointResult nearest_point_linear(const Mat& D, const Vec& query,
                                        const QpOptions& opts = {});
NearestPointResult nearest_point_linear(const Instance& inst, const Vec& query,
                                        const QpOptions& opts = {});

struct GeneralNpOptions {
  long max_iters = 200000;
  std::optional<Mat> warm_start;
  // Floor for the duality-gap target; the analytic eps1 can be far below
  // what double precision can certify.
  double gap_floor = 1e-15;
};

// Solves the convex nearest-point program for 1-homogeneous oracles:
// min sum_i beta_i^2 over z in F' (column sums >= 1, entries in [0,2]) with
// beta_i = max(D_i(z_i) - q_i, 0), then realizes q + beta exactly by scaling
// rows up. Coordinates are snapped to integral multiples of eps1 / 2^20.
NearestPointResult nearest_point_general(const ProfileMap& pm, const Vec& query, double eps1,
                                         const GeneralNpOptions& opts = {});

// Shifts every coordinate of x_star up by 2*L*eps1 and re-realizes the
// componentwise max of the new profile with the stored query, so the result
// Pareto-dominates the query.
NearestPointResult pareto_lift(const ProfileMap& pm, NearestPointResult result, double eps1);

struct Hyperplane {
  Vec normal;
  double offset = 0.0;   // <normal, y> >= offset - delta on the feasible region
  double delta = 0.0;    // analytic support slack (0 on the linear-exact path)
  bool zero_entry = false;
};

// Normal through d_plus separating the query, rescaled so
// <normal, d_plus> = offset (default offset: dimension of the query).
Hyperplane supporting_hyperplane(const Vec& query, const Vec& d_plus, double offset = -1.0,
                                 double delta = 0.0);

// Maximizer of the weighted log objective sum_i eta_i log d_i over the
// hyperplane <a, d> = sum_i eta_i: the point (eta_i / a_i).
Vec hyperplane_max_nsw(const Hyperplane& h, const std::optional<Vec>& weights = std::nullopt);

// Distance from q to the upward closure of exact-allocation profiles,
// min over x in F of ||max(D(x) - q, 0)||. Zero iff q is dominated by some
// feasible profile. The mask pins eliminated variables to zero.
double membership_distance(const ProfileMap& pm, const Vec& query, double gm_tol = 1e-11,
                           const SupportMask* mask = nullptr);

// min over x in F of <a, D(x)>; closed form per column for linear oracles,
// convex minimization otherwise. Used to measure how well a hyperplane
// supports the feasible region.
double min_weighted_profile(const ProfileMap& pm, const Vec& a,
                            const SupportMask* mask = nullptr);
double min_weighted_profile_linear(const Mat& D, const Vec& a,
                                   const SupportMask* mask = nullptr);

// Same minimization, but also returns a minimizing allocation. The feasible
// region touches the half-space {<a, y> >= value} exactly at this point, so
// its weighted disutility gradients supply equilibrium prices.
struct WeightedProfileMin {
  double value = 0.0;
  Mat x;
};
WeightedProfileMin min_weighted_profile_point(const ProfileMap& pm, const Vec& a,
                                              const SupportMask* mask = nullptr);

}  // namespace choreeq
