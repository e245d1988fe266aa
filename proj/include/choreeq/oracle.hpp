#pragma once

#include <vector>

#include "choreeq/disutility.hpp"
#include "choreeq/equilibrium.hpp"
#include "choreeq/instance.hpp"

namespace choreeq {

// Brute-force companions to the geometry and equilibrium modules. They share
// no solver machinery: everything here is plain enumeration, so agreement
// with the optimization paths is meaningful evidence.

struct GridSpec {
  int resolution = 10;  // grid steps per unit of each chore
};

// Hard cap on enumerated grid points.
inline constexpr double kGridPointCap = 1e8;

struct GridNearestResult {
  double distance = 0.0;
  Mat x_best;
};

// Minimum of ||D(x) - query|| over allocations whose columns lie on the
// resolution-step simplex grid. Within Lip * (m / resolution) of the true
// nearest-point distance.
GridNearestResult grid_nearest_point(const ProfileMap& pm, const Vec& query, const GridSpec& g);

struct KktCandidate {
  Vec d;       // boundary profile
  Vec normal;  // supporting direction scaled so <normal, d> = n
  double gamma_achieved = 0.0;
};

// Two-agent scan of the lower boundary of the feasible profile region:
// builds the Pareto hull of the grid profile cloud and reports every hull
// point whose supporting directions pass the gamma-KKT test. Exhibits
// multiple disconnected KKT clusters on crafted instances.
std::vector<KktCandidate> grid_kkt_scan(const Mat& D, const GridSpec& g, double gamma);

struct ExhaustiveReport {
  bool pass = false;
  bool cond_income = false;
  bool cond_bundle = false;
  bool cond_feasible = false;
  EqResiduals residuals;
};

// Equilibrium verification with condition (2) decided by enumerating budget
// bundles on a grid of the price simplex instead of closed forms or convex
// solves.
ExhaustiveReport exhaustive_verify(const ProfileMap& pm, const Mat& x, const Vec& p,
                                   double epsilon, const GridSpec& g);

}  // namespace choreeq
