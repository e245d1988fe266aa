#pragma once

#include <optional>

#include "choreeq/disutility.hpp"
#include "choreeq/instance.hpp"
#include "choreeq/solver.hpp"

namespace choreeq {

enum class EqMode { kLinearStrong, kGeneral };

// Violation levels of the three equilibrium conditions, in epsilon units:
// a residual of r means the condition holds at every eps >= r.
struct EqResiduals {
  double income_ratio_worst = 0.0;
  double optimal_bundle_worst = 0.0;
  double feasibility_worst = 0.0;
};

struct EquilibriumCertificate {
  Mat x;
  Vec p;
  double epsilon = 0.0;
  EqResiduals residuals;
  EqMode mode = EqMode::kLinearStrong;
  Vec earnings;  // <x_i, p> per agent
  Vec weights;   // eta used by condition (1)
};

struct VerifyReport {
  bool pass = false;
  bool cond_income = false;
  bool cond_bundle = false;
  bool cond_feasible = false;
  EqResiduals residuals;
  Vec earnings;
  Vec optimal_bundle;  // cheapest disutility attaining each agent's earnings
};

// Best achievable disutility for one agent at earning target `budget`:
// min D_i(y) over y >= 0 with <y, p> >= budget. Linear oracles use the
// exact dual interval (handles zero and negative prices); CES oracles are
// minimized over the price simplex to tolerance about 1e-8. Returns
// -infinity when earning the budget is compatible with unboundedly
// negative disutility.
double optimal_bundle_disutility(const DisutilityOracle& oracle, const Vec& p, double budget);

// Checks the three equilibrium conditions directly from (x, p), without
// consulting any solver state. Weighted incomes compare <x_i,p>/eta_i.
VerifyReport verify_ceei(const ProfileMap& pm, const Mat& x, const Vec& p, double epsilon,
                         const std::optional<Vec>& weights = std::nullopt);
VerifyReport verify_ceei(const Instance& inst, const Mat& x, const Vec& p, double epsilon,
                         const std::optional<Vec>& weights = std::nullopt);

// Turns a linear KKT certificate into an equilibrium: prices
// p_j = min_i a_i D_ij, allocation re-solved to realize the certificate
// profile within 1e-9, epsilon = 2 (gamma - 1).
EquilibriumCertificate from_kkt_linear(const Mat& D, const KktCertificate& cert,
                                       const SupportMask* mask = nullptr);
EquilibriumCertificate from_kkt_linear(const Instance& inst, const KktCertificate& cert);

// General certificate: allocation kept as-is, prices p_j = min_i a_i
// dD_i/dx_ij evaluated at the allocation where the certifying half-space
// touches the feasible region, epsilon = max{3 (gamma - 1) + 5 delta,
// lambda - 1}.
EquilibriumCertificate from_kkt_general(const ProfileMap& pm, const KktCertificate& cert);

// Column-normalizes an approximately feasible allocation: y_ij = x_ij / a_j
// with a_j the column sum. Each disutility moves by a factor inside
// [1/max_j a_j, 1/min_j a_j]; asserted for monotone (chores) profiles.
Allocation ef_po_round(const ProfileMap& pm, const Mat& x);

struct EfReport {
  bool pass = false;
  double min_ratio = 0.0;  // min over ordered pairs of D_i(y_i') / D_i(y_i)
  long pairs = 0;
};

// Envy check: pass iff D_i(y_i') >= (1 - 4 eps) D_i(y_i) for every ordered
// pair (i, i').
EfReport check_ef(const ProfileMap& pm, const Mat& y, double epsilon);

struct PoReport {
  bool pass = false;
  double t_star = 1.0;    // smallest t with {x in F : D(x) <= t D(y)} nonempty
  double threshold = 0.0; // 1 - 2 eps - 1e-9
};

// Pareto check: pass iff no feasible allocation scales every agent's
// disutility below (1 - 2 eps). Decided by hinge feasibility at the
// threshold; t_star is bisected for reporting.
PoReport check_po(const ProfileMap& pm, const Mat& y, double epsilon);

}  // namespace choreeq
