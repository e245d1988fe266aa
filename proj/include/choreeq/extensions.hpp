#pragma once

#include <optional>
#include <vector>

#include "choreeq/equilibrium.hpp"
#include "choreeq/instance.hpp"
#include "choreeq/projection.hpp"
#include "choreeq/solver.hpp"

namespace choreeq {

enum class MixedCategory { kPositive, kNull, kNegative };

struct MixedClassification {
  MixedCategory category = MixedCategory::kNegative;
  // Feasibility witness for the category's defining program (Positive and
  // Null cases; empty for Negative).
  Allocation witness;
  double witness_value = 0.0;            // attained min utility over N+ (Positive)
  std::vector<std::uint8_t> positive_agents;  // N+ membership per agent
};

// Decides which of the three mixed-manna regimes the instance is in, by the
// two feasibility programs: a positive witness gives every N+ agent utility
// above 1e-9 while N- agents stay at zero; a null witness zeroes everyone.
MixedClassification classify_mixed(const Instance& inst);

struct MixedSolution {
  MixedCategory category = MixedCategory::kNegative;
  Mat x;
  Vec p;
  Vec utilities;  // U_i(x_i), utility framing (U = -D)
  // Populated on the Negative path, which routes through the chores solver.
  std::optional<KktCertificate> kkt;
  std::optional<EquilibriumCertificate> eq;
  // Variable eliminations applied on the Negative path.
  SupportMask mask;
};

// Full mixed-manna pipeline: classify, then solve the matching regime.
// Positive: Eisenberg-Gale utility program with free disposal of goods.
// Null: zero-utility witness at zero prices. Negative: exterior-point
// chores solve on the disutility view with Pareto-dominated variables
// pinned to zero.
MixedSolution solve_mixed(const Instance& inst, double epsilon,
                          const SolverParams* overrides = nullptr);

// Strictly positive, strictly infeasible starting profile for the Negative
// regime, located by halving/bisection along the diagonal ray. The optional
// mask restricts the feasible region to non-eliminated variables.
Vec initial_point_mixed_negative(const Instance& inst, const SupportMask* mask = nullptr);

// Variable eliminations for the Negative regime: a chore that is a good for
// somebody never goes to an agent who dislikes it.
SupportMask negative_case_mask(const Mat& D);

// Unequal-income solve: normalizes eta to max 1, runs the weighted
// exterior-point loop, and converts through the matching pipeline. The raw
// KKT certificate is copied out when requested.
EquilibriumCertificate solve_weighted(const Instance& inst, const Vec& eta, double epsilon,
                                      const SolverParams* overrides = nullptr,
                                      KktCertificate* kkt_out = nullptr);

}  // namespace choreeq
