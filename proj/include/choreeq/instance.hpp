#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

namespace choreeq {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// An allocation is an n x m matrix; row i is agent i's bundle.
using Allocation = Mat;

enum class Mode { kChoresOnly, kMixedManna };

// One agent's disutility function: either linear with per-chore coefficients,
// or CES with coefficients c and exponent rho >= 1.
struct DisutilitySpec {
  enum class Kind { kLinear, kCes };

  Kind kind = Kind::kLinear;
  Vec coeffs;         // length m
  double rho = 1.0;   // CES only

  static DisutilitySpec linear(Vec c);
  static DisutilitySpec ces(Vec c, double rho);

  bool is_linear() const { return kind == Kind::kLinear; }
};

// Chores removed during preprocessing: chore `j` (original index) had a zero
// linear coefficient for `agent`, so it leaves the optimization and is later
// re-inserted fully assigned to that agent at price zero. The original
// coefficient column is kept so the full instance can be reconstructed.
struct RemovedChore {
  int j = 0;
  int agent = 0;
  Vec coeffs;  // length n
};

struct Instance {
  int n = 0;  // agents
  int m = 0;  // chores (after preprocessing)
  Mode mode = Mode::kChoresOnly;
  std::vector<DisutilitySpec> disutilities;  // length n
  std::optional<Vec> weights;                // length n, strictly positive

  std::vector<RemovedChore> removed;  // preprocessing record
  int original_m = 0;                 // chore count before preprocessing

  bool all_linear() const;
  // Dense coefficient matrix; requires all_linear().
  Mat linear_matrix() const;
};

// Parses and validates an instance from JSON text, then applies
// preprocessing (zero-coefficient chore stripping). Throws ParseError on
// malformed input, ValidationError / InfiniteDisutilityError on bad values.
Instance parse_instance(const std::string& json_text);

// Validation + preprocessing for programmatically built instances.
// Idempotent: applying it to its own output changes nothing.
Instance validate_and_preprocess(Instance inst);

// Serializes the (preprocessed) instance; parse_instance on the result
// yields an identical Instance.
std::string serialize_instance(const Instance& inst);

struct AllocationReport {
  bool feasible_exact = false;    // x >= -tol and |column sums - 1| <= tol
  bool feasible_relaxed = false;  // x >= -tol and column sums >= 1 - tol
  double max_column_residual = 0.0;
};

AllocationReport validate_allocation(const Instance& inst, const Allocation& x,
                                     double tol = 1e-9);

// Re-inserts preprocessed chores into an allocation/price vector expressed
// over the reduced chore set, restoring original chore indexing.
Allocation reinsert_allocation(const Instance& inst, const Allocation& x_core);
Vec reinsert_prices(const Instance& inst, const Vec& p_core);

// Undoes preprocessing: rebuilds the instance over the original chore set,
// including the stripped zero-coefficient columns. Identity when nothing
// was removed.
Instance restore_original(const Instance& inst);

}  // namespace choreeq
