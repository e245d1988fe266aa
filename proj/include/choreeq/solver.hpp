#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "choreeq/disutility.hpp"
#include "choreeq/geometry.hpp"
#include "choreeq/instance.hpp"

namespace choreeq {

struct SolverParams {
  double epsilon = 0.05;
  // Split tolerances for the general loop; derived from epsilon when zero.
  // eps1: nearest-point accuracy, eps2: early-stop distance, eps3: logd stop.
  double eps1 = 0.0;
  double eps2 = 0.0;
  double eps3 = 0.0;
  long max_iters = 100000;
  double qp_tol = 1e-12;
  bool record_trace = true;
  std::optional<Vec> weights;    // eta, strictly positive; ones if absent
  std::optional<Vec> initial_d;  // override for the starting iterate
  SupportMask mask;              // eliminated variables (mixed mode)
};

// Fills eps1..eps3 from epsilon, the instance dimensions, and the Lipschitz
// constant. eps3 = epsilon; eps1 = epsilon*1e-6/(n^4 m^4 L^6);
// eps2 = n^4 m^3 L^3 eps1^(1/6) clamped below eps3/10; eps1 is then capped
// at eps2^3/(48 n^7 m L^6) so the split stays admissible for any L.
SolverParams derive_params(double epsilon, int n, int m, double L);

struct TraceRow {
  long iter = 0;
  double potential = 0.0;
  double dist_to_feasible = 0.0;
  double logd_step = std::numeric_limits<double>::quiet_NaN();
  std::string branch;  // "continue" | "stop_logd" | "stop_near"
};

std::string trace_to_csv(const std::vector<TraceRow>& rows);

struct KktCertificate {
  Vec a;  // hyperplane normal
  Vec d;  // disutility profile on the hyperplane
  Mat x;  // allocation realizing d
  // Measured certificate quantities (tight, not worst-case analytic bounds).
  double gamma = 1.0;
  double lambda = 1.0;
  double delta = 0.0;
  double delta_analytic = 0.0;
  double b = 0.0;  // hyperplane offset, equals the weight sum
  long iterations = 0;
  // Interleaved checkpoints L(d^k), L(d^k_*) for every iteration performed.
  std::vector<double> potential_trace;
  std::vector<TraceRow> trace;
  std::string stop_reason;  // "logd" | "near_feasible"
  double epsilon_run = 0.0;
  Vec weights;
};

// Weighted log Nash social welfare sum_i eta_i log d_i.
double log_nsw(const Vec& d, const std::optional<Vec>& weights = std::nullopt);

// logd(x, y) = sum_i |log(x_i / y_i)|.
double log_dist(const Vec& x, const Vec& y);

// Strictly infeasible start (m * min D_ij / (2n)) * ones for linear chores.
Vec initial_point_linear(const Mat& D);
Vec initial_point_linear(const Instance& inst);

// Tiny uniform allocation 1/(2 n m L^2) per entry; the profile is strictly
// positive with every entry at most 1/(2nL), hence strictly infeasible.
std::pair<Mat, Vec> initial_point_general(const ProfileMap& pm);

// Exterior-point loop for linear disutilities. Produces a gamma-KKT
// certificate with gamma about 1 + epsilon, exact feasibility, and an
// exactly supporting hyperplane up to QP tolerance.
KktCertificate solve_kkt_linear(const Mat& D, const SolverParams& params);
KktCertificate solve_kkt_linear(const Instance& inst, const SolverParams& params);

// Exterior-point loop with approximate nearest points for 1-homogeneous
// convex oracles (Algorithm with the eps1/eps2/eps3 split).
KktCertificate solve_kkt_general(const ProfileMap& pm, const SolverParams& params);

// Worst-case iteration count of the linear loop.
long iteration_bound_linear(int n, int m, double epsilon, double min_coeff, double max_coeff);

struct ProgressReport {
  bool pass = false;
  long iterations = 0;
  double min_gain = 0.0;
  double required_gain = 0.0;
  long monotonicity_violations = 0;
  double worst_violation = 0.0;
};

// Validates a potential trace: nondecreasing checkpoints, and every
// non-terminal iteration gains at least eps^2 * min(eta) / (16 n^2) - 1e-12.
ProgressReport progress_check(const std::vector<double>& potential_trace, double epsilon, int n,
                              const std::optional<Vec>& weights = std::nullopt);

}  // namespace choreeq
