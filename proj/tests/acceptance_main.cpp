// End-to-end acceptance suite. Each numbered check prints exactly one
// [PASS]/[FAIL] line; the exit code is the number of failures, so the
// binary doubles as a CI gate and as a quick health report:
//
//   ./acceptance_tests
//
// The checks are seeded and deterministic; no network, no files.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "choreeq/disutility.hpp"
#include "choreeq/equilibrium.hpp"
#include "choreeq/extensions.hpp"
#include "choreeq/generate.hpp"
#include "choreeq/geometry.hpp"
#include "choreeq/oracle.hpp"
#include "choreeq/solver.hpp"

using namespace choreeq;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] %2d. %-38s %s\n", pass ? "PASS" : "FAIL", number, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  char buf[256];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

Mat random_feasible(int n, int m, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  Mat x(n, m);
  for (int j = 0; j < m; ++j) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += (x(i, j) = e(rng));
    x.col(j) /= s;
  }
  return x;
}

// One linear end-to-end run with everything later checks need.
struct LinearRun {
  Instance inst;
  double epsilon = 0.0;
  KktCertificate cert;
  EquilibriumCertificate eq;
  VerifyReport verify;
};

std::vector<LinearRun> g_linear_runs;  // produced by check 1, reused by 2-4 and 8

void check_linear_pipeline() {
  auto t0 = Clock::now();
  double worst_income = 0.0, worst_bundle = 0.0, worst_feas = 0.0;
  int failures = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    GenOptions opts;
    opts.n = 2 + static_cast<int>(seed % 5);
    opts.m = 2 + static_cast<int>((seed / 5) % 5);
    opts.seed = seed;
    Instance inst = generate_instance(opts);
    for (double eps : {0.1, 0.02}) {
      SolverParams params;
      params.epsilon = eps;
      LinearRun run;
      run.inst = inst;
      run.epsilon = eps;
      run.cert = solve_kkt_linear(inst, params);
      run.eq = from_kkt_linear(inst, run.cert);
      run.verify = verify_ceei(inst, run.eq.x, run.eq.p, 2.0 * eps);
      if (!run.verify.pass) ++failures;
      worst_income = std::max(worst_income, run.verify.residuals.income_ratio_worst);
      worst_bundle = std::max(worst_bundle, run.verify.residuals.optimal_bundle_worst);
      worst_feas = std::max(worst_feas, run.verify.residuals.feasibility_worst);
      if (run.verify.residuals.optimal_bundle_worst > 1e-7) ++failures;
      if (run.verify.residuals.feasibility_worst > 1e-7) ++failures;
      g_linear_runs.push_back(std::move(run));
    }
  }
  double secs = seconds_since(t0);
  bool pass = failures == 0 && secs < 60.0;
  report(1, "linear pipeline end to end", pass,
         fmt("200 runs, worst residuals %.1e/%.1e/%.1e, %.1fs", worst_income, worst_bundle,
             worst_feas, secs));
}

void check_potential_progress() {
  long violations = 0;
  double min_margin = 1e300;
  for (const auto& run : g_linear_runs) {
    ProgressReport rep = progress_check(run.cert.potential_trace, run.epsilon, run.inst.n);
    if (!rep.pass) ++violations;
    violations += rep.monotonicity_violations;
    min_margin = std::min(min_margin, rep.min_gain - rep.required_gain);
  }
  report(2, "potential monotonicity and progress", violations == 0,
         fmt("%zu traces, %ld violations, slimmest margin %.2e", g_linear_runs.size(),
             violations, min_margin));
}

void check_iteration_bound() {
  long violations = 0;
  double tightest = 1e300;
  for (const auto& run : g_linear_runs) {
    Mat D = run.inst.linear_matrix();
    long bound = iteration_bound_linear(run.inst.n, run.inst.m, run.epsilon, D.minCoeff(),
                                        D.maxCoeff());
    if (run.cert.iterations > bound) ++violations;
    tightest = std::min(tightest, static_cast<double>(bound - run.cert.iterations));
  }
  report(3, "iteration count stays under the bound", violations == 0,
         fmt("%zu runs, %ld violations, min headroom %.0f", g_linear_runs.size(), violations,
             tightest));
}

void check_certificates() {
  std::mt19937_64 rng(2024);
  long violations = 0;
  double worst_support = 1e300;
  for (const auto& run : g_linear_runs) {
    const KktCertificate& c = run.cert;
    for (int i = 0; i < run.inst.n; ++i) {
      double prod = c.a[i] * c.d[i];
      if (prod < 1.0 / c.gamma - 1e-9 || prod > c.gamma + 1e-9) ++violations;
    }
    ProfileMap pm = make_profile_map(run.inst);
    double floor = c.b - std::max(c.delta, 1e-6);
    for (int s = 0; s < 1000; ++s) {
      Mat x = random_feasible(run.inst.n, run.inst.m, rng);
      double side = c.a.dot(pm.profile(x));
      worst_support = std::min(worst_support, side - floor);
      if (side < floor) ++violations;
    }
  }
  report(4, "kkt certificates are self-consistent", violations == 0,
         fmt("%zu certs x 1000 samples, %ld violations, support margin %.2e",
             g_linear_runs.size(), violations, worst_support));
}

void check_general_pipeline() {
  auto t0 = Clock::now();
  int failures = 0;
  double worst_eps = 0.0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    GenOptions opts;
    opts.kind = GenKind::kCes;
    opts.n = 2 + static_cast<int>(seed % 3);
    opts.m = 2 + static_cast<int>((seed / 3) % 3);
    opts.rho = (seed % 2 == 0) ? 1.5 : 2.0;
    opts.seed = 1000 + seed;
    Instance inst = generate_instance(opts);
    ProfileMap pm = make_profile_map(inst);
    SolverParams params;
    params.epsilon = 0.05;
    KktCertificate cert = solve_kkt_general(pm, params);
    double eps_eff =
        std::max(3.0 * (cert.gamma - 1.0) + 5.0 * cert.delta, cert.lambda - 1.0);
    worst_eps = std::max(worst_eps, eps_eff);
    if (eps_eff > 0.2) {
      ++failures;
      continue;
    }
    EquilibriumCertificate eq = from_kkt_general(pm, cert);
    VerifyReport rep = verify_ceei(pm, eq.x, eq.p, eq.epsilon);
    if (!rep.pass) ++failures;
  }
  double secs = seconds_since(t0);
  bool pass = failures == 0 && secs < 600.0;
  report(5, "general pipeline on ces instances", pass,
         fmt("30 runs, %d failures, worst effective eps %.3f, %.1fs", failures, worst_eps,
             secs));
}

void check_cross_path() {
  int failures = 0;
  double worst_gap = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GenOptions opts;
    opts.n = 2 + static_cast<int>(seed % 3);
    opts.m = 2 + static_cast<int>((seed / 2) % 3);
    opts.seed = 2000 + seed;
    Instance inst = generate_instance(opts);
    const double eps = 0.05;
    SolverParams params;
    params.epsilon = eps;
    KktCertificate lin_cert = solve_kkt_linear(inst, params);
    EquilibriumCertificate lin = from_kkt_linear(inst, lin_cert);
    VerifyReport lin_rep = verify_ceei(inst, lin.x, lin.p, 2.0 * eps);

    ProfileMap pm = make_profile_map(inst);
    KktCertificate gen_cert = solve_kkt_general(pm, params);
    EquilibriumCertificate gen = from_kkt_general(pm, gen_cert);
    VerifyReport gen_rep = verify_ceei(inst, gen.x, gen.p, gen.epsilon);

    if (!lin_rep.pass || !gen_rep.pass) ++failures;
    double gap = std::max(
        {gen_rep.residuals.income_ratio_worst - lin_rep.residuals.income_ratio_worst,
         gen_rep.residuals.optimal_bundle_worst - lin_rep.residuals.optimal_bundle_worst,
         gen_rep.residuals.feasibility_worst - lin_rep.residuals.feasibility_worst});
    worst_gap = std::max(worst_gap, gap);
    if (gap > 10.0 * eps) ++failures;
  }
  report(6, "general path agrees on linear input", failures == 0,
         fmt("20 instances, %d failures, worst residual gap %.2e", failures, worst_gap));
}

void check_oracle_equivalence() {
  GridSpec g;
  g.resolution = 200;
  int failures = 0;
  double worst_dist_gap = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GenOptions opts;
    opts.n = 2;
    opts.m = 2;
    opts.seed = 3000 + seed;
    Instance inst = generate_instance(opts);
    ProfileMap pm = make_profile_map(inst);

    Vec q = initial_point_linear(inst);
    double qp = nearest_point_linear(inst, q).distance;
    double grid = grid_nearest_point(pm, q, g).distance;
    double gap = std::abs(qp - grid);
    worst_dist_gap = std::max(worst_dist_gap, gap);
    if (gap > pm.lipschitz() * (2.0 / g.resolution) + 1e-8) ++failures;

    SolverParams params;
    params.epsilon = 0.1;
    KktCertificate cert = solve_kkt_linear(inst, params);
    EquilibriumCertificate eq = from_kkt_linear(inst, cert);
    // verdicts must agree on a good equilibrium and on a corrupted one
    bool cv = verify_ceei(pm, eq.x, eq.p, 0.2).pass;
    bool ex = exhaustive_verify(pm, eq.x, eq.p, 0.2, g).pass;
    if (cv != ex || !cv) ++failures;
    Mat corrupted = eq.x.colwise().reverse();
    bool cv_bad = verify_ceei(pm, corrupted, eq.p, 0.05).pass;
    bool ex_bad = exhaustive_verify(pm, corrupted, eq.p, 0.05, g).pass;
    if (cv_bad != ex_bad) ++failures;
  }
  report(7, "grid oracles agree with the solvers", failures == 0,
         fmt("20 instances, %d failures, worst distance gap %.2e", failures, worst_dist_gap));
}

void check_ef_po() {
  int failures = 0;
  double worst_ef = 1e300, worst_po = 1e300;
  for (const auto& run : g_linear_runs) {
    ProfileMap pm = make_profile_map(run.inst);
    Mat y = ef_po_round(pm, run.eq.x);
    EfReport ef = check_ef(pm, y, run.epsilon);
    PoReport po = check_po(pm, y, run.epsilon);
    if (!ef.pass || !po.pass) ++failures;
    worst_ef = std::min(worst_ef, ef.min_ratio);
    worst_po = std::min(worst_po, po.t_star);
  }
  report(8, "rounded allocations stay ef and po", failures == 0,
         fmt("%zu runs, %d failures, min envy ratio %.3f, min t* %.3f", g_linear_runs.size(),
             failures, worst_ef, worst_po));
}

void check_mixed_manna() {
  int failures = 0;
  int positives = 0, nulls = 0, negatives = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    GenOptions opts;
    opts.kind = GenKind::kMixed;
    opts.n = 2 + static_cast<int>(seed % 3);
    opts.m = 2 + static_cast<int>((seed / 3) % 3);
    opts.seed = 4000 + seed;
    Instance inst = generate_instance(opts);
    Mat U = -inst.linear_matrix();
    MixedClassification cls = classify_mixed(inst);
    switch (cls.category) {
      case MixedCategory::kPositive: {
        ++positives;
        // every agent who likes something must gain from the witness
        Vec u = U.cwiseProduct(cls.witness).rowwise().sum();
        for (int i = 0; i < inst.n; ++i) {
          if (cls.positive_agents[i] && u[i] <= 1e-9) ++failures;
          if (!cls.positive_agents[i] && std::abs(u[i]) > 1e-7) ++failures;
        }
        break;
      }
      case MixedCategory::kNull: {
        ++nulls;
        Vec u = U.cwiseProduct(cls.witness).rowwise().sum();
        if (u.cwiseAbs().maxCoeff() > 1e-7) ++failures;
        break;
      }
      case MixedCategory::kNegative: {
        ++negatives;
        MixedSolution sol = solve_mixed(inst, 0.05);
        if (!sol.eq) {
          ++failures;
          break;
        }
        VerifyReport rep = verify_ceei(inst, sol.x, sol.p, 0.1);
        if (!rep.pass) ++failures;
        break;
      }
    }
  }

  // identical pure-goods agents split everything evenly
  Instance goods;
  goods.n = 2;
  goods.m = 3;
  goods.original_m = 3;
  goods.mode = Mode::kMixedManna;
  for (int i = 0; i < 2; ++i) goods.disutilities.push_back(DisutilitySpec::linear(Vec::Constant(3, -1.0)));
  goods = validate_and_preprocess(goods);
  MixedSolution eg = solve_mixed(goods, 0.05);
  if (eg.category != MixedCategory::kPositive) ++failures;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      if (std::abs(eg.x(i, j) - 0.5) > 1e-6) ++failures;

  report(9, "mixed manna trichotomy", failures == 0,
         fmt("30 instances (%d pos/%d null/%d neg), %d failures", positives, nulls, negatives,
             failures));
}

void check_weighted_incomes() {
  int failures = 0;
  const double eps = 0.05;
  Instance inst;
  inst.n = 2;
  inst.m = 2;
  inst.original_m = 2;
  for (int i = 0; i < 2; ++i) inst.disutilities.push_back(DisutilitySpec::linear(Vec::Ones(2)));
  inst = validate_and_preprocess(inst);

  Vec eta(2);
  eta << 1.0, 0.5;
  EquilibriumCertificate weighted = solve_weighted(inst, eta, eps);
  double ratio = weighted.earnings[0] / weighted.earnings[1];
  if (ratio < (1.0 - 2.0 * eps) * 2.0 || ratio > 2.0 / (1.0 - 2.0 * eps)) ++failures;

  SolverParams params;
  params.epsilon = eps;
  KktCertificate plain_cert = solve_kkt_linear(inst, params);
  EquilibriumCertificate plain = from_kkt_linear(inst, plain_cert);
  EquilibriumCertificate unit = solve_weighted(inst, Vec::Ones(2), eps);
  bool identical = (plain.x - unit.x).cwiseAbs().maxCoeff() == 0.0 &&
                   (plain.p - unit.p).cwiseAbs().maxCoeff() == 0.0 &&
                   (plain.earnings - unit.earnings).cwiseAbs().maxCoeff() == 0.0;
  if (!identical) ++failures;

  report(10, "weighted incomes", failures == 0,
         fmt("earnings ratio %.4f, unit weights identical: %s", ratio,
             identical ? "yes" : "no"));
}

void check_oracle_properties() {
  std::mt19937_64 rng(777);
  std::uniform_real_distribution<double> uc(0.5, 3.0);
  std::uniform_real_distribution<double> ux(0.05, 2.0);
  std::uniform_real_distribution<double> ua(0.0, 10.0);
  const double rhos[] = {1.5, 2.0, 3.0};
  int failures = 0;
  for (int s = 0; s < 1000; ++s) {
    int m = 2 + static_cast<int>(rng() % 3);
    Vec c(m);
    for (int j = 0; j < m; ++j) c[j] = uc(rng);
    DisutilitySpec spec = (s % 2 == 0)
                              ? DisutilitySpec::linear(c)
                              : DisutilitySpec::ces(c, rhos[(s / 2) % 3]);
    DisutilityOracle o(spec);
    Vec x(m), q(m);
    for (int j = 0; j < m; ++j) {
      x[j] = ux(rng);
      q[j] = ux(rng);
    }
    double a = ua(rng);
    if (std::abs(o.value(a * x) - a * o.value(x)) > 1e-10 * (1.0 + o.value(x))) ++failures;
    if (o.value(x + q) > o.value(x) + o.value(q) + 1e-10) ++failures;
    Vec g = o.gradient(x);
    if (std::abs(g.dot(x) - o.value(x)) > 1e-8 * (1.0 + std::abs(o.value(x)))) ++failures;
    for (int j = 0; j < m; ++j) {
      Vec hi = x, lo = x;
      hi[j] += 1e-6;
      lo[j] -= 1e-6;
      double fd = (o.value(hi) - o.value(lo)) / 2e-6;
      if (std::abs(g[j] - fd) > 1e-4 * (1.0 + std::abs(fd))) ++failures;
    }
  }
  report(11, "disutility oracle properties", failures == 0,
         fmt("1000 samples, %d violations", failures));
}

}  // namespace

int main() {
  check_linear_pipeline();
  check_potential_progress();
  check_iteration_bound();
  check_certificates();
  check_general_pipeline();
  check_cross_path();
  check_oracle_equivalence();
  check_ef_po();
  check_mixed_manna();
  check_weighted_incomes();
  check_oracle_properties();
  if (g_failures == 0) {
    std::printf("all acceptance checks passed\n");
  } else {
    std::printf("%d acceptance check(s) failed\n", g_failures);
  }
  return g_failures;
}
