#include <doctest.h>

#include <cmath>
#include <random>

#include "choreeq/errors.hpp"
#include "choreeq/geometry.hpp"
#include "choreeq/solver.hpp"
#include "helpers.hpp"

using namespace choreeq;
using namespace choreeq::testing;

TEST_CASE("log nsw") {
  CHECK(log_nsw(vec({1, 1, 1})) == 0.0);
  CHECK(log_nsw(vec({std::exp(1.0), std::exp(1.0)})) == doctest::Approx(2.0));
  CHECK(log_nsw(vec({std::exp(1.0), 1}), vec({3, 5})) == doctest::Approx(3.0));
  CHECK_THROWS_AS(log_nsw(vec({1, 0})), NonpositiveEntry);
}

TEST_CASE("log distance") {
  Vec x = vec({0.7, 1.3});
  CHECK(log_dist(x, x) == 0.0);
  CHECK(log_dist(vec({std::exp(1.0), 1}), vec({1, 1})) == doctest::Approx(1.0));
  CHECK(log_dist(vec({2, 0.5}), vec({1, 1})) == doctest::Approx(2.0 * std::log(2.0)));
  CHECK(log_dist(vec({2, 0.5}), vec({1, 1})) == log_dist(vec({1, 1}), vec({2, 0.5})));
  CHECK_THROWS_AS(log_dist(vec({-1, 1}), vec({1, 1})), NonpositiveEntry);
}

TEST_CASE("linear starting point") {
  Mat D(2, 3);
  D << 2, 3, 4, 5, 2, 6;
  Vec d0 = initial_point_linear(D);
  CHECK(d0[0] == doctest::Approx(1.5));  // m * min D / (2n) = 3*2/4
  CHECK(d0[1] == doctest::Approx(1.5));

  Mat single(1, 1);
  single << 4;
  CHECK(initial_point_linear(single)[0] == doctest::Approx(2.0));

  // strictly below the feasible region on random instances
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 2 + static_cast<int>(rng() % 3);
    int m = 2 + static_cast<int>(rng() % 3);
    Instance inst = linear_instance(random_matrix(n, m, rng));
    Vec d = initial_point_linear(inst);
    CHECK(nearest_point_linear(inst, d).distance > 1e-6);
  }
}

TEST_CASE("general starting point") {
  std::vector<DisutilityOracle> oracles;
  oracles.emplace_back(DisutilitySpec::linear(vec({1, 1})));
  ProfileMap pm(std::move(oracles));
  auto [x0, d0] = initial_point_general(pm);
  CHECK(d0[0] == doctest::Approx(0.5));
  CHECK(d0.minCoeff() > 0.0);
  // every profile entry stays at most 1/(2nL)
  CHECK(d0.maxCoeff() <= 0.5 + 1e-12);
  CHECK(membership_distance(pm, d0) > 1e-3);
}

TEST_CASE("exterior point loop on the symmetric 2x2") {
  Mat D = mat2({{1, 2}, {2, 1}});
  SolverParams params;
  params.epsilon = 0.01;
  KktCertificate cert = solve_kkt_linear(D, params);

  CHECK(cert.gamma >= 1.0);
  CHECK(cert.gamma <= 1.02);
  CHECK(cert.lambda <= 1.0 + 1e-9);
  CHECK(cert.delta <= 1e-7);
  CHECK(std::abs(cert.d[0] - 1.0) <= 0.05);
  CHECK(std::abs(cert.d[1] - 1.0) <= 0.05);
  CHECK(std::abs(cert.a[0] - 1.0) <= 0.05);

  // the kkt inequality gamma^-1 <= a_i d_i <= gamma per agent
  for (int i = 0; i < 2; ++i) {
    double prod = cert.a[i] * cert.d[i];
    CHECK(prod >= 1.0 / cert.gamma - 1e-12);
    CHECK(prod <= cert.gamma + 1e-12);
  }

  // allocation exactly feasible, profile realized
  for (int j = 0; j < 2; ++j) CHECK(cert.x.col(j).sum() == doctest::Approx(1.0).epsilon(1e-9));
  Vec prof = D.cwiseProduct(cert.x).rowwise().sum();
  CHECK((prof - cert.d).cwiseAbs().maxCoeff() <= 1e-8 * (1.0 + cert.d.cwiseAbs().maxCoeff()));

  // hyperplane offset matches the weight sum and supports the region
  CHECK(cert.b == doctest::Approx(2.0));
  CHECK(min_weighted_profile_linear(D, cert.a) >= cert.b - 1e-7);
}

TEST_CASE("single agent instances are degenerate") {
  Mat D(1, 3);
  D << 1, 2, 3;
  SolverParams params;
  params.epsilon = 0.05;
  KktCertificate cert = solve_kkt_linear(D, params);
  CHECK(cert.d[0] == doctest::Approx(6.0).epsilon(0.06));
  double prod = cert.a[0] * cert.d[0];
  CHECK(prod >= 1.0 / (1.0 + 0.05) - 1e-9);
  CHECK(prod <= 1.05 + 1e-9);
}

TEST_CASE("identical agents split evenly") {
  const double c = 3.0;
  Mat D = Mat::Constant(3, 4, c);
  SolverParams params;
  params.epsilon = 0.02;
  KktCertificate cert = solve_kkt_linear(D, params);
  for (int i = 0; i < 3; ++i) {
    CHECK(cert.d[i] == doctest::Approx(4.0 * c / 3.0).epsilon(0.05));
  }
}

TEST_CASE("progress and iteration accounting") {
  std::mt19937_64 rng(23);
  Mat D = random_matrix(3, 4, rng);
  SolverParams params;
  params.epsilon = 0.05;
  KktCertificate cert = solve_kkt_linear(D, params);

  ProgressReport rep = progress_check(cert.potential_trace, 0.05, 3);
  CHECK(rep.pass);
  CHECK(rep.monotonicity_violations == 0);

  long bound = iteration_bound_linear(3, 4, 0.05, D.minCoeff(), D.maxCoeff());
  CHECK(cert.iterations <= bound);
  CHECK(cert.iterations >= 1);

  // trace rows cover every iteration
  CHECK(static_cast<long>(cert.trace.size()) == cert.iterations);
  CHECK(cert.trace.back().branch != "continue");
}

TEST_CASE("progress check flags a constructed stall") {
  // entries come in (L(d), L(d_+)) pairs, so a stall is two consecutive
  // iterations whose pair starts barely move
  std::vector<double> trace = {0.0, 1e-16, 2e-16, 3e-16};
  ProgressReport rep = progress_check(trace, 0.1, 2);
  CHECK_FALSE(rep.pass);
  CHECK(rep.min_gain <= 1e-14);

  std::vector<double> decreasing = {0.0, 0.5, 0.4, 0.6};
  rep = progress_check(decreasing, 0.1, 2);
  CHECK_FALSE(rep.pass);
  CHECK(rep.monotonicity_violations >= 1);

  // an odd-length trace cannot be paired up
  std::vector<double> odd = {0.0, 0.5, 0.6};
  CHECK_THROWS_AS(progress_check(odd, 0.1, 2), ValidationError);
}

TEST_CASE("iteration cap raises with partial trace attached") {
  std::mt19937_64 rng(29);
  Mat D = random_matrix(3, 4, rng);
  SolverParams params;
  params.epsilon = 0.01;
  params.max_iters = 1;
  try {
    solve_kkt_linear(D, params);
    FAIL("expected the cap to trip");
  } catch (const IterationCapExceeded& e) {
    CHECK(!e.partial_trace.empty());
  }
}

TEST_CASE("deterministic given identical params") {
  std::mt19937_64 rng(31);
  Mat D = random_matrix(4, 3, rng);
  SolverParams params;
  params.epsilon = 0.05;
  KktCertificate c1 = solve_kkt_linear(D, params);
  KktCertificate c2 = solve_kkt_linear(D, params);
  CHECK((c1.d - c2.d).cwiseAbs().maxCoeff() == 0.0);
  CHECK((c1.x - c2.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK(c1.iterations == c2.iterations);
}

TEST_CASE("epsilon split derivation keeps the ordering") {
  for (double eps : {0.1, 0.02}) {
    for (int n : {2, 4}) {
      for (double L : {1.0, 4.0, 16.0}) {
        SolverParams p = derive_params(eps, n, 3, L);
        CHECK(p.eps3 == eps);
        CHECK(p.eps1 > 0.0);
        CHECK(p.eps2 > 0.0);
        CHECK(p.eps2 < p.eps3 / 10.0 * (1.0 + 1e-12));
        // the nearest-point accuracy must be far below the early-stop radius
        CHECK(p.eps1 <= p.eps2 / 10.0);
      }
    }
  }
}

TEST_CASE("general loop on a ces instance") {
  std::vector<DisutilityOracle> oracles;
  oracles.emplace_back(DisutilitySpec::ces(vec({1, 2}), 2.0));
  oracles.emplace_back(DisutilitySpec::ces(vec({2, 1}), 2.0));
  ProfileMap pm(std::move(oracles));
  SolverParams params;
  params.epsilon = 0.1;
  KktCertificate cert = solve_kkt_general(pm, params);

  CHECK(cert.gamma >= 1.0);
  CHECK(cert.lambda >= 1.0);
  CHECK(cert.delta >= 0.0);
  double eps_eff = std::max(3.0 * (cert.gamma - 1.0) + 5.0 * cert.delta, cert.lambda - 1.0);
  CHECK(eps_eff <= 0.2);

  // exact feasibility after the exit normalization
  for (int j = 0; j < 2; ++j) {
    CHECK(cert.x.col(j).sum() <= 1.0 + 1e-12);
    CHECK(cert.x.col(j).sum() >= 1.0 - 1e-9);
  }
  Vec prof = pm.profile(cert.x);
  CHECK((prof - cert.d).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + cert.d.cwiseAbs().maxCoeff()));

  // the certifying half-space really does sit below the feasible region
  CHECK(min_weighted_profile(pm, cert.a) >= cert.b - cert.delta - 1e-9);

  // only the final row carries a stop label
  REQUIRE(!cert.trace.empty());
  for (size_t k = 0; k + 1 < cert.trace.size(); ++k) {
    CHECK(cert.trace[k].branch == "continue");
  }
  CHECK(cert.trace.back().branch != "continue");
}

TEST_CASE("general loop matches the linear loop on linear input") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 5; ++trial) {
    Mat D = random_matrix(2, 3, rng);
    Instance inst = linear_instance(D);
    SolverParams params;
    params.epsilon = 0.05;
    KktCertificate lin = solve_kkt_linear(D, params);
    KktCertificate gen = solve_kkt_general(make_profile_map(inst), params);
    // same target: gamma close to one, supported hyperplane, feasible x
    CHECK(gen.gamma <= 1.0 + 10.0 * (lin.gamma - 1.0 + params.epsilon));
    CHECK(min_weighted_profile_linear(D, gen.a) >= gen.b - gen.delta - 1e-6);
  }
}

TEST_CASE("trace csv rendering") {
  std::vector<TraceRow> rows(2);
  rows[0].iter = 0;
  rows[0].potential = -1.5;
  rows[0].dist_to_feasible = 2.0;
  rows[0].logd_step = 0.7;
  rows[0].branch = "continue";
  rows[1].iter = 1;
  rows[1].potential = -0.5;
  rows[1].dist_to_feasible = 0.0;
  rows[1].logd_step = 0.001;
  rows[1].branch = "stop_logd";
  std::string csv = trace_to_csv(rows);
  CHECK(csv.find("iter,potential,dist_to_feasible,logd_step,branch") == 0);
  CHECK(csv.find("stop_logd") != std::string::npos);
  CHECK(trace_to_csv(std::vector<TraceRow>{}) ==
        "iter,potential,dist_to_feasible,logd_step,branch\n");
}
