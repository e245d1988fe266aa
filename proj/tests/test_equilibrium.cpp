#include <doctest.h>

#include <cmath>
#include <random>

#include "choreeq/equilibrium.hpp"
#include "choreeq/errors.hpp"
#include "choreeq/solver.hpp"
#include "helpers.hpp"

using namespace choreeq;
using namespace choreeq::testing;

namespace {

KktCertificate exact_cert_2x2() {
  KktCertificate cert;
  cert.a = vec({1, 1});
  cert.d = vec({1, 1});
  cert.x = mat2({{1, 0}, {0, 1}});
  cert.gamma = 1.0;
  cert.lambda = 1.0;
  cert.delta = 0.0;
  cert.b = 2.0;
  cert.weights = Vec::Ones(2);
  return cert;
}

}  // namespace

TEST_CASE("linear certificate to equilibrium, symmetric 2x2") {
  Mat D = mat2({{1, 2}, {2, 1}});
  EquilibriumCertificate eq = from_kkt_linear(D, exact_cert_2x2());
  CHECK(eq.p[0] == doctest::Approx(1.0));
  CHECK(eq.p[1] == doctest::Approx(1.0));
  CHECK(eq.p.sum() == doctest::Approx(2.0).epsilon(1e-8));  // price sum = offset
  CHECK(eq.x(0, 0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(eq.x(1, 1) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(eq.earnings[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(eq.earnings[1] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(eq.residuals.income_ratio_worst <= 1e-8);
}

TEST_CASE("single agent equilibrium") {
  Mat D(1, 2);
  D << 1, 3;
  KktCertificate cert;
  cert.a = vec({0.25});  // 1 / D(full bundle)
  cert.d = vec({4.0});
  cert.x = Mat::Ones(1, 2);
  cert.b = 1.0;
  cert.weights = Vec::Ones(1);
  EquilibriumCertificate eq = from_kkt_linear(D, cert);
  CHECK(eq.p[0] == doctest::Approx(0.25));
  CHECK(eq.p[1] == doctest::Approx(0.75));
  CHECK(eq.p.sum() == doctest::Approx(1.0));
}

TEST_CASE("identical agents get uniform prices") {
  const int n = 2, m = 4;
  Mat D = Mat::Ones(n, m);
  KktCertificate cert;
  cert.d = Vec::Constant(n, static_cast<double>(m) / n);
  cert.a = Vec::Constant(n, static_cast<double>(n) / m);
  cert.x = Mat::Constant(n, m, 1.0 / n);
  cert.b = n;
  cert.weights = Vec::Ones(n);
  EquilibriumCertificate eq = from_kkt_linear(D, cert);
  for (int j = 0; j < m; ++j) CHECK(eq.p[j] == doctest::Approx(0.5));
  VerifyReport rep = verify_ceei(linear_instance(D), eq.x, eq.p, 1e-7);
  CHECK(rep.pass);
}

TEST_CASE("verification of the exact 2x2 equilibrium") {
  Instance inst = linear_instance(mat2({{1, 2}, {2, 1}}));
  Mat x = mat2({{1, 0}, {0, 1}});

  SUBCASE("passes at tiny epsilon") {
    VerifyReport rep = verify_ceei(inst, x, vec({1, 1}), 1e-9);
    CHECK(rep.pass);
    CHECK(rep.residuals.income_ratio_worst <= 1e-12);
    CHECK(rep.residuals.optimal_bundle_worst <= 1e-12);
    CHECK(rep.residuals.feasibility_worst <= 1e-12);
  }
  SUBCASE("unequal prices break the income condition") {
    VerifyReport rep = verify_ceei(inst, x, vec({1, 2}), 1e-9);
    CHECK_FALSE(rep.pass);
    CHECK_FALSE(rep.cond_income);
    CHECK(rep.residuals.income_ratio_worst == doctest::Approx(0.5));
  }
  SUBCASE("swapped rows break the bundle condition") {
    VerifyReport rep = verify_ceei(inst, mat2({{0, 1}, {1, 0}}), vec({1, 1}), 1e-9);
    CHECK_FALSE(rep.pass);
    CHECK_FALSE(rep.cond_bundle);
    // each agent pays 2 for what the optimal bundle gets at 1
    CHECK(rep.residuals.optimal_bundle_worst == doctest::Approx(0.5));
  }
  SUBCASE("under-allocation breaks feasibility") {
    VerifyReport rep = verify_ceei(inst, 0.5 * x, vec({1, 1}), 1e-9);
    CHECK_FALSE(rep.cond_feasible);
    CHECK(rep.residuals.feasibility_worst == doctest::Approx(0.5));
  }
  SUBCASE("all-zero prices are rejected") {
    CHECK_THROWS_AS(verify_ceei(inst, x, Vec::Zero(2), 1e-9), ZeroPrices);
  }
}

TEST_CASE("optimal bundle disutility closed forms") {
  DisutilityOracle o(DisutilitySpec::linear(vec({1, 2})));
  // cheapest way to earn 1 at prices (1,1): take chore 0 only
  CHECK(optimal_bundle_disutility(o, vec({1, 1}), 1.0) == doctest::Approx(1.0));
  // at prices (1,4) the second chore is more efficient per unit disutility
  CHECK(optimal_bundle_disutility(o, vec({1, 4}), 1.0) == doctest::Approx(0.5));
  CHECK(optimal_bundle_disutility(o, vec({1, 1}), 0.0) == 0.0);

  // zero-price chore with positive disutility is simply never taken
  CHECK(optimal_bundle_disutility(o, vec({1, 0}), 1.0) == doctest::Approx(1.0));

  // ces oracle: earning 1 at unit prices optimally spreads across chores
  DisutilityOracle ces(DisutilitySpec::ces(vec({1, 1}), 2.0));
  double v = optimal_bundle_disutility(ces, vec({1, 1}), 1.0);
  CHECK(v == doctest::Approx(std::sqrt(0.5)).epsilon(1e-4));
}

TEST_CASE("general certificate to equilibrium") {
  SUBCASE("linear oracles recover the linear price rule") {
    Mat D = mat2({{1, 2}, {2, 1}});
    Instance inst = linear_instance(D);
    KktCertificate cert = exact_cert_2x2();
    EquilibriumCertificate lin = from_kkt_linear(D, cert);
    EquilibriumCertificate gen = from_kkt_general(make_profile_map(inst), cert);
    CHECK((lin.p - gen.p).cwiseAbs().maxCoeff() <= 1e-6);
  }
  SUBCASE("exact certificate claims the floor epsilon") {
    Mat D = mat2({{1, 2}, {2, 1}});
    Instance inst = linear_instance(D);
    EquilibriumCertificate eq = from_kkt_general(make_profile_map(inst), exact_cert_2x2());
    CHECK(eq.epsilon <= 1e-6);
    VerifyReport rep = verify_ceei(inst, eq.x, eq.p, eq.epsilon);
    CHECK(rep.pass);
  }
  SUBCASE("solved ces instance verifies at the formula epsilon") {
    std::vector<DisutilityOracle> oracles;
    oracles.emplace_back(DisutilitySpec::ces(vec({1, 2}), 1.5));
    oracles.emplace_back(DisutilitySpec::ces(vec({2, 1}), 2.0));
    ProfileMap pm(std::move(oracles));
    SolverParams params;
    params.epsilon = 0.1;
    KktCertificate cert = solve_kkt_general(pm, params);
    EquilibriumCertificate eq = from_kkt_general(pm, cert);
    double eps_eff =
        std::max(3.0 * (cert.gamma - 1.0) + 5.0 * cert.delta, cert.lambda - 1.0);
    CHECK(eq.epsilon >= eps_eff - 1e-15);
    VerifyReport rep = verify_ceei(pm, eq.x, eq.p, eq.epsilon);
    CHECK(rep.pass);
  }
}

TEST_CASE("column renormalization") {
  Instance inst = linear_instance(mat2({{1, 2}, {2, 1}}));
  ProfileMap pm = make_profile_map(inst);

  SUBCASE("exact input is untouched") {
    Mat x = mat2({{1, 0}, {0, 1}});
    Mat y = ef_po_round(pm, x);
    CHECK((y - x).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("column sums divide out") {
    Mat x = mat2({{0.6, 0.45}, {0.5, 0.45}});
    Mat y = ef_po_round(pm, x);
    CHECK(y(0, 0) == doctest::Approx(0.6 / 1.1));
    CHECK(y(0, 1) == doctest::Approx(0.5));
    CHECK(y.col(0).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(y.col(1).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("random over-allocation becomes exactly feasible") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      Mat x(2, 2);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) x(i, j) = u(rng);
      Mat y = ef_po_round(pm, x);
      auto rep = validate_allocation(inst, y, 1e-10);
      CHECK(rep.feasible_exact);
    }
  }
  SUBCASE("zero column is an error") {
    CHECK_THROWS_AS(ef_po_round(pm, mat2({{0, 1}, {0, 0}})), ZeroColumn);
  }
}

TEST_CASE("envy check") {
  Instance inst = linear_instance(mat2({{1, 2}, {2, 1}}));
  ProfileMap pm = make_profile_map(inst);

  SUBCASE("exact equilibrium has no envy") {
    EfReport rep = check_ef(pm, mat2({{1, 0}, {0, 1}}), 0.0);
    CHECK(rep.pass);
    CHECK(rep.min_ratio >= 1.0);
    CHECK(rep.pairs == 2);
  }
  SUBCASE("single agent is vacuous") {
    Instance one = linear_instance(Mat::Ones(1, 2));
    EfReport rep = check_ef(make_profile_map(one), Mat::Ones(1, 2), 0.0);
    CHECK(rep.pass);
    CHECK(rep.pairs == 0);
  }
  SUBCASE("dumping everything on one agent fails below a quarter") {
    Instance ident = linear_instance(Mat::Ones(2, 2));
    ProfileMap pmi = make_profile_map(ident);
    Mat y = mat2({{1, 1}, {0, 0}});
    CHECK_FALSE(check_ef(pmi, y, 0.2).pass);
    CHECK(check_ef(pmi, y, 0.26).pass);  // 1 - 4*0.26 < 0, everything passes
  }
}

TEST_CASE("pareto check") {
  SUBCASE("diagonal allocation is efficient") {
    Instance inst = linear_instance(mat2({{1, 2}, {2, 1}}));
    PoReport rep = check_po(make_profile_map(inst), mat2({{1, 0}, {0, 1}}), 0.01);
    CHECK(rep.pass);
    CHECK(rep.t_star == doctest::Approx(1.0).epsilon(1e-2));
  }
  SUBCASE("anti-diagonal allocation wastes a factor ten") {
    Instance inst = linear_instance(mat2({{1, 10}, {10, 1}}));
    ProfileMap pm = make_profile_map(inst);
    Mat y = mat2({{0, 1}, {1, 0}});  // each agent stuck with the hated chore
    PoReport rep = check_po(pm, y, 0.01);
    CHECK_FALSE(rep.pass);
    CHECK(rep.t_star == doctest::Approx(0.1).epsilon(1e-2));
  }
  SUBCASE("single agent single chore") {
    Instance inst = linear_instance(mat2({{2}}));
    PoReport rep = check_po(make_profile_map(inst), Mat::Ones(1, 1), 0.01);
    CHECK(rep.pass);
    CHECK(rep.t_star == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("rounded solver output keeps ef and po") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    int n = 2 + static_cast<int>(rng() % 3);
    int m = 2 + static_cast<int>(rng() % 3);
    Mat D = random_matrix(n, m, rng);
    Instance inst = linear_instance(D);
    SolverParams params;
    params.epsilon = 0.1;
    KktCertificate cert = solve_kkt_linear(D, params);
    EquilibriumCertificate eq = from_kkt_linear(D, cert);
    ProfileMap pm = make_profile_map(inst);
    Mat y = ef_po_round(pm, eq.x);
    CHECK(check_ef(pm, y, eq.epsilon).pass);
    CHECK(check_po(pm, y, eq.epsilon).pass);
  }
}
