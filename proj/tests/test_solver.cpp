#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "qpwave/errors.hpp"
#include "qpwave/linop.hpp"
#include "qpwave/solver.hpp"

using namespace qpwave;

namespace {

ProblemConfig config_1d(double a, int N_max = 30) {
  ProblemConfig c;
  c.d = 1;
  c.a = a;
  c.jtilde = LatticeIndex({1, 0});
  c.lambda = Frequency({1.1, 0.731});
  c.N_max = N_max;
  return c;
}

ProblemConfig config_2d(double a, int N_max) {
  ProblemConfig c;
  c.d = 2;
  c.a = a;
  c.jtilde = LatticeIndex({1, 1, 1, -1});
  c.lambda = Frequency({1.1, 0.731, 0.8, 1.3});
  c.N_max = N_max;
  return c;
}

}  // namespace

TEST_CASE("initial guess and first eigenvalue") {
  for (double a : {0.01, 0.1, 0.5}) {
    const auto cfg = config_1d(a);
    const auto [u, Et] = initial_guess(cfg);
    CHECK(u.support_size() == 2);
    CHECK(u.at(LatticeIndex({1, 0})) == a / 2);
    CHECK(u.at(LatticeIndex({-1, 0})) == a / 2);
    CHECK(Et == 1.1 * 1.1);
    CHECK(e_shift(u, cfg) == doctest::Approx(-0.75 * a * a).epsilon(1e-15));
    CHECK(q_update(u, cfg) == doctest::Approx(1.21 - 0.75 * a * a).epsilon(1e-15));

    // F at the initial guess: zero on S, -a^3/8 at +-3 jtilde.
    const auto F = residual(u, q_update(u, cfg), cfg.lambda, Region::full_box(5), cfg.p);
    CHECK(std::abs(F.at(LatticeIndex({1, 0}))) <= 1e-15 * a * Et);
    CHECK(F.at(LatticeIndex({3, 0})) == doctest::Approx(-a * a * a / 8).epsilon(1e-15));
    CHECK(F.at(LatticeIndex({-3, 0})) == F.at(LatticeIndex({3, 0})));
    CHECK(F.support_size() <= 4);
  }
  const auto cfg2 = config_2d(0.2, 4);
  const auto [u2, Et2] = initial_guess(cfg2);
  CHECK(u2.support_size() == 4);
  CHECK(u2.at(LatticeIndex({-1, -1, 1, -1})) == 0.05);
  CHECK(Et2 == doctest::Approx(std::pow(1.1 + 0.731, 2) + std::pow(0.8 - 1.3, 2)).epsilon(1e-15));
  CHECK(e_shift(u2, cfg2) == doctest::Approx(-9.0 / 16.0 * 0.04).epsilon(1e-14));
}

TEST_CASE("validation") {
  auto cfg = config_2d(0.1, 4);
  cfg.jtilde = LatticeIndex({1, 0, 0, 0});
  CHECK_THROWS_AS(solve(cfg), MixedDegenerateIndex);
  cfg.jtilde = LatticeIndex({1, 0});
  CHECK_THROWS_AS(solve(cfg), DimensionMismatch);
  auto c1 = config_1d(-0.1);
  CHECK_THROWS_AS(solve(c1), std::invalid_argument);
  c1 = config_1d(0.1, 4);
  c1.jtilde = LatticeIndex({5, 0});
  CHECK_THROWS_AS(solve(c1), std::invalid_argument);
  CHECK(ProblemConfig::default_N_max(1) == 30);
  CHECK(ProblemConfig::default_N_max(2) == 8);
  CHECK(ProblemConfig::default_N_max(3) == 4);
}

TEST_CASE("a = 0 is the trivial branch") {
  const auto rec = solve(config_1d(0.0));
  CHECK(rec.accepted);
  CHECK(rec.u.empty());
  CHECK(rec.E == 1.1 * 1.1);
  CHECK(rec.e_shift == 0.0);
  CHECK(rec.residual_norm == 0.0);
}

TEST_CASE("zero index branch is exact") {
  for (int p : {1, 2}) {
    for (double a : {0.1, 1.0}) {
      auto cfg = config_1d(a);
      cfg.p = p;
      cfg.jtilde = LatticeIndex({0, 0});
      const auto rec = solve(cfg);
      CHECK(rec.accepted);
      CHECK(rec.u.support_size() == 1);
      CHECK(rec.u.at(LatticeIndex({0, 0})) == a);
      CHECK(rec.E == doctest::Approx(-std::pow(a, 2 * p)).epsilon(1e-15));
      CHECK(rec.residual_norm <= 1e-15 * std::pow(a, 2 * p + 1));
      CHECK(rec.trace.size() == 1);
    }
  }
}

TEST_CASE("agrees with a damped fixed-point iteration") {
  const double a = 0.05;
  const int N = 9;
  auto cfg = config_1d(a, N);
  cfg.drop_tol = 0.0;
  const auto rec = solve(cfg, {false});
  REQUIRE(rec.accepted);
  const auto ref = oracle::damped_fixed_point({1.1, 0.731}, {1, 0}, a, 1, N);
  REQUIRE(ref.converged);
  CHECK(rec.E == doctest::Approx(ref.E).epsilon(1e-14));
  double worst = 0.0;
  for (const auto& [c, v] : ref.u) worst = std::max(worst, std::abs(rec.u.at(LatticeIndex(c)) - v));
  for (const auto& [j, v] : rec.u.expanded()) {
    const auto it = ref.u.find(std::vector<int>(j.coords().begin(), j.coords().end()));
    worst = std::max(worst, std::abs(v - (it == ref.u.end() ? 0.0 : it->second)));
  }
  CHECK(worst <= 1e-16);
}

TEST_CASE("converged solution") {
  const auto cfg = config_1d(0.01);
  const auto rec = solve(cfg, {false});
  REQUIRE(rec.accepted);
  CHECK(rec.residual_norm <= cfg.residual_tol);
  CHECK(rec.trace.size() <= 4);
  for (const auto& s : cfg.resonant_set()) CHECK(rec.u.at(s) == 0.005);
  CHECK(rec.E == q_update(rec.u, cfg));
  CHECK(rec.e_shift == doctest::Approx(rec.E - 1.21).epsilon(1e-9));
  CHECK(rec.e_shift == doctest::Approx(-0.75e-4).epsilon(1e-4));
  CHECK(rec.trace.front().N == 3);
  for (const auto& row : rec.trace) CHECK(row.seconds == 0.0);

  // The stationary equation in physical space: -u'' - E u - u^3 = 0.
  for (int k = 0; k < 20; ++k) {
    const std::vector<double> x{-40.0 + 4.1 * k};
    const double v = evaluate(rec.u, cfg.lambda, x);
    const double lap = evaluate_neg_laplacian(rec.u, cfg.lambda, x);
    CHECK(std::abs(lap - rec.E * v - v * v * v) <= 1e-14);
  }
}

TEST_CASE("Newton increment solves the linearized equation") {
  const auto cfg = config_1d(0.1, 9);
  const auto [u, Et] = initial_guess(cfg);
  const double E = q_update(u, cfg);
  const auto step = newton_step(u, E, cfg, 9);
  const Region region = Region::box_minus(9, cfg.resonant_set());
  const auto T = assemble(u, E, cfg.lambda, std::vector<double>{0.0}, region, 1);
  const auto F = residual(u, E, cfg.lambda, Region::full_box(9), 1);
  Eigen::VectorXd x(static_cast<Eigen::Index>(T.dim())), f(static_cast<Eigen::Index>(T.dim()));
  for (std::size_t i = 0; i < T.dim(); ++i) {
    x[static_cast<Eigen::Index>(i)] = step.increment.at(T.sites()[i]);
    f[static_cast<Eigen::Index>(i)] = F.at(T.sites()[i]);
  }
  CHECK((apply(T, x) + f).norm() <= 1e-13 * f.norm());
  for (const auto& s : cfg.resonant_set()) CHECK(step.increment.at(s) == 0.0);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(T.dim()));
  CHECK(step.residual_norm == doctest::Approx(F.l2_norm()));
  (void)zero;
}

TEST_CASE("larger N_max does not worsen the residual on a common box") {
  const Region common = Region::full_box(27);
  double prev = INFINITY;
  for (int N_max : {3, 5, 9, 27}) {
    auto cfg = config_1d(0.1, N_max);
    const auto rec = solve(cfg, {false});
    REQUIRE(rec.accepted);
    const double r = residual(rec.u, rec.E, cfg.lambda, common, 1).l2_norm();
    CHECK(r <= prev + 1e-16);
    prev = r;
  }
  CHECK(prev <= 1e-15);
}

TEST_CASE("d = 2 solve") {
  const auto cfg = config_2d(0.05, 4);
  const auto rec = solve(cfg, {false});
  REQUIRE(rec.accepted);
  CHECK(rec.residual_norm <= cfg.residual_tol);
  for (const auto& s : cfg.resonant_set()) CHECK(rec.u.at(s) == 0.0125);
  for (const auto& [j, v] : rec.u.canonical_entries()) {
    for (const auto& o : orbit(j)) CHECK(rec.u.at(o) == v);
  }
  CHECK(rec.e_shift == doctest::Approx(-9.0 / 16.0 * 0.0025).epsilon(1e-3));
}

TEST_CASE("non-convergence is reported") {
  auto cfg = config_1d(0.05, 9);
  cfg.max_steps = 1;
  cfg.residual_tol = 1e-30;
  CHECK_THROWS_AS(solve(cfg), NotConverged);
}
