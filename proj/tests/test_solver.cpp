#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "mfdsm/kernel.hpp"
#include "mfdsm/oracle.hpp"
#include "mfdsm/solver.hpp"

using namespace mfdsm;
using doctest::Approx;

namespace {

ValueFunction random_values(std::size_t grid, std::size_t states, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> dist(-50.0, 50.0);
  ValueFunction v(grid, states);
  for (double& x : v.raw()) x = dist(gen);
  return v;
}

ValueFunction sweeps_from_zero(const BellmanOperator& op, std::size_t count) {
  ValueFunction v(op.grid_size(), op.states()), next;
  Policy greedy;
  for (std::size_t i = 0; i < count; ++i) {
    op.sweep(v, next, greedy);
    std::swap(v, next);
  }
  return v;
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("stopping threshold") {
  CHECK(stopping_threshold(0.01, 0.9) == Approx(0.01 * 0.1 / 1.8));
  CHECK(stopping_threshold(0.01, 0.9) == Approx(5.5556e-4).epsilon(1e-4));
}

TEST_CASE("backup of the zero function is the cheapest per-step cost") {
  const auto scn = example1_scenario();
  const auto kernel = build_kernel(scn);
  const ValueFunction zero(scn.grid_size(), scn.trajectory.size());
  for (std::size_t s : {0u, 30u, 49u, 80u}) {
    for (std::size_t m : {0u, 17u, 80u, 100u}) {
      double best = 1e300;
      ActionPair arg{};
      for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t d = 0; d < 3; ++d) {
          const double c = per_step_cost(m, s, {r, d}, scn);
          if (c < best) {
            best = c;
            arg = {r, d};
          }
        }
      }
      const auto b = bellman_backup(zero, m, s, kernel, scn);
      CHECK(b.value == Approx(best));
      CHECK(b.action == arg);
    }
  }
}

TEST_CASE("ties go to the lexicographically smallest pair") {
  // identical options: every pair ties
  auto scn = testing::one_option(3, 0.5, 0.2, 0.5);
  scn.options.push_back(scn.options[0]);
  const auto kernel = build_kernel(scn);
  const auto solved = value_iteration(scn, kernel);
  for (std::size_t m = 0; m <= 3; ++m) CHECK(solved.policy.at(m, 0) == ActionPair{0, 0});
}

TEST_CASE("operator backup agrees with the free function") {
  const auto scn = tiny_scenario();
  const auto kernel = build_kernel(scn);
  const BellmanOperator op(scn, kernel);
  std::mt19937_64 gen(3);
  const auto v = random_values(3, 2, gen);
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t m = 0; m <= 2; ++m) {
      const auto a = op.backup(v, m, s);
      const auto b = bellman_backup(v, m, s, kernel, scn);
      CHECK(a.value == Approx(b.value).epsilon(1e-14));
      CHECK(a.action == b.action);
    }
  }
}

TEST_CASE("single-state toy matches the 2x2 closed form") {
  const auto scn = testing::single_state_toy();
  const auto kernel = build_kernel(scn);
  const auto solved = value_iteration(scn, kernel, {0.01, 100000, 1});
  CHECK(std::abs(solved.values.at(0, 0) - testing::kToyV0) <= 0.01);
  CHECK(std::abs(solved.values.at(1, 0) - testing::kToyV1) <= 0.01);

  ValueFunction exact(2, 1);
  exact.at(0, 0) = testing::kToyV0;
  exact.at(1, 0) = testing::kToyV1;
  CHECK(bellman_residual(exact, kernel, scn) <= 1e-10);

  const auto evaluated = exact_policy_evaluation(solved.policy, scn, kernel);
  CHECK(evaluated.at(0, 0) == Approx(testing::kToyV0).epsilon(1e-12));
  CHECK(evaluated.at(1, 0) == Approx(testing::kToyV1).epsilon(1e-12));
}

TEST_CASE("converged solution has a small residual") {
  const auto scn = tiny_scenario();
  const auto kernel = build_kernel(scn);
  const auto solved = value_iteration(scn, kernel);
  CHECK(solved.report.final_residual <= solved.report.threshold);
  CHECK(solved.report.iterations == solved.report.residuals.size());
  CHECK(bellman_residual(solved.values, kernel, scn) <= 2.0 * solved.report.threshold);
}

TEST_CASE("residual of the zero function is the largest cheapest cost") {
  const auto scn = tiny_scenario();
  const auto kernel = build_kernel(scn);
  double worst = 0.0;
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t m = 0; m <= 2; ++m) {
      double best = 1e300;
      for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t d = 0; d < 2; ++d) best = std::min(best, per_step_cost(m, s, {r, d}, scn));
      }
      worst = std::max(worst, best);
    }
  }
  CHECK(worst > 0.0);
  CHECK(bellman_residual(ValueFunction(3, 2), kernel, scn) == Approx(worst));
}

TEST_CASE("the Bellman operator is a beta-contraction") {
  for (const auto& scn : {tiny_scenario(), testing::one_option(9, 0.4, 0.3, 0.6)}) {
    const auto kernel = build_kernel(scn);
    const BellmanOperator op(scn, kernel);
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 50; ++trial) {
      const auto v1 = random_values(op.grid_size(), op.states(), gen);
      const auto v2 = random_values(op.grid_size(), op.states(), gen);
      ValueFunction t1, t2;
      Policy g1, g2;
      op.sweep(v1, t1, g1);
      op.sweep(v2, t2, g2);
      CHECK(ValueFunction::sup_distance(t1, t2) <=
            scn.beta * ValueFunction::sup_distance(v1, v2) + 1e-12);
    }
  }
}

TEST_CASE("iterates from zero increase monotonically and stay below the bound") {
  const auto scn = tiny_scenario();
  const auto kernel = build_kernel(scn);
  const BellmanOperator op(scn, kernel);
  const double bound = max_per_step_cost(scn) / (1.0 - scn.beta);
  ValueFunction v(3, 2), next;
  Policy greedy;
  for (int i = 0; i < 200; ++i) {
    op.sweep(v, next, greedy);
    for (std::size_t j = 0; j < v.raw().size(); ++j) {
      CHECK(next.raw()[j] >= v.raw()[j] - 1e-12);
      CHECK(next.raw()[j] <= bound + 1e-9);
    }
    std::swap(v, next);
  }
}

TEST_CASE("shifting every price by c shifts V by c / (1 - beta)") {
  auto base = tiny_scenario();
  auto shifted = base;
  const double c = 0.75;
  for (auto& opt : shifted.options) {
    opt.reserve_price.intercept += c;
    opt.demand_price.intercept += c;
  }
  const auto kb = build_kernel(base);
  const auto ks = build_kernel(shifted);
  const auto vb = value_iteration(base, kb, {1e-9, 100000, 1});
  const auto vs = value_iteration(shifted, ks, {1e-9, 100000, 1});
  CHECK(vb.policy == vs.policy);
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t m = 0; m <= 2; ++m) {
      CHECK(vs.values.at(m, s) - vb.values.at(m, s) == Approx(c / (1.0 - base.beta)).epsilon(1e-8));
    }
  }
}

TEST_CASE("finite-horizon recursion equals that many sweeps from zero") {
  for (const auto& scn : {tiny_scenario(), example1_scenario()}) {
    const auto kernel = build_kernel(scn);
    const BellmanOperator op(scn, kernel);
    for (std::size_t horizon : {1u, 2u, 5u}) {
      const auto fh = finite_horizon_value(scn, kernel, horizon);
      const auto sw = sweeps_from_zero(op, horizon);
      CHECK(ValueFunction::sup_distance(fh, sw) <= 1e-10);
    }
  }
}

TEST_CASE("policy lookup") {
  Policy pol(4, 2);
  pol.at(3, 1) = {2, 0};
  CHECK(policy_action(pol, 0, 3, 1) == 2);
  CHECK(policy_action(pol, 1, 3, 1) == 0);
  // every user in the same (x, m, s) gets the same option
  CHECK(policy_action(pol, 1, 3, 1) == policy_action(pol, 1, 3, 1));
}

TEST_CASE("running out of sweeps is an error") {
  const auto scn = tiny_scenario();
  const auto kernel = build_kernel(scn);
  try {
    (void)value_iteration(scn, kernel, {1e-6, 5, 1});
    FAIL("expected MaxItersExceeded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MaxItersExceeded);
  }
}

TEST_CASE("threaded sweeps match the serial sweep") {
  const auto scn = example1_scenario();
  const auto kernel = build_kernel(scn);
  const auto serial = value_iteration(scn, kernel, {0.5, 100000, 1});
  const auto threaded = value_iteration(scn, kernel, {0.5, 100000, 4});
  CHECK(serial.policy == threaded.policy);
  CHECK(ValueFunction::sup_distance(serial.values, threaded.values) == 0.0);
}

}  // TEST_SUITE
