#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "mfdsm/kernel.hpp"
#include "mfdsm/oracle.hpp"
#include "mfdsm/simulator.hpp"
#include "mfdsm/solver.hpp"

using namespace mfdsm;
using doctest::Approx;

namespace {

double valley_tracking_error(const SimulationTrace& trace, std::size_t n) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& st : trace.steps) {
    if (st.s + 1 >= 25 && st.s + 1 < 75) {
      total += std::abs(static_cast<double>(st.m_count) / static_cast<double>(n) - st.theta);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace

TEST_SUITE("simulator") {

TEST_CASE("initial populations") {
  const auto big = testing::one_option(10000, 0.8, 0.0, 0.5);
  CHECK(init_population(big, InitMode::AllZero, 5).m_count() == 0);
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    const auto ps = init_population(big, InitMode::Bernoulli, seed);
    const double frac = static_cast<double>(ps.m_count()) / 10000.0;
    CHECK(frac >= 0.78);
    CHECK(frac <= 0.82);
    CHECK(ps.x == init_population(big, InitMode::Bernoulli, seed).x);
  }
  CHECK(init_population(big, InitMode::Bernoulli, 1).x !=
        init_population(big, InitMode::Bernoulli, 2).x);
}

TEST_CASE("instant delivery and full participation empty the population") {
  const auto serve_all = testing::one_option(50, 0.8, 0.0, 1.0);
  PopulationState ps;
  ps.x.assign(50, 1);
  const auto pol = Policy::constant(51, 1, {0, 0});
  const CounterRng rng(4);
  CHECK(step_population(ps, pol, serve_all, rng).m_count() == 0);

  const auto block_all = testing::one_option(50, 0.8, 1.0, 0.5);
  ps.x.assign(50, 0);
  CHECK(step_population(ps, pol, block_all, rng).m_count() == 0);
}

TEST_CASE("step advances time and trajectory state") {
  const auto scn = tiny_scenario();
  const auto ps = init_population(scn, InitMode::Bernoulli, 8);
  const auto next = step_population(ps, Policy::constant(3, 2, {0, 1}), scn, CounterRng(8));
  CHECK(next.t == 2);
  CHECK(next.s == 1);
}

TEST_CASE("single-step simulation costs the first step") {
  const auto scn = example1_scenario();
  const auto pol = Policy::constant(101, 100, {1, 2});
  const auto trace = run_simulation(scn, pol, 1, 17);
  REQUIRE(trace.steps.size() == 1);
  const auto ps = init_population(scn, InitMode::Bernoulli, 17);
  CHECK(trace.steps[0].m_count == ps.m_count());
  CHECK(trace.discounted_total == per_step_cost(ps.m_count(), 0, {1, 2}, scn));
}

TEST_CASE("same seed gives an identical trace") {
  const auto scn = example1_scenario();
  const auto pol = Policy::constant(101, 100, {0, 0});
  const auto a = run_simulation(scn, pol, 150, 21);
  const auto b = run_simulation(scn, pol, 150, 21);
  CHECK(a.steps == b.steps);
  CHECK(a.discounted_total == b.discounted_total);
  CHECK_FALSE(run_simulation(scn, pol, 150, 22).steps == a.steps);
}

TEST_CASE("discounted total is bounded") {
  const auto scn = example1_scenario();
  const auto pol = Policy::constant(101, 100, {2, 2});
  const auto trace = run_simulation(scn, pol, 400, 3);
  CHECK(trace.discounted_total >= 0.0);
  CHECK(trace.discounted_total <= max_per_step_cost(scn) / (1.0 - scn.beta));
  CHECK(trace.truncation_bound < 1e-10);
  CHECK(default_horizon(scn, 1e-3) < 200);
}

TEST_CASE("sampled transitions match the kernel row") {
  const auto scn = example1_scenario();
  for (std::size_t n : {1u, 4u, 12u}) {
    auto small = scn;
    small.n = n;
    const auto kernel = build_kernel(small);
    const std::size_t draws = 40000;
    for (std::size_t m : {std::size_t{0}, n / 2, n}) {
      const auto hist = sample_transition_counts(small, m, {2, 1}, 40, draws, 1000 + m);
      const auto row = kernel.row(m, {2, 1});
      CHECK(std::accumulate(hist.begin(), hist.end(), std::uint64_t{0}) == draws);
      for (std::size_t j = 0; j <= n; ++j) {
        const double freq = static_cast<double>(hist[j]) / draws;
        const double se = std::sqrt(row[j] * (1.0 - row[j]) / draws);
        CHECK(std::abs(freq - row[j]) <= 4.0 * se + 1e-12);
      }
    }
  }
}

TEST_CASE("cost estimates") {
  const auto scn = tiny_scenario();
  const auto pol = Policy::constant(3, 2, {1, 0});
  const auto one = estimate_cost(scn, pol, 50, 1, 9);
  CHECK_FALSE(one.std_error.has_value());
  CHECK(one.mean == run_simulation(scn, pol, 50, CounterRng::replication_seed(9, 0)).discounted_total);
  const auto serial = estimate_cost(scn, pol, 50, 64, 9, InitMode::Bernoulli, 1);
  const auto threaded = estimate_cost(scn, pol, 50, 64, 9, InitMode::Bernoulli, 3);
  CHECK(serial.mean == threaded.mean);
  REQUIRE(serial.std_error.has_value());
  CHECK(*serial.std_error > 0.0);
}

TEST_CASE("Monte-Carlo cost of the tiny scenario matches exact evaluation") {
  const auto scn = tiny_scenario();
  const auto kernel = build_kernel(scn);
  const auto solved = value_iteration(scn, kernel);
  const auto exact = exact_policy_evaluation(solved.policy, scn, kernel);
  // Bernoulli(p) start is Binomial(2, p) over the count
  const auto start = testing::factorial_binomial(scn.p, 2);
  double expected = 0.0;
  for (std::size_t m = 0; m <= 2; ++m) expected += start[m] * exact.at(m, scn.trajectory.initial_state());

  const std::size_t horizon = default_horizon(scn, 1e-6);
  const auto est = estimate_cost(scn, solved.policy, horizon, 100000, 2024);
  REQUIRE(est.std_error.has_value());
  CHECK(std::abs(est.mean - expected) <= 3.0 * *est.std_error);
}

TEST_CASE("optimal policy tracks the valley better than the basic option") {
  const auto scn = example1_scenario();
  const auto kernel = build_kernel(scn);
  const auto solved = value_iteration(scn, kernel);
  const auto optimal = run_simulation(scn, solved.policy, 300, 5);
  const auto basic = run_simulation(scn, Policy::constant(101, 100, {0, 0}), 300, 5);
  CHECK(valley_tracking_error(optimal, scn.n) < valley_tracking_error(basic, scn.n));
}

}  // TEST_SUITE
