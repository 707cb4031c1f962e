#include <doctest.h>

#include <algorithm>
#include <bit>
#include <random>

#include "fixtures.hpp"
#include "mfdsm/model.hpp"

using namespace mfdsm;
using doctest::Approx;

namespace {

bool has_issue(const Scenario& scn, const std::string& field_part) {
  const auto issues = scenario_issues(scn);
  return std::any_of(issues.begin(), issues.end(), [&](const ValidationIssue& i) {
    return i.field.find(field_part) != std::string::npos;
  });
}

Scenario with_theta(Scenario scn, double theta) {
  scn.trajectory = TrajectoryModel::table({0}, {theta}, 0);
  return scn;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("example 1 scenario is valid") {
  const auto scn = example1_scenario();
  CHECK(scenario_issues(scn).empty());
  CHECK(scn.n == 100);
  CHECK(scn.k() == 3);
  CHECK(scn.trajectory.size() == 100);
  CHECK(scn.option(2).alpha == Approx(0.85));
  CHECK(scn.option(2).delivery_rate(0.3) == Approx(0.15));
  // incentive option: basic prices minus 0.05 (reserve) and 0.1 (demand)
  CHECK(scn.option(2).reserve(0.4) == Approx(scn.option(0).reserve(0.4) - 0.05));
  CHECK(scn.option(2).demand(0.4) == Approx(scn.option(0).demand(0.4) - 0.1));
  CHECK_NOTHROW(validate_scenario(scn));
  CHECK_NOTHROW(validate_scenario(tiny_scenario()));
}

TEST_CASE("validation rejects out-of-range parameters") {
  auto scn = example1_scenario();
  scn.beta = 1.0;
  CHECK(has_issue(scn, "beta"));
  try {
    validate_scenario(scn);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.code() == ErrorCode::InvalidParameter);
    REQUIRE(e.issues().size() == 1);
    CHECK(e.issues()[0].field == "beta");
  }

  auto zero_q = example1_scenario();
  zero_q.options[0].delivery = {1.0, -1.0};  // q(1) = 0
  CHECK(has_issue(zero_q, "delivery"));

  auto several = example1_scenario();
  several.p = 0.0;
  several.options[1].alpha = 1.5;
  CHECK(scenario_issues(several).size() == 2);

  auto empty = example1_scenario();
  empty.options.clear();
  CHECK(scenario_issues(empty).front().code == ErrorCode::EmptyOptions);

  auto bad_table = tiny_scenario();
  bad_table.trajectory = TrajectoryModel::table({1, 5}, {0.5, 0.5}, 0);
  CHECK(has_issue(bad_table, "successor"));
  bad_table.trajectory = TrajectoryModel::table({1, 0}, {0.5, 1.5}, 0);
  CHECK(has_issue(bad_table, "theta"));
}

TEST_CASE("per-step cost examples") {
  const auto base = example1_scenario();
  // basic option at m = 0.8 with theta = 0.8: 0.2 (1 + 0.2) + 0.8 (1.5 + 1.2) = 2.4
  const auto at_80 = with_theta(base, 0.8);
  CHECK(per_step_cost(80, 0, {0, 0}, at_80) == Approx(2.4).epsilon(1e-12));
  CHECK(per_step_cost(80, 0, {0, 0}, base) == Approx(2.4).epsilon(1e-12));  // s = 1 sits at 0.8

  const auto at_0 = with_theta(base, 0.0);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t d = 0; d < 3; ++d) {
      CHECK(per_step_cost(0, 0, {r, d}, at_0) == Approx(base.option(r).reserve(1.0)));
    }
  }

  const auto at_1 = with_theta(base, 1.0);
  CHECK(per_step_cost(100, 0, {0, 1}, at_1) == Approx(3.0));
}

TEST_CASE("per-step cost is nonnegative and bounded by its maximum") {
  const auto scn = example1_scenario();
  const double lmax = max_per_step_cost(scn);
  double seen = 0.0;
  for (std::size_t s = 0; s < scn.trajectory.size(); ++s) {
    for (std::size_t m = 0; m <= scn.n; ++m) {
      for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t d = 0; d < 3; ++d) {
          const double c = per_step_cost(m, s, {r, d}, scn);
          CHECK(c >= 0.0);
          seen = std::max(seen, c);
        }
      }
    }
  }
  CHECK(seen == Approx(lmax));
}

TEST_CASE("trajectory dynamics") {
  const auto valley = TrajectoryModel::periodic_valley({100, 25, 75, 0.8, 0.6});
  // state s (1-based) is index s - 1
  CHECK(trajectory_step(39, valley) == 40);
  CHECK(trajectory_step(99, valley) == 0);
  const auto table = TrajectoryModel::table({1, 2, 0}, {0.1, 0.2, 0.3});
  CHECK(trajectory_step(2, table) == 0);

  CHECK(trajectory_theta(9, valley) == Approx(0.8));
  CHECK(trajectory_theta(24, valley) == Approx(0.8));
  CHECK(trajectory_theta(49, valley) == Approx(0.2).epsilon(1e-12));
  CHECK(trajectory_theta(74, valley) == Approx(0.8));
  CHECK(trajectory_theta(99, valley) == Approx(0.8));

  std::size_t s = 17;
  for (int i = 0; i < 100; ++i) s = trajectory_step(s, valley);
  CHECK(s == 17);
  for (std::size_t i = 0; i < valley.size(); ++i) {
    CHECK(valley.theta(i) >= 0.0);
    CHECK(valley.theta(i) <= 1.0);
  }
  CHECK_THROWS_AS(trajectory_step(100, valley), Error);
}

TEST_CASE("mean-field grid enumerates exactly n + 1 values") {
  for (std::size_t n = 1; n <= 20; ++n) {
    const MeanFieldGrid grid(n);
    REQUIRE(grid.size() == n + 1);
    CHECK(grid.value(0) == 0.0);
    CHECK(grid.value(n) == 1.0);
    // brute force: every x in {0,1}^n lands on a grid point
    if (n <= 12) {
      for (std::uint32_t x = 0; x < (1u << n); ++x) {
        const double m = static_cast<double>(std::popcount(x)) / static_cast<double>(n);
        CHECK(grid.index_of(m) == static_cast<std::size_t>(std::popcount(x)));
      }
    }
  }
  CHECK_THROWS_AS(MeanFieldGrid(3).index_of(0.5), Error);
}

TEST_CASE("option lookup is bounds-checked") {
  const auto scn = tiny_scenario();
  CHECK_THROWS_AS(scn.option(2), Error);
  try {
    (void)scn.option(7);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OptionOutOfRange);
  }
}

TEST_CASE("state overrides replace the option set at chosen states") {
  auto scn = tiny_scenario();
  StateOverride ov;
  ov.states = {1};
  ov.options = {testing::flat_option(0.9, 0.9, 5.0, 5.0), testing::flat_option(0.1, 0.1, 0.0, 0.0)};
  scn.state_overrides = {ov};
  CHECK(scenario_issues(scn).empty());
  CHECK(scn.option(0, 0) == scn.options[0]);
  CHECK(scn.option(0, 1).alpha == Approx(0.9));
  // m = 0 reads only the reserve price
  CHECK(per_step_cost(0, 1, {0, 0}, scn) == Approx(5.0 + 2.0 * 1.0));
  ov.options.pop_back();
  scn.state_overrides = {ov};
  CHECK_FALSE(scenario_issues(scn).empty());
}

}  // TEST_SUITE
