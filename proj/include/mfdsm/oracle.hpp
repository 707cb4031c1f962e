#pragma once

// Brute-force references at tiny scale. Nothing here goes through the
// binomial/convolution kernel or the Bellman sweep, so each function is an
// independent check on those paths.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mfdsm/kernel.hpp"
#include "mfdsm/model.hpp"
#include "mfdsm/solver.hpp"

namespace mfdsm {

inline constexpr std::size_t kMaxEnumerationUsers = 12;
inline constexpr std::uint64_t kMaxStrategyProfiles = 1'000'000;

/// Joint states are bitmasks: bit i is user i's demand state.
using JointState = std::uint32_t;

/// Probability of moving from joint state `from` to `to` when user i uses
/// option options_per_user[i] at mean-field m (per-user two-state chain).
double joint_transition_probability(JointState from, JointState to,
                                    const std::vector<const OptionSpec*>& options_per_user,
                                    double m, double p);

/// P(next count | m_count, action) by summing over all 2^n next joint states.
/// `active` selects which users hold a demand (default: the first m_count).
/// Throws TooLarge for n > 12.
Distribution enumerate_kernel_row(const Scenario& scn, std::size_t m_count, ActionPair action,
                                  std::optional<std::size_t> s = std::nullopt,
                                  std::optional<JointState> active = std::nullopt);

struct InitialJointState {
  JointState x = 0;
  double probability = 1.0;
};

struct StrategyEntry {
  std::size_t t = 1;
  /// Mean-field counts m_1..m_t observed so far.
  std::vector<std::size_t> history;
  ActionPair action;
};

struct StrategySearchResult {
  double best_cost = 0.0;
  std::vector<StrategyEntry> best_strategy;
  /// Best cost among profiles whose actions depend on the history only
  /// through its last mean-field value.
  double best_markov_cost = 0.0;
  std::uint64_t profiles = 0;
};

/// Number of deterministic strategy profiles g_t(x, m_1..m_t) over
/// reachable histories; stops counting once `limit` is exceeded.
std::uint64_t strategy_search_size(const Scenario& scn, std::size_t horizon,
                                   const std::vector<InitialJointState>& initial,
                                   std::uint64_t limit = kMaxStrategyProfiles);

/// Exhaustive search over those profiles, evaluating the discounted
/// `horizon`-step cost exactly on the joint chain. Preconditions n <= 3,
/// k <= 3, horizon <= 2 (TooLarge) and at most 10^6 profiles
/// (SearchSpaceTooLarge). Trajectory starts at the scenario's initial state.
StrategySearchResult enumerate_strategies(const Scenario& scn, std::size_t horizon,
                                          const std::vector<InitialJointState>& initial);

/// Rule assigning an option to each user from its index and local state.
using IndividualRule = std::function<std::size_t(std::size_t user, int x)>;

/// Largest difference, over pairs of two-step histories (m_1, m_2) sharing
/// m_2, between the conditional laws of m_3, for a population started
/// uniformly over all joint states and driven by `rule`. Zero (to rounding)
/// when the rule only depends on x.
double history_dependence_gap(const Scenario& scn, const IndividualRule& rule);

/// Solves (I - beta P_pol) V = l_pol with a sparse LU factorization.
ValueFunction exact_policy_evaluation(const Policy& pol, const Scenario& scn,
                                      const KernelTensor& kernel);

/// ||(I - beta P_pol) V - l_pol||_inf
double policy_evaluation_residual(const ValueFunction& v, const Policy& pol,
                                  const Scenario& scn, const KernelTensor& kernel);

struct CheckResult {
  std::string name;
  bool passed = false;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct VerifyOptions {
  /// Added to one kernel entry before comparison (negative control).
  double kernel_perturbation = 0.0;
  std::vector<std::size_t> kernel_sizes{1, 2, 3, 6, 12};
};

std::vector<CheckResult> run_verification(const VerifyOptions& opts = {});

/// Max entrywise deviation between every row of `kernel` and the
/// enumeration oracle.
double kernel_oracle_deviation(const Scenario& scn, const KernelTensor& kernel);

}  // namespace mfdsm
