#pragma once

// n-user population driven by a decentralized policy. Each user sees only
// its own state and the broadcast mean-field count.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "mfdsm/model.hpp"
#include "mfdsm/rng.hpp"
#include "mfdsm/solver.hpp"

namespace mfdsm {

enum class InitMode { AllZero, Bernoulli };

struct PopulationState {
  std::vector<std::uint8_t> x;
  std::size_t t = 1;
  std::size_t s = 0;

  std::size_t m_count() const;
};

/// all_zero, or each user independently active with probability p.
PopulationState init_population(const Scenario& scn, InitMode mode, std::uint64_t seed);

/// One transition. Users with x = 0 take the reserve option and become
/// active w.p. (1 - alpha) p; users with x = 1 take the demand option and
/// are served w.p. q(option, m). Draws use substream (ps.t, user).
PopulationState step_population(const PopulationState& ps, const Policy& pol,
                                const Scenario& scn, const CounterRng& rng);

struct TraceStep {
  std::size_t t = 0;
  std::size_t s = 0;
  std::size_t m_count = 0;
  ActionPair action;
  double theta = 0.0;
  double step_cost = 0.0;

  bool operator==(const TraceStep&) const = default;
};

struct SimulationTrace {
  std::vector<TraceStep> steps;
  double discounted_total = 0.0;
  /// beta^horizon * l_max / (1 - beta): bound on the cost beyond the horizon.
  double truncation_bound = 0.0;
  std::uint64_t seed = 0;
  std::size_t horizon = 0;
};

SimulationTrace run_simulation(const Scenario& scn, const Policy& pol, std::size_t horizon,
                               std::uint64_t seed, InitMode init = InitMode::Bernoulli);

/// Smallest horizon whose truncation bound is below `tolerance`.
std::size_t default_horizon(const Scenario& scn, double tolerance = 1e-3);

struct CostEstimate {
  double mean = 0.0;
  /// Empty for a single replication.
  std::optional<double> std_error;
  std::size_t replications = 0;
};

/// Independent replications with seeds CounterRng::replication_seed(base, r).
CostEstimate estimate_cost(const Scenario& scn, const Policy& pol, std::size_t horizon,
                           std::size_t replications, std::uint64_t base_seed,
                           InitMode init = InitMode::Bernoulli, unsigned threads = 1);

/// Histogram of the next mean-field count over `draws` independent one-step
/// transitions of a population that starts with users 0..m_count-1 active.
std::vector<std::uint64_t> sample_transition_counts(const Scenario& scn, std::size_t m_count,
                                                    ActionPair action, std::size_t s,
                                                    std::size_t draws, std::uint64_t seed);

}  // namespace mfdsm
