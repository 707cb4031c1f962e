#pragma once

// Problem data for the binary-demand mean-field team: options, the desired
// load trajectory, the distance penalty and the reduced per-step cost.
//
// Index conventions used throughout the library: mean-field values are
// carried as integer counts (0..n), option indices and trajectory states are
// 0-based. Files and the command line use 1-based option and state labels.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mfdsm/error.hpp"

namespace mfdsm {

/// intercept + slope * arg
struct AffineFunction {
  double intercept = 0.0;
  double slope = 0.0;

  double operator()(double arg) const { return intercept + slope * arg; }
  bool operator==(const AffineFunction&) const = default;
};

/// One generation/incentive/price profile offered by the operator.
///
/// `delivery` is evaluated at m and clipped from above at 1; a value <= 0
/// anywhere on the grid is a validation error. Prices are clipped at 0.
/// `reserve_price` takes (1 - m) as its argument, `demand_price` takes m.
struct OptionSpec {
  double alpha = 0.0;
  AffineFunction delivery{1.0, 0.0};
  AffineFunction reserve_price;
  AffineFunction demand_price;

  double participation() const { return alpha; }
  double delivery_rate(double m) const;
  double reserve(double one_minus_m) const;
  double demand(double m) const;

  bool operator==(const OptionSpec&) const = default;
};

/// Reserve action (applied to users with x = 0) and demand action (x = 1).
struct ActionPair {
  std::size_t reserve = 0;
  std::size_t demand = 0;

  bool operator==(const ActionPair&) const = default;
  auto operator<=>(const ActionPair&) const = default;
};

enum class TrajectoryKind { Table, PeriodicValley };

struct ValleyParams {
  std::size_t period = 100;
  std::size_t tau_begin = 25;
  std::size_t tau_end = 75;
  double base_level = 0.8;
  double dip_depth = 0.6;

  bool operator==(const ValleyParams&) const = default;
};

/// Deterministic finite-state generator of the target load: s' = f(s),
/// theta = h(s). A periodic valley is expanded to a table on construction;
/// its state index i corresponds to daily control instant i + 1.
class TrajectoryModel {
 public:
  TrajectoryModel() = default;

  static TrajectoryModel table(std::vector<std::size_t> successor,
                               std::vector<double> theta,
                               std::size_t initial_state = 0);
  static TrajectoryModel periodic_valley(const ValleyParams& params);

  TrajectoryKind kind() const { return kind_; }
  const std::optional<ValleyParams>& valley() const { return valley_; }

  std::size_t size() const { return successor_.size(); }
  std::size_t initial_state() const { return initial_; }
  std::size_t step(std::size_t s) const;
  double theta(std::size_t s) const;

  const std::vector<std::size_t>& successors() const { return successor_; }
  const std::vector<double>& thetas() const { return theta_; }

 private:
  TrajectoryKind kind_ = TrajectoryKind::Table;
  std::optional<ValleyParams> valley_;
  std::vector<std::size_t> successor_;
  std::vector<double> theta_;
  std::size_t initial_ = 0;
};

/// Target value of the valley-shaped load pattern at 1-based instant `s`.
double valley_theta(const ValleyParams& params, std::size_t s);

enum class DistanceKind { ScaledAbsolute };

struct DistanceSpec {
  DistanceKind kind = DistanceKind::ScaledAbsolute;
  double scale = 100.0;

  double operator()(double m, double theta) const;
};

/// Replaces the option list on a set of trajectory states. Only meaningful
/// when the kernel is built in state-dependent mode.
struct StateOverride {
  std::vector<std::size_t> states;
  std::vector<OptionSpec> options;
};

struct Scenario {
  std::size_t n = 1;
  double p = 0.5;
  double beta = 0.9;
  std::vector<OptionSpec> options;
  TrajectoryModel trajectory;
  DistanceSpec distance;
  std::vector<StateOverride> state_overrides;

  std::size_t k() const { return options.size(); }
  std::size_t grid_size() const { return n + 1; }
  bool state_dependent() const { return !state_overrides.empty(); }

  /// Option u as seen at trajectory state s (overrides applied).
  const OptionSpec& option(std::size_t u, std::size_t s) const;
  const OptionSpec& option(std::size_t u) const;
};

/// The grid {0, 1/n, ..., 1}. Points are addressed by integer count.
class MeanFieldGrid {
 public:
  explicit MeanFieldGrid(std::size_t n);

  std::size_t n() const { return n_; }
  std::size_t size() const { return n_ + 1; }
  double value(std::size_t count) const;
  /// Count i with i/n == m exactly; throws OffGrid otherwise.
  std::size_t index_of(double m) const;

 private:
  std::size_t n_;
};

struct ValidationIssue {
  ErrorCode code;
  std::string field;
  std::string message;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<ValidationIssue> issues);
  const std::vector<ValidationIssue>& issues() const { return issues_; }

 private:
  std::vector<ValidationIssue> issues_;
};

/// Every violated invariant, checked over the full grid. Empty means valid.
std::vector<ValidationIssue> scenario_issues(const Scenario& scn);

/// Returns `scn` unchanged if valid, otherwise throws ValidationError.
const Scenario& validate_scenario(const Scenario& scn);

/// l(m, s, g_r, g_d) = (1-m) c_r(g_r, 1-m) + m c_d(g_d, m) + D(m, theta(s)).
double per_step_cost(std::size_t m_count, std::size_t s, ActionPair action,
                     const Scenario& scn);

/// Largest per-step cost over the grid, all states and all action pairs.
double max_per_step_cost(const Scenario& scn);

std::size_t trajectory_step(std::size_t s, const TrajectoryModel& traj);
double trajectory_theta(std::size_t s, const TrajectoryModel& traj);

/// Peak-load management instance: n = 100, p = 0.8, beta = 0.9, a 100-slot
/// day with a valley between slots 25 and 75, basic/ancillary/incentive
/// options and D(m, theta) = 100 |m - theta|.
Scenario example1_scenario();

/// Two users, two options, two trajectory states. Small enough for
/// exhaustive strategy search.
Scenario tiny_scenario();

}  // namespace mfdsm
