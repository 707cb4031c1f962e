#include "mfdsm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <utility>

namespace mfdsm {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::EmptyOptions: return "EmptyOptions";
    case ErrorCode::BadTrajectory: return "BadTrajectory";
    case ErrorCode::OptionOutOfRange: return "OptionOutOfRange";
    case ErrorCode::OffGrid: return "OffGrid";
    case ErrorCode::RowNotStochastic: return "RowNotStochastic";
    case ErrorCode::MaxItersExceeded: return "MaxItersExceeded";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::SearchSpaceTooLarge: return "SearchSpaceTooLarge";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

double OptionSpec::delivery_rate(double m) const {
  return std::min(1.0, delivery(m));
}

double OptionSpec::reserve(double one_minus_m) const {
  return std::max(0.0, reserve_price(one_minus_m));
}

double OptionSpec::demand(double m) const {
  return std::max(0.0, demand_price(m));
}

double valley_theta(const ValleyParams& params, std::size_t s) {
  if (s < params.tau_begin || s >= params.tau_end ||
      params.tau_end <= params.tau_begin) {
    return params.base_level;
  }
  const double phase = static_cast<double>(s - params.tau_begin) /
                       static_cast<double>(params.tau_end - params.tau_begin);
  return params.base_level - params.dip_depth * std::sin(std::numbers::pi * phase);
}

TrajectoryModel TrajectoryModel::table(std::vector<std::size_t> successor,
                                       std::vector<double> theta,
                                       std::size_t initial_state) {
  TrajectoryModel t;
  t.kind_ = TrajectoryKind::Table;
  t.successor_ = std::move(successor);
  t.theta_ = std::move(theta);
  t.initial_ = initial_state;
  return t;
}

TrajectoryModel TrajectoryModel::periodic_valley(const ValleyParams& params) {
  TrajectoryModel t;
  t.kind_ = TrajectoryKind::PeriodicValley;
  t.valley_ = params;
  t.successor_.resize(params.period);
  t.theta_.resize(params.period);
  for (std::size_t i = 0; i < params.period; ++i) {
    t.successor_[i] = (i + 1 < params.period) ? i + 1 : 0;
    t.theta_[i] = valley_theta(params, i + 1);
  }
  t.initial_ = 0;
  return t;
}

std::size_t TrajectoryModel::step(std::size_t s) const {
  if (s >= successor_.size()) {
    throw Error(ErrorCode::InvalidParameter, "trajectory state out of range");
  }
  return successor_[s];
}

double TrajectoryModel::theta(std::size_t s) const {
  if (s >= theta_.size()) {
    throw Error(ErrorCode::InvalidParameter, "trajectory state out of range");
  }
  return theta_[s];
}

double DistanceSpec::operator()(double m, double theta) const {
  return scale * std::abs(m - theta);
}

const OptionSpec& Scenario::option(std::size_t u, std::size_t s) const {
  if (u >= options.size()) {
    throw Error(ErrorCode::OptionOutOfRange,
                "option index " + std::to_string(u + 1) + " outside 1.." +
                    std::to_string(options.size()));
  }
  for (const auto& ov : state_overrides) {
    if (std::find(ov.states.begin(), ov.states.end(), s) != ov.states.end()) {
      return ov.options.at(u);
    }
  }
  return options[u];
}

const OptionSpec& Scenario::option(std::size_t u) const {
  if (u >= options.size()) {
    throw Error(ErrorCode::OptionOutOfRange,
                "option index " + std::to_string(u + 1) + " outside 1.." +
                    std::to_string(options.size()));
  }
  return options[u];
}

MeanFieldGrid::MeanFieldGrid(std::size_t n) : n_(n) {
  if (n == 0) throw Error(ErrorCode::InvalidParameter, "grid needs n >= 1");
}

double MeanFieldGrid::value(std::size_t count) const {
  if (count > n_) throw Error(ErrorCode::OffGrid, "count beyond n");
  return static_cast<double>(count) / static_cast<double>(n_);
}

std::size_t MeanFieldGrid::index_of(double m) const {
  if (!(m >= 0.0 && m <= 1.0)) {
    throw Error(ErrorCode::OffGrid, "mean-field value outside [0, 1]");
  }
  const auto count = static_cast<std::size_t>(std::llround(m * static_cast<double>(n_)));
  if (value(count) != m) {
    throw Error(ErrorCode::OffGrid, "mean-field value is not a multiple of 1/n");
  }
  return count;
}

namespace {

std::string join_issues(const std::vector<ValidationIssue>& issues) {
  std::ostringstream out;
  out << "invalid scenario:";
  for (const auto& issue : issues) {
    out << "\n  " << to_string(issue.code) << "(" << issue.field << "): " << issue.message;
  }
  return out.str();
}

void check_options(const std::vector<OptionSpec>& options, std::size_t n,
                   const std::string& prefix, std::vector<ValidationIssue>& issues) {
  for (std::size_t u = 0; u < options.size(); ++u) {
    const auto& opt = options[u];
    const std::string where = prefix + "options[" + std::to_string(u + 1) + "]";
    if (!(opt.alpha >= 0.0 && opt.alpha <= 1.0)) {
      issues.push_back({ErrorCode::InvalidParameter, where + ".alpha",
                        "participation rate must lie in [0, 1]"});
    }
    // Report only the first offending grid point per field.
    bool delivery_bad = false, reserve_bad = false, demand_bad = false;
    for (std::size_t i = 0; i <= n; ++i) {
      const double m = static_cast<double>(i) / static_cast<double>(n);
      const double q = opt.delivery(m);
      if (!delivery_bad && !(std::isfinite(q) && q > 0.0)) {
        delivery_bad = true;
        issues.push_back({ErrorCode::InvalidParameter, where + ".delivery",
                          "delivery rate must lie in (0, 1]; got " + std::to_string(q) +
                              " at m_count " + std::to_string(i)});
      }
      if (!reserve_bad && !std::isfinite(opt.reserve_price(1.0 - m))) {
        reserve_bad = true;
        issues.push_back({ErrorCode::InvalidParameter, where + ".reserve_price",
                          "non-finite price at m_count " + std::to_string(i)});
      }
      if (!demand_bad && !std::isfinite(opt.demand_price(m))) {
        demand_bad = true;
        issues.push_back({ErrorCode::InvalidParameter, where + ".demand_price",
                          "non-finite price at m_count " + std::to_string(i)});
      }
    }
  }
}

}  // namespace

ValidationError::ValidationError(std::vector<ValidationIssue> issues)
    : Error(issues.empty() ? ErrorCode::InvalidParameter : issues.front().code,
            join_issues(issues)),
      issues_(std::move(issues)) {}

std::vector<ValidationIssue> scenario_issues(const Scenario& scn) {
  std::vector<ValidationIssue> issues;
  if (scn.n < 1) {
    issues.push_back({ErrorCode::InvalidParameter, "n", "population size must be >= 1"});
  }
  if (!(scn.p > 0.0 && scn.p < 1.0)) {
    issues.push_back({ErrorCode::InvalidParameter, "p", "demand probability must lie in (0, 1)"});
  }
  if (!(scn.beta > 0.0 && scn.beta < 1.0)) {
    issues.push_back({ErrorCode::InvalidParameter, "beta", "discount factor must lie in (0, 1)"});
  }
  if (scn.options.empty()) {
    issues.push_back({ErrorCode::EmptyOptions, "options", "at least one option is required"});
  }
  const std::size_t n = std::max<std::size_t>(scn.n, 1);
  check_options(scn.options, n, "", issues);

  const auto& traj = scn.trajectory;
  if (const auto& v = traj.valley()) {
    if (v->period < 1) {
      issues.push_back({ErrorCode::BadTrajectory, "trajectory.period", "period must be >= 1"});
    }
    if (!(v->tau_begin >= 1 && v->tau_begin < v->period)) {
      issues.push_back({ErrorCode::BadTrajectory, "trajectory.tau_begin",
                        "tau_begin must lie in [1, period)"});
    }
    if (!(v->tau_end > v->tau_begin && v->tau_end < v->period)) {
      issues.push_back({ErrorCode::BadTrajectory, "trajectory.tau_end",
                        "tau_end must lie in (tau_begin, period)"});
    }
  }
  const std::size_t states = traj.size();
  if (states == 0) {
    issues.push_back({ErrorCode::BadTrajectory, "trajectory", "state space is empty"});
  }
  if (traj.thetas().size() != states) {
    issues.push_back({ErrorCode::BadTrajectory, "trajectory.theta",
                      "theta table length differs from successor table length"});
  }
  for (std::size_t s = 0; s < states; ++s) {
    if (traj.successors()[s] >= states) {
      issues.push_back({ErrorCode::BadTrajectory, "trajectory.successor",
                        "successor of state " + std::to_string(s + 1) + " is outside the state space"});
    }
  }
  for (std::size_t s = 0; s < traj.thetas().size(); ++s) {
    const double th = traj.thetas()[s];
    if (!(th >= 0.0 && th <= 1.0)) {
      issues.push_back({ErrorCode::BadTrajectory, "trajectory.theta",
                        "theta of state " + std::to_string(s + 1) + " is outside [0, 1]"});
    }
  }
  if (states > 0 && traj.initial_state() >= states) {
    issues.push_back({ErrorCode::BadTrajectory, "trajectory.initial_state",
                      "initial state is outside the state space"});
  }

  if (scn.distance.kind != DistanceKind::ScaledAbsolute) {
    issues.push_back({ErrorCode::InvalidParameter, "distance.kind", "unsupported distance"});
  }
  if (!(scn.distance.scale >= 0.0 && std::isfinite(scn.distance.scale))) {
    issues.push_back({ErrorCode::InvalidParameter, "distance.scale",
                      "scale must be a nonnegative real"});
  }

  for (std::size_t j = 0; j < scn.state_overrides.size(); ++j) {
    const auto& ov = scn.state_overrides[j];
    const std::string where = "state_overrides[" + std::to_string(j + 1) + "]";
    if (ov.options.size() != scn.options.size()) {
      issues.push_back({ErrorCode::InvalidParameter, where + ".options",
                        "override must list exactly k options"});
    }
    for (std::size_t s : ov.states) {
      if (s >= states) {
        issues.push_back({ErrorCode::InvalidParameter, where + ".states",
                          "state " + std::to_string(s + 1) + " is outside the state space"});
      }
    }
    check_options(ov.options, n, where + ".", issues);
  }
  return issues;
}

const Scenario& validate_scenario(const Scenario& scn) {
  auto issues = scenario_issues(scn);
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return scn;
}

double per_step_cost(std::size_t m_count, std::size_t s, ActionPair action,
                     const Scenario& scn) {
  if (m_count > scn.n) throw Error(ErrorCode::OffGrid, "m_count beyond n");
  const double m = static_cast<double>(m_count) / static_cast<double>(scn.n);
  const auto& reserve_opt = scn.option(action.reserve, s);
  const auto& demand_opt = scn.option(action.demand, s);
  return (1.0 - m) * reserve_opt.reserve(1.0 - m) + m * demand_opt.demand(m) +
         scn.distance(m, scn.trajectory.theta(s));
}

double max_per_step_cost(const Scenario& scn) {
  double best = 0.0;
  for (std::size_t s = 0; s < scn.trajectory.size(); ++s) {
    for (std::size_t i = 0; i <= scn.n; ++i) {
      for (std::size_t r = 0; r < scn.k(); ++r) {
        for (std::size_t d = 0; d < scn.k(); ++d) {
          best = std::max(best, per_step_cost(i, s, {r, d}, scn));
        }
      }
    }
  }
  return best;
}

std::size_t trajectory_step(std::size_t s, const TrajectoryModel& traj) {
  return traj.step(s);
}

double trajectory_theta(std::size_t s, const TrajectoryModel& traj) {
  return traj.theta(s);
}

Scenario example1_scenario() {
  Scenario scn;
  scn.n = 100;
  scn.p = 0.8;
  scn.beta = 0.9;

  OptionSpec basic;
  basic.alpha = 0.0;
  basic.delivery = {0.2, 0.0};
  basic.reserve_price = {1.0, 1.0};  // 1 + (1 - m)
  basic.demand_price = {1.5, 1.5};   // 1.5 + 1.5 m

  OptionSpec ancillary;
  ancillary.alpha = 0.0;
  ancillary.delivery = {0.4, 0.0};
  ancillary.reserve_price = {2.0, 0.0};
  ancillary.demand_price = {3.0, 0.0};

  OptionSpec incentive;
  incentive.alpha = 0.85;
  incentive.delivery = {0.15, 0.0};
  incentive.reserve_price = {1.0 - 0.05, 1.0};
  incentive.demand_price = {1.5 - 0.1, 1.5};

  scn.options = {basic, ancillary, incentive};
  scn.trajectory = TrajectoryModel::periodic_valley({100, 25, 75, 0.8, 0.6});
  scn.distance = {DistanceKind::ScaledAbsolute, 100.0};
  return scn;
}

Scenario tiny_scenario() {
  Scenario scn;
  scn.n = 2;
  scn.p = 0.7;
  scn.beta = 0.9;

  OptionSpec plain;
  plain.alpha = 0.0;
  plain.delivery = {0.3, 0.0};
  plain.reserve_price = {1.0, 1.0};
  plain.demand_price = {1.5, 1.5};

  OptionSpec managed;
  managed.alpha = 0.6;
  managed.delivery = {0.6, -0.2};
  managed.reserve_price = {1.2, 0.5};
  managed.demand_price = {2.5, 0.0};

  scn.options = {plain, managed};
  scn.trajectory = TrajectoryModel::table({1, 0}, {0.5, 1.0}, 0);
  scn.distance = {DistanceKind::ScaledAbsolute, 2.0};
  return scn;
}

}  // namespace mfdsm
