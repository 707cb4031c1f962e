#include "mfdsm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mfdsm/parallel.hpp"

namespace mfdsm {

std::size_t PopulationState::m_count() const {
  return static_cast<std::size_t>(std::count(x.begin(), x.end(), std::uint8_t{1}));
}

PopulationState init_population(const Scenario& scn, InitMode mode, std::uint64_t seed) {
  PopulationState ps;
  ps.x.assign(scn.n, 0);
  ps.t = 1;
  ps.s = scn.trajectory.initial_state();
  if (mode == InitMode::Bernoulli) {
    const CounterRng rng(seed);
    for (std::size_t i = 0; i < scn.n; ++i) ps.x[i] = rng.uniform(0, i) < scn.p ? 1 : 0;
  }
  return ps;
}

namespace {

// Advance `x` in place given the options chosen for idle and active users.
void transition_users(std::vector<std::uint8_t>& x, const OptionSpec& reserve_opt,
                      const OptionSpec& demand_opt, double m, double p,
                      const CounterRng& rng, std::uint64_t step) {
  const double arrive = (1.0 - reserve_opt.participation()) * p;
  const double serve = demand_opt.delivery_rate(m);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = rng.uniform(step, i);
    if (x[i] == 0) {
      x[i] = u < arrive ? 1 : 0;
    } else {
      x[i] = u < serve ? 0 : 1;
    }
  }
}

}  // namespace

PopulationState step_population(const PopulationState& ps, const Policy& pol,
                                const Scenario& scn, const CounterRng& rng) {
  const std::size_t m_count = ps.m_count();
  const double m = static_cast<double>(m_count) / static_cast<double>(scn.n);
  // Every idle user gets policy_action(pol, 0, ...), every active user
  // policy_action(pol, 1, ...).
  const auto& reserve_opt = scn.option(policy_action(pol, 0, m_count, ps.s), ps.s);
  const auto& demand_opt = scn.option(policy_action(pol, 1, m_count, ps.s), ps.s);

  PopulationState next = ps;
  transition_users(next.x, reserve_opt, demand_opt, m, scn.p, rng, ps.t);
  next.t = ps.t + 1;
  next.s = scn.trajectory.step(ps.s);
  return next;
}

SimulationTrace run_simulation(const Scenario& scn, const Policy& pol, std::size_t horizon,
                               std::uint64_t seed, InitMode init) {
  if (horizon < 1) throw Error(ErrorCode::InvalidParameter, "horizon must be >= 1");
  if (pol.grid_size() != scn.grid_size() || pol.states() != scn.trajectory.size()) {
    throw Error(ErrorCode::InvalidParameter, "policy shape does not match the scenario");
  }
  SimulationTrace trace;
  trace.seed = seed;
  trace.horizon = horizon;
  trace.steps.reserve(horizon);

  const CounterRng rng(seed);
  auto ps = init_population(scn, init, seed);
  double weight = 1.0;
  for (std::size_t step = 0; step < horizon; ++step) {
    TraceStep rec;
    rec.t = ps.t;
    rec.s = ps.s;
    rec.m_count = ps.m_count();
    rec.action = pol.at(rec.m_count, ps.s);
    rec.theta = scn.trajectory.theta(ps.s);
    rec.step_cost = per_step_cost(rec.m_count, ps.s, rec.action, scn);
    trace.discounted_total += weight * rec.step_cost;
    trace.steps.push_back(rec);
    weight *= scn.beta;
    if (step + 1 < horizon) ps = step_population(ps, pol, scn, rng);
  }
  trace.truncation_bound = std::pow(scn.beta, static_cast<double>(horizon)) *
                           max_per_step_cost(scn) / (1.0 - scn.beta);
  return trace;
}

std::size_t default_horizon(const Scenario& scn, double tolerance) {
  const double tail = max_per_step_cost(scn) / (1.0 - scn.beta);
  if (tail <= tolerance) return 1;
  return static_cast<std::size_t>(std::ceil(std::log(tolerance / tail) / std::log(scn.beta)));
}

CostEstimate estimate_cost(const Scenario& scn, const Policy& pol, std::size_t horizon,
                           std::size_t replications, std::uint64_t base_seed, InitMode init,
                           unsigned threads) {
  if (replications < 1) throw Error(ErrorCode::InvalidParameter, "replications must be >= 1");
  std::vector<double> totals(replications);
  parallel_for(replications, threads, [&](std::size_t r) {
    totals[r] = run_simulation(scn, pol, horizon, CounterRng::replication_seed(base_seed, r), init)
                    .discounted_total;
  });
  CostEstimate est;
  est.replications = replications;
  est.mean = std::accumulate(totals.begin(), totals.end(), 0.0) / static_cast<double>(replications);
  if (replications > 1) {
    double ss = 0.0;
    for (double v : totals) ss += (v - est.mean) * (v - est.mean);
    const double var = ss / static_cast<double>(replications - 1);
    est.std_error = std::sqrt(var / static_cast<double>(replications));
  }
  return est;
}

std::vector<std::uint64_t> sample_transition_counts(const Scenario& scn, std::size_t m_count,
                                                    ActionPair action, std::size_t s,
                                                    std::size_t draws, std::uint64_t seed) {
  if (m_count > scn.n) throw Error(ErrorCode::OffGrid, "m_count beyond n");
  const double m = static_cast<double>(m_count) / static_cast<double>(scn.n);
  const auto& reserve_opt = scn.option(action.reserve, s);
  const auto& demand_opt = scn.option(action.demand, s);
  const CounterRng rng(seed);

  std::vector<std::uint64_t> hist(scn.n + 1, 0);
  std::vector<std::uint8_t> x(scn.n);
  for (std::size_t d = 0; d < draws; ++d) {
    for (std::size_t i = 0; i < scn.n; ++i) x[i] = i < m_count ? 1 : 0;
    transition_users(x, reserve_opt, demand_opt, m, scn.p, rng, d + 1);
    ++hist[static_cast<std::size_t>(std::count(x.begin(), x.end(), std::uint8_t{1}))];
  }
  return hist;
}

}  // namespace mfdsm
