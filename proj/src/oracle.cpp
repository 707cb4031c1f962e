#include "mfdsm/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <sstream>
#include <utility>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

namespace mfdsm {

double joint_transition_probability(JointState from, JointState to,
                                    const std::vector<const OptionSpec*>& options_per_user,
                                    double m, double p) {
  double prob = 1.0;
  for (std::size_t i = 0; i < options_per_user.size(); ++i) {
    const bool was_active = (from >> i) & 1u;
    const bool is_active = (to >> i) & 1u;
    const OptionSpec& opt = *options_per_user[i];
    double up;  // P(active next)
    if (!was_active) {
      up = (1.0 - opt.participation()) * p;
    } else {
      up = 1.0 - opt.delivery_rate(m);
    }
    prob *= is_active ? up : 1.0 - up;
    if (prob == 0.0) break;
  }
  return prob;
}

namespace {

std::size_t popcount(JointState x) { return static_cast<std::size_t>(std::popcount(x)); }

std::vector<const OptionSpec*> expand_pair(const Scenario& scn, JointState x, ActionPair action,
                                           std::size_t s) {
  std::vector<const OptionSpec*> out(scn.n);
  for (std::size_t i = 0; i < scn.n; ++i) {
    out[i] = ((x >> i) & 1u) ? &scn.option(action.demand, s) : &scn.option(action.reserve, s);
  }
  return out;
}

// (1/n) sum of per-user prices plus the distance penalty.
double joint_stage_cost(const Scenario& scn, JointState x, ActionPair action, std::size_t s) {
  const double m = static_cast<double>(popcount(x)) / static_cast<double>(scn.n);
  double prices = 0.0;
  for (std::size_t i = 0; i < scn.n; ++i) {
    if ((x >> i) & 1u) {
      prices += scn.option(action.demand, s).demand(m);
    } else {
      prices += scn.option(action.reserve, s).reserve(1.0 - m);
    }
  }
  return prices / static_cast<double>(scn.n) + scn.distance(m, scn.trajectory.theta(s));
}

}  // namespace

Distribution enumerate_kernel_row(const Scenario& scn, std::size_t m_count, ActionPair action,
                                  std::optional<std::size_t> s, std::optional<JointState> active) {
  if (scn.n > kMaxEnumerationUsers) {
    throw Error(ErrorCode::TooLarge, "kernel enumeration is limited to n <= 12");
  }
  if (m_count > scn.n) throw Error(ErrorCode::OffGrid, "m_count beyond n");
  const JointState x = active.value_or((JointState{1} << m_count) - 1);
  if (popcount(x) != m_count || (x >> scn.n) != 0) {
    throw Error(ErrorCode::InvalidParameter, "joint state does not hold m_count demands");
  }
  const std::size_t state = s.value_or(0);
  std::vector<const OptionSpec*> opts(scn.n);
  for (std::size_t i = 0; i < scn.n; ++i) {
    const std::size_t u = ((x >> i) & 1u) ? action.demand : action.reserve;
    opts[i] = s ? &scn.option(u, state) : &scn.option(u);
  }
  const double m = static_cast<double>(m_count) / static_cast<double>(scn.n);
  std::vector<double> row(scn.n + 1, 0.0);
  const JointState count = JointState{1} << scn.n;
  for (JointState y = 0; y < count; ++y) {
    row[popcount(y)] += joint_transition_probability(x, y, opts, m, scn.p);
  }
  return Distribution(std::move(row));
}

namespace {

struct Mass {
  JointState x;
  std::vector<std::size_t> history;
  double prob;
};

struct SearchContext {
  const Scenario* scn;
  std::size_t horizon;
  std::size_t pairs;  // k^2
  std::vector<std::size_t> state_at;  // trajectory state at stage t (1-based t)
};

std::vector<std::vector<std::size_t>> distinct_histories(const std::vector<Mass>& dist) {
  std::vector<std::vector<std::size_t>> hs;
  for (const auto& mass : dist) hs.push_back(mass.history);
  std::sort(hs.begin(), hs.end());
  hs.erase(std::unique(hs.begin(), hs.end()), hs.end());
  return hs;
}

ActionPair decode_pair(std::size_t code, std::size_t k) { return {code / k, code % k}; }

// Assignment number `a` -> pair code for each history (mixed radix, first
// history most significant so enumeration order is lexicographic).
std::vector<std::size_t> decode_assignment(std::uint64_t a, std::size_t histories,
                                           std::size_t pairs) {
  std::vector<std::size_t> codes(histories);
  for (std::size_t h = histories; h-- > 0;) {
    codes[h] = static_cast<std::size_t>(a % pairs);
    a /= pairs;
  }
  return codes;
}

std::uint64_t int_pow(std::uint64_t base, std::size_t exp, std::uint64_t cap) {
  std::uint64_t out = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    if (out > cap / base) return cap + 1;
    out *= base;
  }
  return out;
}

std::vector<Mass> propagate(const SearchContext& ctx, const std::vector<Mass>& dist,
                            const std::vector<std::vector<std::size_t>>& histories,
                            const std::vector<std::size_t>& codes, std::size_t s) {
  const Scenario& scn = *ctx.scn;
  std::map<std::pair<JointState, std::vector<std::size_t>>, double> merged;
  const JointState count = JointState{1} << scn.n;
  for (const auto& mass : dist) {
    const auto h = static_cast<std::size_t>(
        std::lower_bound(histories.begin(), histories.end(), mass.history) - histories.begin());
    const ActionPair action = decode_pair(codes[h], scn.k());
    const auto opts = expand_pair(scn, mass.x, action, s);
    const double m = static_cast<double>(popcount(mass.x)) / static_cast<double>(scn.n);
    for (JointState y = 0; y < count; ++y) {
      const double pr = mass.prob * joint_transition_probability(mass.x, y, opts, m, scn.p);
      if (pr <= 0.0) continue;
      auto next_history = mass.history;
      next_history.push_back(popcount(y));
      merged[{y, std::move(next_history)}] += pr;
    }
  }
  std::vector<Mass> out;
  out.reserve(merged.size());
  for (auto& [key, pr] : merged) out.push_back({key.first, key.second, pr});
  return out;
}

std::uint64_t count_profiles(const SearchContext& ctx, std::size_t t, const std::vector<Mass>& dist,
                             std::uint64_t limit) {
  const auto histories = distinct_histories(dist);
  const std::uint64_t assignments = int_pow(ctx.pairs, histories.size(), limit);
  if (t == ctx.horizon || assignments > limit) return assignments;
  std::uint64_t total = 0;
  for (std::uint64_t a = 0; a < assignments; ++a) {
    const auto codes = decode_assignment(a, histories.size(), ctx.pairs);
    total += count_profiles(ctx, t + 1, propagate(ctx, dist, histories, codes, ctx.state_at[t]),
                            limit - std::min(limit, total));
    if (total > limit) return total;
  }
  return total;
}

bool is_markov(const std::vector<std::vector<std::size_t>>& histories,
               const std::vector<std::size_t>& codes) {
  std::map<std::size_t, std::size_t> by_last;
  for (std::size_t h = 0; h < histories.size(); ++h) {
    auto [it, inserted] = by_last.emplace(histories[h].back(), codes[h]);
    if (!inserted && it->second != codes[h]) return false;
  }
  return true;
}

struct Frame {
  std::vector<std::vector<std::size_t>> histories;
  std::vector<std::size_t> codes;
};

void search(const SearchContext& ctx, std::size_t t, const std::vector<Mass>& dist,
            double cost_so_far, bool markov_so_far, std::vector<Frame>& frames,
            StrategySearchResult& result, bool& have_best, bool& have_markov) {
  const Scenario& scn = *ctx.scn;
  const std::size_t s = ctx.state_at[t];
  const double weight = std::pow(scn.beta, static_cast<double>(t - 1));
  const auto histories = distinct_histories(dist);
  const std::uint64_t assignments = int_pow(ctx.pairs, histories.size(), kMaxStrategyProfiles);

  for (std::uint64_t a = 0; a < assignments; ++a) {
    const auto codes = decode_assignment(a, histories.size(), ctx.pairs);
    double stage = 0.0;
    for (const auto& mass : dist) {
      const auto h = static_cast<std::size_t>(
          std::lower_bound(histories.begin(), histories.end(), mass.history) - histories.begin());
      stage += mass.prob * joint_stage_cost(scn, mass.x, decode_pair(codes[h], scn.k()), s);
    }
    const double cost = cost_so_far + weight * stage;
    const bool markov = markov_so_far && is_markov(histories, codes);
    frames.push_back({histories, codes});
    if (t == ctx.horizon) {
      ++result.profiles;
      if (!have_best || cost < result.best_cost) {
        have_best = true;
        result.best_cost = cost;
        result.best_strategy.clear();
        for (std::size_t f = 0; f < frames.size(); ++f) {
          for (std::size_t h = 0; h < frames[f].histories.size(); ++h) {
            result.best_strategy.push_back(
                {f + 1, frames[f].histories[h], decode_pair(frames[f].codes[h], scn.k())});
          }
        }
      }
      if (markov && (!have_markov || cost < result.best_markov_cost)) {
        have_markov = true;
        result.best_markov_cost = cost;
      }
    } else {
      search(ctx, t + 1, propagate(ctx, dist, histories, codes, s), cost, markov, frames, result,
             have_best, have_markov);
    }
    frames.pop_back();
  }
}

SearchContext make_context(const Scenario& scn, std::size_t horizon) {
  SearchContext ctx{&scn, horizon, scn.k() * scn.k(), {}};
  ctx.state_at.assign(horizon + 1, 0);
  std::size_t s = scn.trajectory.initial_state();
  for (std::size_t t = 1; t <= horizon; ++t) {
    ctx.state_at[t] = s;
    s = scn.trajectory.step(s);
  }
  return ctx;
}

std::vector<Mass> initial_masses(const Scenario& scn,
                                 const std::vector<InitialJointState>& initial) {
  std::vector<Mass> dist;
  for (const auto& init : initial) {
    if ((init.x >> scn.n) != 0) {
      throw Error(ErrorCode::InvalidParameter, "initial joint state has bits beyond n");
    }
    if (init.probability > 0.0) dist.push_back({init.x, {popcount(init.x)}, init.probability});
  }
  if (dist.empty()) throw Error(ErrorCode::InvalidParameter, "initial distribution is empty");
  return dist;
}

}  // namespace

std::uint64_t strategy_search_size(const Scenario& scn, std::size_t horizon,
                                   const std::vector<InitialJointState>& initial,
                                   std::uint64_t limit) {
  if (horizon < 1) throw Error(ErrorCode::InvalidParameter, "horizon must be >= 1");
  const auto ctx = make_context(scn, horizon);
  return count_profiles(ctx, 1, initial_masses(scn, initial), limit);
}

StrategySearchResult enumerate_strategies(const Scenario& scn, std::size_t horizon,
                                          const std::vector<InitialJointState>& initial) {
  validate_scenario(scn);
  if (scn.n > 3 || scn.k() > 3 || horizon > 2) {
    throw Error(ErrorCode::TooLarge, "strategy enumeration needs n <= 3, k <= 3, horizon <= 2");
  }
  if (horizon < 1) throw Error(ErrorCode::InvalidParameter, "horizon must be >= 1");
  const std::uint64_t size = strategy_search_size(scn, horizon, initial);
  if (size > kMaxStrategyProfiles) {
    throw Error(ErrorCode::SearchSpaceTooLarge,
                "strategy search space has more than " + std::to_string(kMaxStrategyProfiles) +
                    " profiles (counted " + std::to_string(size) + ")");
  }
  const auto ctx = make_context(scn, horizon);
  StrategySearchResult result;
  std::vector<Frame> frames;
  bool have_best = false, have_markov = false;
  search(ctx, 1, initial_masses(scn, initial), 0.0, true, frames, result, have_best, have_markov);
  return result;
}

double history_dependence_gap(const Scenario& scn, const IndividualRule& rule) {
  if (scn.n > kMaxEnumerationUsers) {
    throw Error(ErrorCode::TooLarge, "history check is limited to n <= 12");
  }
  const std::size_t s1 = scn.trajectory.initial_state();
  const std::size_t s2 = scn.trajectory.step(s1);
  const JointState count = JointState{1} << scn.n;
  const std::size_t grid = scn.n + 1;

  auto options_for = [&](JointState x, std::size_t s) {
    std::vector<const OptionSpec*> opts(scn.n);
    for (std::size_t i = 0; i < scn.n; ++i) {
      opts[i] = &scn.option(rule(i, static_cast<int>((x >> i) & 1u)), s);
    }
    return opts;
  };

  // joint law of (m1, m2, m3); index (m1 * grid + m2) * grid + m3
  std::vector<double> law(grid * grid * grid, 0.0);
  const double start = 1.0 / static_cast<double>(count);
  for (JointState x1 = 0; x1 < count; ++x1) {
    const auto o1 = options_for(x1, s1);
    const double m1 = static_cast<double>(popcount(x1)) / static_cast<double>(scn.n);
    for (JointState x2 = 0; x2 < count; ++x2) {
      const double p12 = start * joint_transition_probability(x1, x2, o1, m1, scn.p);
      if (p12 == 0.0) continue;
      const auto o2 = options_for(x2, s2);
      const double m2 = static_cast<double>(popcount(x2)) / static_cast<double>(scn.n);
      for (JointState x3 = 0; x3 < count; ++x3) {
        law[(popcount(x1) * grid + popcount(x2)) * grid + popcount(x3)] +=
            p12 * joint_transition_probability(x2, x3, o2, m2, scn.p);
      }
    }
  }

  double gap = 0.0;
  for (std::size_t m2 = 0; m2 < grid; ++m2) {
    std::vector<std::vector<double>> conditionals;
    for (std::size_t m1 = 0; m1 < grid; ++m1) {
      double mass = 0.0;
      for (std::size_t m3 = 0; m3 < grid; ++m3) mass += law[(m1 * grid + m2) * grid + m3];
      if (mass <= 1e-300) continue;
      std::vector<double> cond(grid);
      for (std::size_t m3 = 0; m3 < grid; ++m3) cond[m3] = law[(m1 * grid + m2) * grid + m3] / mass;
      conditionals.push_back(std::move(cond));
    }
    for (std::size_t a = 0; a < conditionals.size(); ++a) {
      for (std::size_t b = a + 1; b < conditionals.size(); ++b) {
        for (std::size_t m3 = 0; m3 < grid; ++m3) {
          gap = std::max(gap, std::abs(conditionals[a][m3] - conditionals[b][m3]));
        }
      }
    }
  }
  return gap;
}

ValueFunction exact_policy_evaluation(const Policy& pol, const Scenario& scn,
                                      const KernelTensor& kernel) {
  const std::size_t grid = scn.grid_size();
  const std::size_t states = scn.trajectory.size();
  if (pol.grid_size() != grid || pol.states() != states) {
    throw Error(ErrorCode::InvalidParameter, "policy shape does not match the scenario");
  }
  const auto dim = static_cast<Eigen::Index>(grid * states);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(dim) * (grid + 1));
  Eigen::VectorXd rhs(dim);
  for (std::size_t s = 0; s < states; ++s) {
    const std::size_t next_s = scn.trajectory.step(s);
    for (std::size_t m = 0; m < grid; ++m) {
      const auto row_index = static_cast<Eigen::Index>(s * grid + m);
      const ActionPair a = pol.at(m, s);
      rhs(row_index) = per_step_cost(m, s, a, scn);
      const auto row = kernel.row(m, a, s);
      triplets.emplace_back(row_index, row_index, 1.0);
      for (std::size_t j = 0; j < grid; ++j) {
        if (row[j] == 0.0) continue;
        triplets.emplace_back(row_index, static_cast<Eigen::Index>(next_s * grid + j),
                              -scn.beta * row[j]);
      }
    }
  }
  Eigen::SparseMatrix<double> system(dim, dim);
  system.setFromTriplets(triplets.begin(), triplets.end());
  system.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(system);
  if (lu.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularSystem, "policy evaluation system could not be factorized");
  }
  const Eigen::VectorXd solution = lu.solve(rhs);
  if (lu.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularSystem, "policy evaluation solve failed");
  }
  ValueFunction v(grid, states);
  for (std::size_t s = 0; s < states; ++s) {
    for (std::size_t m = 0; m < grid; ++m) {
      v.at(m, s) = solution(static_cast<Eigen::Index>(s * grid + m));
    }
  }
  return v;
}

double policy_evaluation_residual(const ValueFunction& v, const Policy& pol,
                                  const Scenario& scn, const KernelTensor& kernel) {
  double worst = 0.0;
  for (std::size_t s = 0; s < scn.trajectory.size(); ++s) {
    const std::size_t next_s = scn.trajectory.step(s);
    for (std::size_t m = 0; m < scn.grid_size(); ++m) {
      const ActionPair a = pol.at(m, s);
      const auto row = kernel.row(m, a, s);
      double expected = 0.0;
      for (std::size_t j = 0; j < row.size(); ++j) expected += row[j] * v.at(j, next_s);
      const double lhs = v.at(m, s) - scn.beta * expected;
      worst = std::max(worst, std::abs(lhs - per_step_cost(m, s, a, scn)));
    }
  }
  return worst;
}

double kernel_oracle_deviation(const Scenario& scn, const KernelTensor& kernel) {
  double worst = 0.0;
  for (std::size_t s = 0; s < (kernel.state_dependent() ? kernel.states() : 1); ++s) {
    std::optional<std::size_t> state;
    if (kernel.state_dependent()) state = s;
    for (std::size_t m = 0; m <= scn.n; ++m) {
      for (std::size_t r = 0; r < scn.k(); ++r) {
        for (std::size_t d = 0; d < scn.k(); ++d) {
          const auto expected = enumerate_kernel_row(scn, m, {r, d}, state);
          const auto got = kernel.row(m, {r, d}, s);
          for (std::size_t j = 0; j < got.size(); ++j) {
            worst = std::max(worst, std::abs(got[j] - expected[j]));
          }
        }
      }
    }
  }
  return worst;
}

namespace {

std::string format_deviation(double x) {
  std::ostringstream out;
  out.precision(3);
  out << std::scientific << x;
  return out.str();
}

}  // namespace

std::vector<CheckResult> run_verification(const VerifyOptions& opts) {
  std::vector<CheckResult> results;

  // Kernel rows against 2^n enumeration, Example-1 options at small n.
  bool perturbed = false;
  for (std::size_t n : opts.kernel_sizes) {
    Scenario scn = example1_scenario();
    scn.n = n;
    KernelTensor kernel = build_kernel(scn);
    if (opts.kernel_perturbation != 0.0 && !perturbed) {
      kernel.mutable_row(0, {0, 0})[0] += opts.kernel_perturbation;
      perturbed = true;
    }
    CheckResult check;
    check.name = "kernel oracle n=" + std::to_string(n);
    check.tolerance = 1e-10;
    check.max_deviation = kernel_oracle_deviation(scn, kernel);
    check.passed = check.max_deviation <= check.tolerance;
    check.detail = std::to_string(kernel.row_count()) + " rows";
    results.push_back(check);
  }

  {
    CheckResult check;
    check.name = "binomial semigroup";
    check.tolerance = 1e-12;
    for (double p : {0.0, 0.3, 0.8, 1.0}) {
      for (std::size_t total = 0; total <= 64; ++total) {
        const auto whole = binomial_pmf(p, total);
        for (std::size_t a = 0; a <= total; ++a) {
          const auto split = convolve(binomial_pmf(p, a), binomial_pmf(p, total - a));
          check.max_deviation =
              std::max(check.max_deviation, Distribution::max_abs_diff(split, whole));
        }
      }
    }
    check.passed = check.max_deviation <= check.tolerance;
    check.detail = "p in {0, 0.3, 0.8, 1}, a + b <= 64";
    results.push_back(check);
  }

  {
    const Scenario scn = tiny_scenario();
    const auto kernel = build_kernel(scn);
    const auto dp = finite_horizon_value(scn, kernel, 2);
    CheckResult check;
    check.name = "strategy enumeration n=2 k=2 T=2";
    check.tolerance = 1e-9;
    std::uint64_t profiles = 0;
    for (JointState x0 = 0; x0 < (JointState{1} << scn.n); ++x0) {
      const auto found = enumerate_strategies(scn, 2, {{x0, 1.0}});
      profiles += found.profiles;
      const double reference = dp.at(popcount(x0), scn.trajectory.initial_state());
      check.max_deviation = std::max(check.max_deviation, std::abs(found.best_cost - reference));
      check.max_deviation =
          std::max(check.max_deviation, std::abs(found.best_markov_cost - found.best_cost));
    }
    check.passed = check.max_deviation <= check.tolerance;
    check.detail = std::to_string(profiles) + " profiles";
    results.push_back(check);
  }

  {
    Scenario scn = tiny_scenario();
    CheckResult markov;
    markov.name = "mean-field Markov under (g_r, g_d)";
    markov.tolerance = 1e-12;
    markov.max_deviation =
        history_dependence_gap(scn, [](std::size_t, int x) -> std::size_t { return x == 0 ? 1 : 0; });
    markov.passed = markov.max_deviation <= markov.tolerance;
    results.push_back(markov);

    CheckResult counter;
    counter.name = "not Markov under per-user actions";
    counter.tolerance = 1e-6;
    counter.max_deviation =
        history_dependence_gap(scn, [](std::size_t user, int) -> std::size_t { return user % 2; });
    counter.passed = counter.max_deviation > counter.tolerance;
    counter.detail = "user 1 on option 1, user 2 on option 2 (gap must exceed tolerance)";
    results.push_back(counter);
  }

  {
    Scenario scn = example1_scenario();
    scn.n = 10;
    scn.trajectory = TrajectoryModel::periodic_valley({20, 5, 15, 0.8, 0.6});
    const auto kernel = build_kernel(scn);
    const double epsilon = 0.01;
    const auto solved = value_iteration(scn, kernel, {epsilon, 100000, 1});
    const auto exact = exact_policy_evaluation(solved.policy, scn, kernel);
    CheckResult check;
    check.name = "policy evaluation vs value iteration";
    check.tolerance = epsilon;
    check.max_deviation = ValueFunction::sup_distance(exact, solved.values);
    check.passed = check.max_deviation <= check.tolerance;
    check.detail = "linear-solve residual " +
                   format_deviation(policy_evaluation_residual(exact, solved.policy, scn, kernel));
    results.push_back(check);
  }
  return results;
}

}  // namespace mfdsm
