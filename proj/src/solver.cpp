#include "mfdsm/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mfdsm/parallel.hpp"

namespace mfdsm {

double ValueFunction::sup_distance(const ValueFunction& a, const ValueFunction& b) {
  double worst = 0.0;
  const auto x = a.raw();
  const auto y = b.raw();
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
  return worst;
}

Policy Policy::constant(std::size_t grid_size, std::size_t states, ActionPair action) {
  Policy pol(grid_size, states);
  std::fill(pol.actions_.begin(), pol.actions_.end(), action);
  return pol;
}

std::size_t policy_action(const Policy& pol, int x, std::size_t m_count, std::size_t s) {
  const auto& pair = pol.at(m_count, s);
  return x == 0 ? pair.reserve : pair.demand;
}

BellmanOperator::BellmanOperator(const Scenario& scn, const KernelTensor& kernel)
    : scn_(&scn),
      kernel_(&kernel),
      grid_size_(scn.grid_size()),
      states_(scn.trajectory.size()),
      k_(scn.k()),
      beta_(scn.beta),
      successor_(scn.trajectory.successors()) {
  if (kernel.n() != scn.n || kernel.k() != scn.k()) {
    throw Error(ErrorCode::InvalidParameter, "kernel was built for a different scenario");
  }
  costs_.resize(grid_size_ * states_ * k_ * k_);
  for (std::size_t s = 0; s < states_; ++s) {
    for (std::size_t m = 0; m < grid_size_; ++m) {
      for (std::size_t r = 0; r < k_; ++r) {
        for (std::size_t d = 0; d < k_; ++d) {
          costs_[((s * grid_size_ + m) * k_ + r) * k_ + d] = per_step_cost(m, s, {r, d}, scn);
        }
      }
    }
  }
}

double BellmanOperator::cost(std::size_t m_count, std::size_t s, ActionPair a) const {
  return costs_[((s * grid_size_ + m_count) * k_ + a.reserve) * k_ + a.demand];
}

double BellmanOperator::continuation(const ValueFunction& v, std::size_t m_count,
                                     std::size_t s, ActionPair a) const {
  const auto row = kernel_->row(m_count, a, s);
  const auto next = v.column(successor_[s]);
  double acc = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) acc += row[j] * next[j];
  return acc;
}

template <typename Real>
std::pair<Real, ActionPair> BellmanOperator::backup_raw(std::span<const Real> v,
                                                        std::size_t m_count,
                                                        std::size_t s) const {
  const Real* next = v.data() + successor_[s] * grid_size_;
  Real best = std::numeric_limits<Real>::infinity();
  ActionPair best_action{0, 0};
  for (std::size_t r = 0; r < k_; ++r) {
    for (std::size_t d = 0; d < k_; ++d) {
      const ActionPair a{r, d};
      const auto row = kernel_->row(m_count, a, s);
      Real acc = 0;
      for (std::size_t j = 0; j < row.size(); ++j) acc += static_cast<Real>(row[j]) * next[j];
      const Real q = static_cast<Real>(cost(m_count, s, a)) + static_cast<Real>(beta_) * acc;
      if (q < best) {  // strict: keeps the first minimizer
        best = q;
        best_action = a;
      }
    }
  }
  return {best, best_action};
}

template <typename Real>
void BellmanOperator::sweep_raw(std::span<const Real> v, std::span<Real> out, Policy& greedy,
                                unsigned threads) const {
  if (v.size() != grid_size_ * states_ || out.size() != v.size()) {
    throw Error(ErrorCode::InvalidParameter, "value array has the wrong shape");
  }
  if (greedy.grid_size() != grid_size_ || greedy.states() != states_) {
    greedy = Policy(grid_size_, states_);
  }
  parallel_for(states_, threads, [&](std::size_t s) {
    for (std::size_t m = 0; m < grid_size_; ++m) {
      const auto [value, action] = backup_raw(v, m, s);
      out[s * grid_size_ + m] = value;
      greedy.at(m, s) = action;
    }
  });
}

template void BellmanOperator::sweep_raw<double>(std::span<const double>, std::span<double>,
                                                 Policy&, unsigned) const;
template void BellmanOperator::sweep_raw<long double>(std::span<const long double>,
                                                      std::span<long double>, Policy&,
                                                      unsigned) const;

Backup BellmanOperator::backup(const ValueFunction& v, std::size_t m_count,
                               std::size_t s) const {
  const auto [value, action] = backup_raw(v.raw(), m_count, s);
  return {value, action};
}

void BellmanOperator::sweep(const ValueFunction& v, ValueFunction& out, Policy& greedy,
                            unsigned threads) const {
  if (out.grid_size() != grid_size_ || out.states() != states_) {
    out = ValueFunction(grid_size_, states_);
  }
  sweep_raw(v.raw(), out.raw(), greedy, threads);
}

Backup bellman_backup(const ValueFunction& v, std::size_t m_count, std::size_t s,
                      const KernelTensor& kernel, const Scenario& scn) {
  Backup best{std::numeric_limits<double>::infinity(), {0, 0}};
  const std::size_t next_s = scn.trajectory.step(s);
  for (std::size_t r = 0; r < scn.k(); ++r) {
    for (std::size_t d = 0; d < scn.k(); ++d) {
      const ActionPair a{r, d};
      const auto row = kernel.row(m_count, a, s);
      double cont = 0.0;
      for (std::size_t j = 0; j < row.size(); ++j) cont += row[j] * v.at(j, next_s);
      const double q = per_step_cost(m_count, s, a, scn) + scn.beta * cont;
      if (q < best.value) best = {q, a};
    }
  }
  return best;
}

double bellman_residual(const ValueFunction& v, const KernelTensor& kernel,
                        const Scenario& scn, unsigned threads) {
  const BellmanOperator op(scn, kernel);
  ValueFunction tv;
  Policy greedy;
  op.sweep(v, tv, greedy, threads);
  return ValueFunction::sup_distance(v, tv);
}

double stopping_threshold(double epsilon, double beta) {
  return epsilon * (1.0 - beta) / (2.0 * beta);
}

SolveResult value_iteration(const Scenario& scn, const KernelTensor& kernel,
                            const SolveOptions& opts) {
  if (!(opts.epsilon > 0.0)) throw Error(ErrorCode::InvalidParameter, "epsilon must be > 0");
  const auto start = std::chrono::steady_clock::now();
  const BellmanOperator op(scn, kernel);

  SolveResult result;
  result.report.epsilon = opts.epsilon;
  result.report.threshold = stopping_threshold(opts.epsilon, scn.beta);

  const std::size_t size = op.grid_size() * op.states();
  std::vector<long double> current(size, 0.0L);
  std::vector<long double> next(size, 0.0L);
  Policy greedy(op.grid_size(), op.states());
  for (std::size_t iter = 1; iter <= opts.max_iters; ++iter) {
    op.sweep_raw<long double>(current, next, greedy, opts.threads);
    long double residual = 0.0L;
    for (std::size_t i = 0; i < size; ++i) {
      residual = std::max(residual, std::abs(next[i] - current[i]));
    }
    result.report.residuals.push_back(static_cast<double>(residual));
    std::swap(current, next);
    if (residual <= static_cast<long double>(result.report.threshold)) {
      result.report.iterations = iter;
      result.report.final_residual = static_cast<double>(residual);
      result.report.elapsed = std::chrono::steady_clock::now() - start;
      result.values = ValueFunction(op.grid_size(), op.states());
      std::transform(current.begin(), current.end(), result.values.raw().begin(),
                     [](long double x) { return static_cast<double>(x); });
      result.policy = std::move(greedy);
      return result;
    }
  }
  std::ostringstream msg;
  msg << "value iteration did not reach threshold " << result.report.threshold << " within "
      << opts.max_iters << " sweeps; last residual "
      << (result.report.residuals.empty() ? 0.0 : result.report.residuals.back());
  throw Error(ErrorCode::MaxItersExceeded, msg.str());
}

ValueFunction finite_horizon_value(const Scenario& scn, const KernelTensor& kernel,
                                   std::size_t horizon) {
  const std::size_t grid = scn.grid_size();
  const std::size_t states = scn.trajectory.size();
  // to_go holds the stage-(t+1) value; starts as the terminal zero.
  ValueFunction to_go(grid, states, 0.0);
  for (std::size_t t = horizon; t >= 1; --t) {
    const double weight = std::pow(scn.beta, static_cast<double>(t - 1));
    ValueFunction stage(grid, states, 0.0);
    for (std::size_t s = 0; s < states; ++s) {
      const std::size_t next_s = scn.trajectory.step(s);
      for (std::size_t m = 0; m < grid; ++m) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < scn.k(); ++r) {
          for (std::size_t d = 0; d < scn.k(); ++d) {
            const auto row = kernel.row(m, {r, d}, s);
            double expected = 0.0;
            for (std::size_t j = 0; j < grid; ++j) expected += row[j] * to_go.at(j, next_s);
            best = std::min(best, weight * per_step_cost(m, s, {r, d}, scn) + expected);
          }
        }
        stage.at(m, s) = best;
      }
    }
    to_go = std::move(stage);
  }
  return to_go;
}

}  // namespace mfdsm
