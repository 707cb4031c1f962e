#pragma once

// Discounted Bellman equation over (mean-field count, trajectory state) and
// the decentralized policy it induces.

#include <chrono>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "mfdsm/kernel.hpp"
#include "mfdsm/model.hpp"

namespace mfdsm {

/// V(m_count, s) on the (n+1) x |S| grid.
class ValueFunction {
 public:
  ValueFunction() = default;
  ValueFunction(std::size_t grid_size, std::size_t states, double fill = 0.0)
      : grid_size_(grid_size), states_(states), values_(grid_size * states, fill) {}

  std::size_t grid_size() const { return grid_size_; }
  std::size_t states() const { return states_; }

  double& at(std::size_t m_count, std::size_t s) { return values_[s * grid_size_ + m_count]; }
  double at(std::size_t m_count, std::size_t s) const { return values_[s * grid_size_ + m_count]; }

  /// Values for all counts at state s, contiguous.
  std::span<const double> column(std::size_t s) const {
    return std::span<const double>(values_).subspan(s * grid_size_, grid_size_);
  }
  std::span<const double> raw() const { return values_; }
  std::span<double> raw() { return values_; }

  static double sup_distance(const ValueFunction& a, const ValueFunction& b);

 private:
  std::size_t grid_size_ = 0;
  std::size_t states_ = 0;
  std::vector<double> values_;
};

/// Deterministic (reserve, demand) pair for each (m_count, s).
class Policy {
 public:
  Policy() = default;
  Policy(std::size_t grid_size, std::size_t states)
      : grid_size_(grid_size), states_(states), actions_(grid_size * states) {}

  /// Same pair everywhere, e.g. a fixed-option baseline.
  static Policy constant(std::size_t grid_size, std::size_t states, ActionPair action);

  std::size_t grid_size() const { return grid_size_; }
  std::size_t states() const { return states_; }

  ActionPair& at(std::size_t m_count, std::size_t s) { return actions_[s * grid_size_ + m_count]; }
  const ActionPair& at(std::size_t m_count, std::size_t s) const {
    return actions_[s * grid_size_ + m_count];
  }

  bool operator==(const Policy&) const = default;

 private:
  std::size_t grid_size_ = 0;
  std::size_t states_ = 0;
  std::vector<ActionPair> actions_;
};

/// Option used by a user in local state x (0 or 1): the reserve component
/// for x = 0, the demand component for x = 1.
std::size_t policy_action(const Policy& pol, int x, std::size_t m_count, std::size_t s);

struct Backup {
  double value = 0.0;
  ActionPair action;
};

/// The Bellman operator with per-step costs tabulated once.
class BellmanOperator {
 public:
  BellmanOperator(const Scenario& scn, const KernelTensor& kernel);

  std::size_t grid_size() const { return grid_size_; }
  std::size_t states() const { return states_; }
  double beta() const { return beta_; }

  double cost(std::size_t m_count, std::size_t s, ActionPair a) const;

  /// min over pairs of l + beta E[V(m', f(s))]; ties go to the
  /// lexicographically smallest (reserve, demand).
  Backup backup(const ValueFunction& v, std::size_t m_count, std::size_t s) const;

  /// One synchronous sweep over every (m_count, s).
  void sweep(const ValueFunction& v, ValueFunction& out, Policy& greedy,
             unsigned threads = 1) const;

  /// Expected continuation E[V(m', f(s)) | m_count, s, a] (undiscounted).
  double continuation(const ValueFunction& v, std::size_t m_count, std::size_t s,
                      ActionPair a) const;

  /// Sweep on raw iterates laid out like ValueFunction (state-major).
  template <typename Real>
  void sweep_raw(std::span<const Real> v, std::span<Real> out, Policy& greedy,
                 unsigned threads) const;

 private:
  template <typename Real>
  std::pair<Real, ActionPair> backup_raw(std::span<const Real> v, std::size_t m_count,
                                         std::size_t s) const;

  const Scenario* scn_;
  const KernelTensor* kernel_;
  std::size_t grid_size_;
  std::size_t states_;
  std::size_t k_;
  double beta_;
  std::vector<std::size_t> successor_;
  std::vector<double> costs_;
};

Backup bellman_backup(const ValueFunction& v, std::size_t m_count, std::size_t s,
                      const KernelTensor& kernel, const Scenario& scn);

/// sup over (m, s) of |V - TV|.
double bellman_residual(const ValueFunction& v, const KernelTensor& kernel,
                        const Scenario& scn, unsigned threads = 1);

/// Sup-norm update size at which the greedy policy is epsilon-optimal:
/// epsilon (1 - beta) / (2 beta).
double stopping_threshold(double epsilon, double beta);

struct SolveOptions {
  double epsilon = 0.01;
  std::size_t max_iters = 100000;
  unsigned threads = 1;
};

struct SolveReport {
  std::size_t iterations = 0;
  double final_residual = 0.0;
  double epsilon = 0.0;
  double threshold = 0.0;
  std::chrono::duration<double> elapsed{0.0};
  /// ||V_{j+1} - V_j|| for every sweep, in order.
  std::vector<double> residuals;
};

struct SolveResult {
  ValueFunction values;
  Policy policy;
  SolveReport report;
};

/// Jacobi value iteration from V = 0 until the update falls below the
/// stopping threshold. The returned policy is greedy with respect to the
/// second-to-last iterate (the one the final sweep backed up). Iterates are
/// carried in long double so that sweep-to-sweep differences near the
/// threshold keep their leading digits. Throws MaxItersExceeded.
SolveResult value_iteration(const Scenario& scn, const KernelTensor& kernel,
                            const SolveOptions& opts = {});

/// Value of the discounted `horizon`-step problem, computed by backward
/// recursion over stages t = horizon..1 with stage weight beta^(t-1). The
/// trajectory state is tracked per stage, so this does not reuse the
/// stationary sweep.
ValueFunction finite_horizon_value(const Scenario& scn, const KernelTensor& kernel,
                                   std::size_t horizon);

}  // namespace mfdsm
