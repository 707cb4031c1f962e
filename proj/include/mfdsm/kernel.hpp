#pragma once

// Exact transition kernel of the mean-field count under a (reserve, demand)
// action pair: the next count is the sum of Binomial(n - i, (1 - alpha) p)
// new demands from idle users and Binomial(i, 1 - q) demands still pending.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mfdsm/model.hpp"

namespace mfdsm {

/// Probability vector over integer counts 0..size()-1.
class Distribution {
 public:
  Distribution() = default;
  explicit Distribution(std::vector<double> weights) : weights_(std::move(weights)) {}

  static Distribution point_mass(std::size_t length, std::size_t at);

  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }
  double& operator[](std::size_t i) { return weights_[i]; }
  std::span<const double> weights() const { return weights_; }

  double sum() const;
  double mean() const;
  /// Largest entrywise |a - b|; the shorter vector is padded with zeros.
  static double max_abs_diff(const Distribution& a, const Distribution& b);

 private:
  std::vector<double> weights_;
};

/// pmf of Binomial(trials, success_prob). trials == 0 gives the point mass
/// at 0. Built by the ratio recurrence outward from the mode and normalized,
/// so no term under- or overflows before normalization at large n.
Distribution binomial_pmf(double success_prob, std::size_t trials);

/// Distribution of the sum of independent draws from a and b (direct sum).
Distribution convolve(const Distribution& a, const Distribution& b);

/// Rows whose mass drifts by more than this from 1 are rejected.
inline constexpr double kRenormalizationLimit = 1e-9;

/// P(next count | m_count, action). When `s` is given, options are read at
/// trajectory state s (state-dependent mode). Throws OptionOutOfRange,
/// OffGrid or RowNotStochastic.
Distribution transition_row(std::size_t m_count, ActionPair action, const Scenario& scn,
                            std::optional<std::size_t> s = std::nullopt);

/// Same as transition_row; also returns the signed drift 1 - sum that was
/// removed by renormalization.
Distribution transition_row(std::size_t m_count, ActionPair action, const Scenario& scn,
                            std::optional<std::size_t> s, double& renormalized_by);

/// Precomputed rows for every (m_count, reserve, demand), optionally keyed by
/// trajectory state. States that see identical options share one layer.
class KernelTensor {
 public:
  std::size_t n() const { return n_; }
  std::size_t k() const { return k_; }
  std::size_t states() const { return state_layer_.size(); }
  bool state_dependent() const { return state_dependent_; }
  std::size_t layer_count() const { return layers_.size(); }

  /// Logical row count: (n+1) k^2, times |S| in state-dependent mode.
  std::size_t row_count() const;

  /// Row for (m_count, action) at state s. s is ignored unless the tensor
  /// is state dependent.
  std::span<const double> row(std::size_t m_count, ActionPair action, std::size_t s = 0) const;
  std::span<double> mutable_row(std::size_t m_count, ActionPair action, std::size_t s = 0);

  /// Largest |1 - sum| removed by renormalization while building.
  double max_renormalization() const { return max_renormalization_; }

 private:
  friend KernelTensor build_kernel(const Scenario&, bool, unsigned);

  std::size_t offset(std::size_t m_count, ActionPair action) const;

  std::size_t n_ = 0;
  std::size_t k_ = 0;
  bool state_dependent_ = false;
  std::vector<std::size_t> state_layer_;
  std::vector<std::vector<double>> layers_;
  double max_renormalization_ = 0.0;
};

/// Builds every row once. Scenarios with state overrides require
/// `state_dependent` (InvalidParameter otherwise).
KernelTensor build_kernel(const Scenario& scn, bool state_dependent = false,
                          unsigned threads = 1);

}  // namespace mfdsm
