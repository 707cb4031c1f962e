#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "mfdsm/model.hpp"

namespace mfdsm::testing {

inline OptionSpec flat_option(double alpha, double q, double reserve, double demand) {
  return OptionSpec{alpha, {q, 0.0}, {reserve, 0.0}, {demand, 0.0}};
}

/// One user, one option, one trajectory state. Small enough that its value
/// function is a 2x2 linear solve done by hand below.
inline Scenario single_state_toy() {
  Scenario scn;
  scn.n = 1;
  scn.p = 0.6;
  scn.beta = 0.9;
  scn.options = {flat_option(0.2, 0.5, 1.0, 2.0)};
  scn.trajectory = TrajectoryModel::table({0}, {0.5}, 0);
  scn.distance.scale = 1.0;
  return scn;
}

// l(0) = 1 + 0.5, l(1) = 2 + 0.5; P(0->1) = 0.8 * 0.6, P(1->1) = 0.5.
// (I - 0.9 P) = [[0.532, -0.432], [-0.45, 0.55]], det = 0.0982 (Cramer).
inline constexpr double kToyV0 = 1.905 / 0.0982;
inline constexpr double kToyV1 = 2.005 / 0.0982;

/// n users, k = 1, flat prices, single trajectory state at theta.
inline Scenario one_option(std::size_t n, double p, double alpha, double q, double theta = 0.5) {
  Scenario scn;
  scn.n = n;
  scn.p = p;
  scn.beta = 0.9;
  scn.options = {flat_option(alpha, q, 1.0, 1.0)};
  scn.trajectory = TrajectoryModel::table({0}, {theta}, 0);
  scn.distance.scale = 1.0;
  return scn;
}

inline double binom(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

/// Textbook C(n,k) p^k (1-p)^(n-k); independent of the library's recurrence.
inline std::vector<double> factorial_binomial(double p, std::size_t n) {
  std::vector<double> out(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    out[k] = binom(n, k) * std::pow(p, static_cast<double>(k)) *
             std::pow(1.0 - p, static_cast<double>(n - k));
  }
  return out;
}

}  // namespace mfdsm::testing
