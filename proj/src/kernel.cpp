#include "mfdsm/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mfdsm/parallel.hpp"

namespace mfdsm {

Distribution Distribution::point_mass(std::size_t length, std::size_t at) {
  std::vector<double> w(length, 0.0);
  w.at(at) = 1.0;
  return Distribution(std::move(w));
}

double Distribution::sum() const {
  return std::accumulate(weights_.begin(), weights_.end(), 0.0);
}

double Distribution::mean() const {
  double acc = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) acc += static_cast<double>(i) * weights_[i];
  return acc;
}

double Distribution::max_abs_diff(const Distribution& a, const Distribution& b) {
  const std::size_t len = std::max(a.size(), b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double x = i < a.size() ? a[i] : 0.0;
    const double y = i < b.size() ? b[i] : 0.0;
    worst = std::max(worst, std::abs(x - y));
  }
  return worst;
}

Distribution binomial_pmf(double success_prob, std::size_t trials) {
  if (success_prob <= 0.0) return Distribution::point_mass(trials + 1, 0);
  if (success_prob >= 1.0) return Distribution::point_mass(trials + 1, trials);

  std::vector<double> w(trials + 1, 0.0);
  const double odds = success_prob / (1.0 - success_prob);
  const double nn = static_cast<double>(trials);
  const auto mode = std::min<std::size_t>(
      trials, static_cast<std::size_t>(std::floor((nn + 1.0) * success_prob)));
  w[mode] = 1.0;
  for (std::size_t j = mode; j < trials; ++j) {
    w[j + 1] = w[j] * (static_cast<double>(trials - j) / static_cast<double>(j + 1)) * odds;
  }
  for (std::size_t j = mode; j > 0; --j) {
    w[j - 1] = w[j] * (static_cast<double>(j) / static_cast<double>(trials - j + 1)) / odds;
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
  return Distribution(std::move(w));
}

Distribution convolve(const Distribution& a, const Distribution& b) {
  if (a.size() == 0 || b.size() == 0) return Distribution{};
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return Distribution(std::move(out));
}

Distribution transition_row(std::size_t m_count, ActionPair action, const Scenario& scn,
                            std::optional<std::size_t> s, double& renormalized_by) {
  if (m_count > scn.n) {
    throw Error(ErrorCode::OffGrid, "m_count " + std::to_string(m_count) + " beyond n");
  }
  const std::size_t state = s.value_or(0);
  const auto& reserve_opt = s ? scn.option(action.reserve, state) : scn.option(action.reserve);
  const auto& demand_opt = s ? scn.option(action.demand, state) : scn.option(action.demand);
  const double m = static_cast<double>(m_count) / static_cast<double>(scn.n);

  // Idle users raise a demand w.p. (1 - alpha) p; active users stay active
  // w.p. 1 - q. At m_count 0 or n one factor is the point mass at 0.
  const auto arrivals =
      binomial_pmf((1.0 - reserve_opt.participation()) * scn.p, scn.n - m_count);
  const auto pending = binomial_pmf(1.0 - demand_opt.delivery_rate(m), m_count);
  auto row = convolve(arrivals, pending);

  const double total = row.sum();
  renormalized_by = 1.0 - total;
  if (std::abs(renormalized_by) > kRenormalizationLimit) {
    throw Error(ErrorCode::RowNotStochastic,
                "transition row sums to " + std::to_string(total));
  }
  for (std::size_t i = 0; i < row.size(); ++i) row[i] /= total;
  return row;
}

Distribution transition_row(std::size_t m_count, ActionPair action, const Scenario& scn,
                            std::optional<std::size_t> s) {
  double drift = 0.0;
  return transition_row(m_count, action, scn, s, drift);
}

std::size_t KernelTensor::row_count() const {
  const std::size_t base = (n_ + 1) * k_ * k_;
  return state_dependent_ ? base * states() : base;
}

std::size_t KernelTensor::offset(std::size_t m_count, ActionPair action) const {
  if (m_count > n_) throw Error(ErrorCode::OffGrid, "m_count beyond n");
  if (action.reserve >= k_ || action.demand >= k_) {
    throw Error(ErrorCode::OptionOutOfRange, "action outside 1..k");
  }
  return ((m_count * k_ + action.reserve) * k_ + action.demand) * (n_ + 1);
}

std::span<const double> KernelTensor::row(std::size_t m_count, ActionPair action,
                                          std::size_t s) const {
  const std::size_t layer = state_dependent_ ? state_layer_.at(s) : 0;
  return std::span<const double>(layers_[layer]).subspan(offset(m_count, action), n_ + 1);
}

std::span<double> KernelTensor::mutable_row(std::size_t m_count, ActionPair action,
                                            std::size_t s) {
  const std::size_t layer = state_dependent_ ? state_layer_.at(s) : 0;
  return std::span<double>(layers_[layer]).subspan(offset(m_count, action), n_ + 1);
}

KernelTensor build_kernel(const Scenario& scn, bool state_dependent, unsigned threads) {
  validate_scenario(scn);
  if (scn.state_dependent() && !state_dependent) {
    throw Error(ErrorCode::InvalidParameter,
                "scenario has state overrides; build the kernel in state-dependent mode");
  }
  KernelTensor kt;
  kt.n_ = scn.n;
  kt.k_ = scn.k();
  kt.state_dependent_ = state_dependent;

  const std::size_t states = scn.trajectory.size();
  kt.state_layer_.assign(states, 0);
  // Layer 0 holds the base options; layer j + 1 holds override j.
  std::vector<std::size_t> representative{0};
  if (state_dependent) {
    for (std::size_t j = 0; j < scn.state_overrides.size(); ++j) {
      std::optional<std::size_t> first;
      for (std::size_t s = 0; s < states; ++s) {
        // Scenario::option resolves to the first override containing s.
        const auto& ovs = scn.state_overrides;
        std::size_t owner = ovs.size();
        for (std::size_t o = 0; o < ovs.size(); ++o) {
          if (std::find(ovs[o].states.begin(), ovs[o].states.end(), s) != ovs[o].states.end()) {
            owner = o;
            break;
          }
        }
        if (owner == j) {
          kt.state_layer_[s] = representative.size();
          if (!first) first = s;
        }
      }
      if (first) representative.push_back(*first);
    }
    // Base layer needs a state without overrides; any state works when all
    // are overridden because layer 0 is then unused.
    for (std::size_t s = 0; s < states; ++s) {
      if (kt.state_layer_[s] == 0) {
        representative[0] = s;
        break;
      }
    }
  }

  const std::size_t k = kt.k_;
  const std::size_t rows_per_layer = (scn.n + 1) * k * k;
  kt.layers_.assign(representative.size(), std::vector<double>(rows_per_layer * (scn.n + 1)));
  std::vector<double> drift(representative.size() * rows_per_layer, 0.0);

  parallel_for(representative.size() * rows_per_layer, threads, [&](std::size_t job) {
    const std::size_t layer = job / rows_per_layer;
    const std::size_t idx = job % rows_per_layer;
    const std::size_t m_count = idx / (k * k);
    const ActionPair action{(idx / k) % k, idx % k};
    std::optional<std::size_t> s;
    if (state_dependent) s = representative[layer];
    const auto row = transition_row(m_count, action, scn, s, drift[job]);
    std::copy(row.weights().begin(), row.weights().end(),
              kt.layers_[layer].begin() + static_cast<std::ptrdiff_t>(idx * (scn.n + 1)));
  });
  for (double d : drift) kt.max_renormalization_ = std::max(kt.max_renormalization_, std::abs(d));
  return kt;
}

}  // namespace mfdsm
