#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hotspot/ensemble.hpp"
#include "hotspot/plume.hpp"
#include "hotspot/rng.hpp"

namespace hotspot {

// One scalar concentration measurement.
struct Observation {
  double value = 0.0;     // ppm
  double noise_sd = 0.0;  // ppm
  Point3 location;
  int time_step = 0;

  friend bool operator==(const Observation&, const Observation&) = default;
};

// Multiple-data-assimilation schedule: `iterations` smoother passes, pass i
// inflating the observation-error variance by alpha_i. The 1/alpha_i must
// sum to one so the passes jointly apply the likelihood exactly once.
struct EnkfConfig {
  int iterations = 4;
  std::vector<double> inflation;  // empty: every pass uses alpha = iterations

  std::vector<double> alphas() const {
    if (inflation.empty())
      return std::vector<double>(static_cast<std::size_t>(iterations),
                                 static_cast<double>(iterations));
    return inflation;
  }

  void validate() const {
    if (iterations < 1) throw std::invalid_argument("EnkfConfig: iterations must be >= 1");
    const std::vector<double> a = alphas();
    if (a.size() != static_cast<std::size_t>(iterations))
      throw std::invalid_argument("EnkfConfig: inflation length must equal iterations");
    double inv_sum = 0.0;
    for (double alpha : a) {
      if (!(alpha > 0.0))
        throw std::invalid_argument("EnkfConfig: inflation factors must be > 0");
      inv_sum += 1.0 / alpha;
    }
    if (std::abs(inv_sum - 1.0) > 1e-9)
      throw std::invalid_argument("EnkfConfig: sum of 1/alpha_i must equal 1");
  }

  friend bool operator==(const EnkfConfig&, const EnkfConfig&) = default;
};

// Ensemble smoother with multiple data assimilation of one scalar
// observation, updating in log-flux space. Each pass recomputes the forward
// predictions d_j = forward(exp(l_j)) and applies
//
//   l_j += C_ld / (C_dd + alpha_i s^2) * (y + sqrt(alpha_i) e_j - d_j),
//
// with e_j ~ N(0, s) redrawn per pass and sample covariances over n-1.
// A degenerate (zero log-variance) ensemble is returned unchanged.
template <class Forward>
FluxEnsemble assimilate(const FluxEnsemble& ensemble, const Observation& obs,
                        Forward&& forward, const EnkfConfig& cfg, rng::Stream& stream) {
  cfg.validate();
  if (!(obs.noise_sd > 0.0))
    throw std::invalid_argument("assimilate: observation noise_sd must be > 0");
  const std::size_t n = ensemble.size();
  if (n < 2) throw std::invalid_argument("assimilate: ensemble size must be >= 2");
  if (!(detail::log_moments(ensemble).sigma > 0.0)) return ensemble;

  FluxEnsemble cur = ensemble;
  std::vector<double> pred(n);
  for (const double alpha : cfg.alphas()) {
    for (std::size_t j = 0; j < n; ++j) {
      pred[j] = forward(std::exp(cur.log_members[j]));
      if (!std::isfinite(pred[j]))
        throw std::runtime_error("assimilate: non-finite forward prediction for member " +
                                 std::to_string(j));
    }
    double l_mean = 0.0;
    double d_mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      l_mean += cur.log_members[j];
      d_mean += pred[j];
    }
    l_mean /= static_cast<double>(n);
    d_mean /= static_cast<double>(n);
    double c_ld = 0.0;
    double c_dd = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double dl = cur.log_members[j] - l_mean;
      const double dd = pred[j] - d_mean;
      c_ld += dl * dd;
      c_dd += dd * dd;
    }
    c_ld /= static_cast<double>(n - 1);
    c_dd /= static_cast<double>(n - 1);
    const double gain = c_ld / (c_dd + alpha * obs.noise_sd * obs.noise_sd);
    const double root_alpha = std::sqrt(alpha);
    // One distribution object per pass: the draw sequence depends only on
    // (stream state, pass), which every replay path reproduces.
    std::normal_distribution<double> noise(0.0, obs.noise_sd);
    for (std::size_t j = 0; j < n; ++j) {
      const double perturbed = obs.value + root_alpha * noise(stream);
      cur.log_members[j] += gain * (perturbed - pred[j]);
    }
  }
  return cur;
}

// Folds assimilate over the observations in list order. Given the stream the
// environment used for its filter draws, this replays an episode's posterior
// bitwise.
template <class ForwardFor>  // double(const Observation&, double flux)
FluxEnsemble sequential_assimilate_all(FluxEnsemble prior,
                                       std::span<const Observation> observations,
                                       ForwardFor&& forward_for, const EnkfConfig& cfg,
                                       rng::Stream& stream) {
  for (const Observation& obs : observations) {
    prior = assimilate(
        prior, obs, [&](double flux) { return forward_for(obs, flux); }, cfg, stream);
  }
  return prior;
}

}  // namespace hotspot
