#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hotspot/ensemble.hpp"

namespace hotspot {

enum class RewardKind { NegCrps, KlGain, NegEntropy };

inline std::string_view to_string(RewardKind k) {
  switch (k) {
    case RewardKind::NegCrps: return "neg-crps";
    case RewardKind::KlGain: return "kl";
    case RewardKind::NegEntropy: return "neg-entropy";
  }
  throw std::logic_error("to_string: unknown reward kind");
}

inline RewardKind parse_reward_kind(std::string_view s) {
  if (s == "neg-crps") return RewardKind::NegCrps;
  if (s == "kl") return RewardKind::KlGain;
  if (s == "neg-entropy") return RewardKind::NegEntropy;
  throw std::invalid_argument("unknown reward kind '" + std::string(s) +
                              "' (expected neg-crps, kl or neg-entropy)");
}

// Sample CRPS of an empirical ensemble against a scalar truth,
//
//   CRPS = (1/N) sum_i |x_i - t| - (1/2N^2) sum_ij |x_i - x_j|,
//
// evaluated via the O(N log N) sorted identity
// sum_ij |x_i - x_j| = 2 sum_k x_(k) (2k + 1 - N) (k zero-based). The pair
// sum is taken about the sample minimum so a collapsed ensemble scores an
// exact zero spread term.
inline double crps(std::vector<double> samples, double truth) {
  const std::size_t n = samples.size();
  if (n == 0) throw std::invalid_argument("crps: need at least one sample");
  std::sort(samples.begin(), samples.end());
  const double base = samples.front();
  double mad = 0.0;
  double pair = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mad += std::abs(samples[k] - truth);
    pair += (samples[k] - base) * (2.0 * static_cast<double>(k) + 1.0 - static_cast<double>(n));
  }
  const double nd = static_cast<double>(n);
  return std::max(0.0, mad / nd - pair / (nd * nd));
}

inline double crps_ensemble(const FluxEnsemble& e, double truth) {
  if (!(truth > 0.0)) throw std::domain_error("crps_ensemble: truth flux must be > 0");
  return crps(e.fluxes(), truth);
}

// KL(post || prior) between lognormals; equals the KL of the underlying
// normals in log space.
inline double kl_lognormal(const LognormalParams& post, const LognormalParams& prior) {
  if (!(post.sigma > 0.0) || !(prior.sigma > 0.0))
    throw std::domain_error("kl_lognormal: sigma must be > 0");
  const double dm = post.mu - prior.mu;
  return std::log(prior.sigma / post.sigma) +
         (post.sigma * post.sigma + dm * dm) / (2.0 * prior.sigma * prior.sigma) - 0.5;
}

// Differential entropy of a lognormal: mu + (1/2) ln(2 pi e sigma^2).
inline double entropy_lognormal(const LognormalParams& p) {
  if (!(p.sigma > 0.0)) throw std::domain_error("entropy_lognormal: sigma must be > 0");
  return p.mu +
         0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * p.sigma * p.sigma);
}

// Per-step reward emitted after assimilating the newest observation. The
// distribution-based rewards score a lognormal fitted to the current
// ensemble (clamped, so a collapsed ensemble yields a finite value).
inline double step_reward(RewardKind kind, const FluxEnsemble& posterior,
                          const LognormalParams& initial_prior, double true_flux) {
  switch (kind) {
    case RewardKind::NegCrps:
      return -crps_ensemble(posterior, true_flux);
    case RewardKind::KlGain:
      return kl_lognormal(fit_lognormal_clamped(posterior), initial_prior);
    case RewardKind::NegEntropy:
      return -entropy_lognormal(fit_lognormal_clamped(posterior));
  }
  throw std::logic_error("step_reward: unknown reward kind");
}

}  // namespace hotspot
