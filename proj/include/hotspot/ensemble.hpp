#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "hotspot/rng.hpp"

namespace hotspot {

// Parameters of a lognormal flux distribution; mu and sigma act on ln(flux).
struct LognormalParams {
  double mu = 0.0;
  double sigma = 1.0;

  // The prior is pinned by two order statistics: mu = ln(median) and
  // sigma^2 = ln(median / mode).
  static LognormalParams from_median_mode(double median, double mode) {
    if (!(median > 0.0) || !(mode > 0.0) || !(median > mode))
      throw std::invalid_argument("LognormalParams: need median > mode > 0");
    return {std::log(median), std::sqrt(std::log(median / mode))};
  }

  double pdf(double flux) const {
    if (!(sigma > 0.0)) throw std::domain_error("LognormalParams: sigma must be > 0");
    if (!(flux > 0.0)) return 0.0;
    const double z = (std::log(flux) - mu) / sigma;
    return std::exp(-0.5 * z * z) / (flux * sigma * std::sqrt(2.0 * std::numbers::pi));
  }

  double median() const { return std::exp(mu); }
  double mode() const { return std::exp(mu - sigma * sigma); }
  double mean() const { return std::exp(mu + 0.5 * sigma * sigma); }

  friend bool operator==(const LognormalParams&, const LognormalParams&) = default;
};

// Monte Carlo flux ensemble carried in log space, so every represented flux
// exp(member) is strictly positive by construction.
struct FluxEnsemble {
  std::vector<double> log_members;

  std::size_t size() const { return log_members.size(); }
  double flux(std::size_t i) const { return std::exp(log_members[i]); }

  std::vector<double> fluxes() const {
    std::vector<double> out(log_members.size());
    std::transform(log_members.begin(), log_members.end(), out.begin(),
                   [](double l) { return std::exp(l); });
    return out;
  }

  friend bool operator==(const FluxEnsemble&, const FluxEnsemble&) = default;
};

struct EnsembleStats {
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;

  friend bool operator==(const EnsembleStats&, const EnsembleStats&) = default;
};

namespace detail {

struct LogMoments {
  double mu = 0.0;
  double sigma = 0.0;
};

inline LogMoments log_moments(const FluxEnsemble& e) {
  const std::size_t n = e.size();
  if (n < 2) throw std::invalid_argument("ensemble needs at least 2 members");
  double mean = 0.0;
  for (double l : e.log_members) mean += l;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double l : e.log_members) ss += (l - mean) * (l - mean);
  return {mean, std::sqrt(ss / static_cast<double>(n - 1))};
}

}  // namespace detail

inline FluxEnsemble sample_prior(const LognormalParams& params, std::size_t n,
                                 rng::Stream& stream) {
  if (n < 2) throw std::invalid_argument("sample_prior: ensemble size must be >= 2");
  if (!(params.sigma > 0.0)) throw std::domain_error("sample_prior: sigma must be > 0");
  FluxEnsemble e;
  e.log_members.resize(n);
  std::normal_distribution<double> d(params.mu, params.sigma);
  for (double& l : e.log_members) l = d(stream);
  return e;
}

// Moment-matched lognormal fit in log space (sample mean and n-1 sd).
inline LognormalParams fit_lognormal(const FluxEnsemble& e) {
  const auto m = detail::log_moments(e);
  if (!(m.sigma > 0.0))
    throw std::domain_error("fit_lognormal: degenerate ensemble (zero log-variance)");
  return {m.mu, m.sigma};
}

// As fit_lognormal, but a collapsed ensemble gets sigma clamped instead of
// an error so divergence- and entropy-based rewards stay finite.
inline LognormalParams fit_lognormal_clamped(const FluxEnsemble& e, double min_sigma = 1e-6) {
  const auto m = detail::log_moments(e);
  return {m.mu, std::max(m.sigma, min_sigma)};
}

// Flux-space summary: mean, sd with n-1 divisor, median as the midpoint of
// the central order statistics.
inline EnsembleStats ensemble_stats(const FluxEnsemble& e) {
  const std::size_t n = e.size();
  if (n < 2) throw std::invalid_argument("ensemble_stats: ensemble size must be >= 2");
  std::vector<double> f = e.fluxes();
  double mean = 0.0;
  for (double v : f) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : f) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  std::sort(f.begin(), f.end());
  const double median =
      (n % 2 == 1) ? f[n / 2] : 0.5 * (f[n / 2 - 1] + f[n / 2]);
  return {mean, median, sd};
}

}  // namespace hotspot
