#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "hotspot/enkf.hpp"
#include "hotspot/ensemble.hpp"
#include "hotspot/plume.hpp"
#include "hotspot/rng.hpp"
#include "hotspot/scoring.hpp"

namespace hotspot {

struct GridCell {
  int cx = 0;
  int cy = 0;

  friend bool operator==(const GridCell&, const GridCell&) = default;
  friend bool operator<(const GridCell& a, const GridCell& b) {
    return a.cx != b.cx ? a.cx < b.cx : a.cy < b.cy;
  }
};

// Markov state: cell plus elapsed time step. t counts taken observations
// minus one, so t == episode_length - 1 is terminal.
struct AgentState {
  int cx = 0;
  int cy = 0;
  int t = 0;

  GridCell cell() const { return {cx, cy}; }

  friend bool operator==(const AgentState&, const AgentState&) = default;
};

enum class Action { PlusX, MinusX, PlusY, MinusY, Stay };

inline constexpr std::array<Action, 5> kActions = {Action::PlusX, Action::MinusX,
                                                   Action::PlusY, Action::MinusY,
                                                   Action::Stay};

inline constexpr int action_index(Action a) { return static_cast<int>(a); }

inline std::string_view to_string(Action a) {
  switch (a) {
    case Action::PlusX: return "+x";
    case Action::MinusX: return "-x";
    case Action::PlusY: return "+y";
    case Action::MinusY: return "-y";
    case Action::Stay: return "stay";
  }
  throw std::logic_error("to_string: unknown action");
}

inline GridCell apply_action(GridCell c, Action a) {
  switch (a) {
    case Action::PlusX: return {c.cx + 1, c.cy};
    case Action::MinusX: return {c.cx - 1, c.cy};
    case Action::PlusY: return {c.cx, c.cy + 1};
    case Action::MinusY: return {c.cx, c.cy - 1};
    case Action::Stay: return c;
  }
  throw std::logic_error("apply_action: unknown action");
}

// Full scenario description: grid geometry, plume, prior, filter, sensor and
// flight-budget parameters. The episode length is pinned to the battery
// budget: battery_minutes * 60 * sampling_hz samples at samples_per_location
// per 2-minute averaging stop.
struct ScenarioConfig {
  int grid_nx = 10;
  int grid_ny = 10;
  double cell_size = 100.0;     // m
  double measurement_z = 10.0;  // m, sampling height above ground
  PlumeConfig plume;
  LognormalParams prior = LognormalParams::from_median_mode(100.0, 30.0);
  EnkfConfig enkf;
  std::size_t ensemble_size = 100;
  double noise_sd = 30.0 / std::sqrt(12.0);  // ppm, averaged-sample sensor error
  int episode_length = 16;                   // observation stops per flight
  double flux_min = 200.0;                   // mg m^-2 s^-1, scenario draw range
  double flux_max = 300.0;
  double battery_minutes = 32.0;
  double sampling_hz = 0.1;
  int samples_per_location = 12;

  bool in_grid(GridCell c) const {
    return c.cx >= 0 && c.cx < grid_nx && c.cy >= 0 && c.cy < grid_ny;
  }

  bool is_edge(GridCell c) const {
    return in_grid(c) &&
           (c.cx == 0 || c.cx == grid_nx - 1 || c.cy == 0 || c.cy == grid_ny - 1);
  }

  Point3 cell_center(GridCell c) const {
    return {(c.cx + 0.5) * cell_size, (c.cy + 0.5) * cell_size, measurement_z};
  }

  std::vector<GridCell> edge_cells() const {
    std::vector<GridCell> out;
    for (int cx = 0; cx < grid_nx; ++cx)
      for (int cy = 0; cy < grid_ny; ++cy)
        if (is_edge({cx, cy})) out.push_back({cx, cy});
    return out;
  }

  void validate() const {
    if (grid_nx < 2 || grid_ny < 2)
      throw std::invalid_argument("ScenarioConfig: grid must be at least 2x2");
    if (!(cell_size > 0.0)) throw std::invalid_argument("ScenarioConfig: cell_size must be > 0");
    if (!(measurement_z > 0.0))
      throw std::invalid_argument("ScenarioConfig: measurement_z must be > 0");
    plume.validate();
    enkf.validate();
    if (plume.cell_size != cell_size)
      throw std::invalid_argument("ScenarioConfig: plume.cell_size must match cell_size");
    if (!(prior.sigma > 0.0)) throw std::invalid_argument("ScenarioConfig: prior sigma must be > 0");
    if (ensemble_size < 2)
      throw std::invalid_argument("ScenarioConfig: ensemble_size must be >= 2");
    if (!(noise_sd > 0.0)) throw std::invalid_argument("ScenarioConfig: noise_sd must be > 0");
    if (episode_length < 2)
      throw std::invalid_argument("ScenarioConfig: episode_length must be >= 2");
    if (!(flux_min > 0.0) || !(flux_max > flux_min))
      throw std::invalid_argument("ScenarioConfig: need flux_max > flux_min > 0");
    if (samples_per_location < 1)
      throw std::invalid_argument("ScenarioConfig: samples_per_location must be >= 1");
    const double budget = battery_minutes * 60.0 * sampling_hz /
                          static_cast<double>(samples_per_location);
    if (std::abs(budget - episode_length) > 1e-9)
      throw std::invalid_argument(
          "ScenarioConfig: episode_length must equal the battery budget "
          "battery_minutes * 60 * sampling_hz / samples_per_location");
  }
};

// Actions that keep the drone on the grid. Never empty (Stay always
// qualifies); querying a terminal state is a contract violation.
inline std::vector<Action> legal_actions(const AgentState& s, const ScenarioConfig& cfg) {
  if (s.t >= cfg.episode_length - 1)
    throw std::logic_error("legal_actions: state is terminal");
  if (!cfg.in_grid(s.cell())) throw std::logic_error("legal_actions: state off grid");
  std::vector<Action> out;
  out.reserve(kActions.size());
  for (Action a : kActions)
    if (cfg.in_grid(apply_action(s.cell(), a))) out.push_back(a);
  return out;
}

// Synthetic noisy measurement at a cell centre: plume truth plus
// N(0, noise_sd) sensor error. Negative values are possible and are kept.
inline Observation observe(GridCell cell, int time_step, double true_flux,
                           const ScenarioConfig& cfg, rng::Stream& stream) {
  if (!cfg.in_grid(cell)) throw std::invalid_argument("observe: cell off grid");
  const Point3 p = cfg.cell_center(cell);
  const double value =
      concentration(true_flux, p, cfg.plume) + rng::normal(stream, 0.0, cfg.noise_sd);
  return {value, cfg.noise_sd, p, time_step};
}

// Everything needed to audit one flight after the fact.
struct EpisodeRecord {
  double true_flux = 0.0;
  GridCell start_cell;
  LognormalParams prior;
  std::vector<AgentState> path;
  std::vector<Observation> observations;
  std::vector<double> rewards;
  LognormalParams final_posterior;
  EnsembleStats final_stats;
  double final_crps = std::numeric_limits<double>::quiet_NaN();

  friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

// Optional overrides for evaluation runs; unset fields are drawn from the
// scenario stream as usual.
struct ResetOverrides {
  std::optional<double> true_flux;
  std::optional<GridCell> start_cell;
};

struct StepResult {
  AgentState state;
  double reward = 0.0;
  bool done = false;
};

// Episodic gridworld. reset() draws a scenario, spawns the drone on an edge
// cell and takes the start-cell observation (which emits no reward); each
// step() moves, observes, assimilates and scores. One instance runs one
// episode at a time; parallel evaluation uses independent instances.
class Environment {
 public:
  explicit Environment(ScenarioConfig cfg, RewardKind reward_kind = RewardKind::NegCrps)
      : cfg_(std::move(cfg)), reward_kind_(reward_kind) {
    cfg_.validate();
    edge_cells_ = cfg_.edge_cells();
  }

  // Substream layout under the episode seed: 1 scenario draws, 2 prior
  // ensemble, 3 observation noise, 4 filter perturbations. Fixing the split
  // makes episodes reproducible and lets the filter stream be replayed in
  // isolation.
  AgentState reset(std::uint64_t seed, const ResetOverrides& overrides = {}) {
    rng_scenario_ = rng::make_stream(seed, 1);
    rng_prior_ = rng::make_stream(seed, 2);
    rng_obs_ = rng::make_stream(seed, 3);
    rng_filter_ = rng::make_stream(seed, 4);

    if (overrides.true_flux) {
      if (!(*overrides.true_flux > 0.0))
        throw std::invalid_argument("reset: true_flux override must be > 0");
      true_flux_ = *overrides.true_flux;
    } else {
      true_flux_ = rng::uniform(rng_scenario_, cfg_.flux_min, cfg_.flux_max);
    }

    GridCell start;
    if (overrides.start_cell) {
      if (!cfg_.in_grid(*overrides.start_cell))
        throw std::invalid_argument("reset: start cell off grid");
      start = *overrides.start_cell;
    } else {
      const int i =
          rng::uniform_int(rng_scenario_, 0, static_cast<int>(edge_cells_.size()) - 1);
      start = edge_cells_[static_cast<std::size_t>(i)];
    }

    ensemble_ = sample_prior(cfg_.prior, cfg_.ensemble_size, rng_prior_);
    record_ = EpisodeRecord{};
    record_.true_flux = true_flux_;
    record_.start_cell = start;
    record_.prior = cfg_.prior;
    state_ = {start.cx, start.cy, 0};
    in_episode_ = true;
    done_ = false;
    take_observation();
    return state_;
  }

  StepResult step(Action a) {
    if (!in_episode_) throw std::logic_error("step: reset() required before stepping");
    if (done_) throw std::logic_error("step: episode already finished");
    const std::vector<Action> legal = legal_actions(state_, cfg_);
    if (std::find(legal.begin(), legal.end(), a) == legal.end())
      throw std::logic_error("step: illegal action would leave the grid");

    const GridCell target = apply_action(state_.cell(), a);
    state_ = {target.cx, target.cy, state_.t + 1};
    take_observation();
    const double reward = step_reward(reward_kind_, ensemble_, record_.prior, true_flux_);
    record_.rewards.push_back(reward);

    done_ = state_.t == cfg_.episode_length - 1;
    if (done_) {
      record_.final_posterior = fit_lognormal_clamped(ensemble_);
      record_.final_stats = ensemble_stats(ensemble_);
      record_.final_crps = crps_ensemble(ensemble_, true_flux_);
    }
    return {state_, reward, done_};
  }

  const ScenarioConfig& config() const { return cfg_; }
  RewardKind reward_kind() const { return reward_kind_; }
  const AgentState& state() const { return state_; }
  bool done() const { return done_; }
  double true_flux() const { return true_flux_; }
  const FluxEnsemble& ensemble() const { return ensemble_; }
  const EpisodeRecord& record() const { return record_; }

 private:
  void take_observation() {
    const Observation obs = observe(state_.cell(), state_.t, true_flux_, cfg_, rng_obs_);
    // The forward model is linear in flux; freeze the geometry factor once
    // per observation so filter passes skip redundant plume evaluations.
    const double k = excess_factor(obs.location, cfg_.plume);
    const double bg = cfg_.plume.background_ppm;
    ensemble_ = assimilate(
        ensemble_, obs, [k, bg](double flux) { return bg + k * flux; }, cfg_.enkf,
        rng_filter_);
    record_.path.push_back(state_);
    record_.observations.push_back(obs);
  }

  ScenarioConfig cfg_;
  RewardKind reward_kind_;
  std::vector<GridCell> edge_cells_;
  rng::Stream rng_scenario_;
  rng::Stream rng_prior_;
  rng::Stream rng_obs_;
  rng::Stream rng_filter_;
  double true_flux_ = 0.0;
  FluxEnsemble ensemble_;
  AgentState state_;
  EpisodeRecord record_;
  bool in_episode_ = false;
  bool done_ = false;
};

}  // namespace hotspot
