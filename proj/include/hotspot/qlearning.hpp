#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hotspot/environment.hpp"
#include "hotspot/rng.hpp"

namespace hotspot {

// Dense tabular action-value function over (cx, cy, t, action), row-major in
// that order, zero-initialised. Entries for states or actions that training
// never visits stay at zero. A per-entry visit counter rides along for
// diagnostics.
class QTable {
 public:
  static constexpr int kNumActions = static_cast<int>(kActions.size());

  QTable() : QTable(10, 10, 16) {}

  QTable(int nx, int ny, int horizon)
      : nx_(nx), ny_(ny), horizon_(horizon) {
    if (nx < 1 || ny < 1 || horizon < 1)
      throw std::invalid_argument("QTable: shape components must be >= 1");
    const std::size_t total = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
                              static_cast<std::size_t>(horizon) * kNumActions;
    values_.assign(total, 0.0);
    visits_.assign(total, 0);
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int horizon() const { return horizon_; }
  std::size_t size() const { return values_.size(); }

  double value(const AgentState& s, Action a) const { return values_[index(s, a)]; }
  double& value(const AgentState& s, Action a) { return values_[index(s, a)]; }
  std::uint64_t visits(const AgentState& s, Action a) const { return visits_[index(s, a)]; }
  std::uint64_t& visits(const AgentState& s, Action a) { return visits_[index(s, a)]; }

  const std::vector<double>& raw_values() const { return values_; }
  std::vector<double>& raw_values() { return values_; }
  const std::vector<std::uint64_t>& raw_visits() const { return visits_; }
  std::vector<std::uint64_t>& raw_visits() { return visits_; }

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  std::size_t index(const AgentState& s, Action a) const {
    if (s.cx < 0 || s.cx >= nx_ || s.cy < 0 || s.cy >= ny_ || s.t < 0 || s.t >= horizon_)
      throw std::logic_error("QTable: state out of range");
    return ((static_cast<std::size_t>(s.cx) * ny_ + s.cy) * horizon_ + s.t) * kNumActions +
           action_index(a);
  }

  int nx_ = 0;
  int ny_ = 0;
  int horizon_ = 0;
  std::vector<double> values_;
  std::vector<std::uint64_t> visits_;
};

// Exploration schedule as a function of training progress in [0, 1].
// linear:f ramps eps_max -> eps_min over the first fraction f of training;
// exp:r decays eps_max * exp(-r * progress), floored at eps_min.
struct EpsSchedule {
  enum class Kind { Linear, Exponential };

  Kind kind = Kind::Linear;
  double param = 0.9;

  double epsilon(double eps_max, double eps_min, double progress) const {
    progress = std::clamp(progress, 0.0, 1.0);
    switch (kind) {
      case Kind::Linear:
        if (progress >= param) return eps_min;
        return eps_max - (eps_max - eps_min) * (progress / param);
      case Kind::Exponential:
        return std::max(eps_min, eps_max * std::exp(-param * progress));
    }
    throw std::logic_error("EpsSchedule: unknown kind");
  }

  static EpsSchedule parse(std::string_view text) {
    const std::size_t colon = text.find(':');
    const std::string_view name = text.substr(0, colon);
    double param = 0.0;
    if (colon == std::string_view::npos)
      throw std::invalid_argument("EpsSchedule: expected '<kind>:<param>'");
    try {
      param = std::stod(std::string(text.substr(colon + 1)));
    } catch (const std::exception&) {
      throw std::invalid_argument("EpsSchedule: bad parameter in '" + std::string(text) + "'");
    }
    if (!(param > 0.0)) throw std::invalid_argument("EpsSchedule: parameter must be > 0");
    if (name == "linear") {
      if (param > 1.0)
        throw std::invalid_argument("EpsSchedule: linear fraction must lie in (0, 1]");
      return {Kind::Linear, param};
    }
    if (name == "exp") return {Kind::Exponential, param};
    throw std::invalid_argument("EpsSchedule: unknown kind '" + std::string(name) + "'");
  }

  std::string str() const {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s:%.17g",
                  kind == Kind::Linear ? "linear" : "exp", param);
    return buf;
  }

  friend bool operator==(const EpsSchedule&, const EpsSchedule&) = default;
};

struct TrainConfig {
  std::uint64_t episodes = 1'500'000;
  double alpha = 0.1;  // learning rate
  double gamma = 1.0;  // discount
  double eps_max = 1.0;
  double eps_min = 0.01;
  EpsSchedule schedule;
  RewardKind reward_kind = RewardKind::NegCrps;
  std::uint64_t seed = 0;
  std::uint64_t checkpoint_every = 0;  // 0 disables checkpoints

  void validate() const {
    if (episodes < 1) throw std::invalid_argument("TrainConfig: episodes must be >= 1");
    if (!(alpha > 0.0) || !(alpha <= 1.0))
      throw std::invalid_argument("TrainConfig: alpha must lie in (0, 1]");
    if (!(gamma >= 0.0) || !(gamma <= 1.0))
      throw std::invalid_argument("TrainConfig: gamma must lie in [0, 1]");
    if (!(eps_min >= 0.0) || !(eps_max >= eps_min) || !(eps_max <= 1.0))
      throw std::invalid_argument("TrainConfig: need 0 <= eps_min <= eps_max <= 1");
  }
};

// Epsilon-greedy over the legal actions only; greedy ties are broken
// uniformly at random so the policy carries no directional bias.
inline Action select_action(const QTable& q, const AgentState& s, double epsilon,
                            std::span<const Action> legal, rng::Stream& stream) {
  if (legal.empty()) throw std::invalid_argument("select_action: no legal actions");
  if (epsilon > 0.0 && rng::uniform(stream, 0.0, 1.0) < epsilon)
    return legal[static_cast<std::size_t>(
        rng::uniform_int(stream, 0, static_cast<int>(legal.size()) - 1))];
  std::array<Action, kActions.size()> best{};
  int n_best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (Action a : legal) {
    const double v = q.value(s, a);
    if (v > best_value) {
      best_value = v;
      best[0] = a;
      n_best = 1;
    } else if (v == best_value) {
      best[static_cast<std::size_t>(n_best++)] = a;
    }
  }
  if (n_best == 1) return best[0];
  return best[static_cast<std::size_t>(rng::uniform_int(stream, 0, n_best - 1))];
}

// One tabular Q-learning backup. The bootstrap maximises over the legal
// actions of the successor and is dropped entirely on terminal transitions.
inline void q_update(QTable& q, const AgentState& s, Action a, double reward,
                     const AgentState& next, bool done, double alpha, double gamma,
                     const ScenarioConfig& cfg) {
  double target = reward;
  if (!done) {
    double best = -std::numeric_limits<double>::infinity();
    for (Action na : legal_actions(next, cfg)) best = std::max(best, q.value(next, na));
    target += gamma * best;
  }
  double& v = q.value(s, a);
  v += alpha * (target - v);
  q.visits(s, a) += 1;
}

struct TrainResult {
  QTable table;
  std::vector<double> episode_rewards;  // raw per-episode reward sums
};

using CheckpointFn = std::function<void(std::uint64_t episodes_done, const QTable&)>;

// Single-threaded trainer. Episode e runs under seed mix(seed, e) with
// substream 5 reserved for action selection, keeping the whole run
// reproducible from (config, seed) alone.
inline TrainResult train(const TrainConfig& tc, const ScenarioConfig& sc,
                         const CheckpointFn& checkpoint = {}) {
  tc.validate();
  Environment env(sc, tc.reward_kind);
  TrainResult out{QTable(sc.grid_nx, sc.grid_ny, sc.episode_length), {}};
  out.episode_rewards.reserve(tc.episodes);
  for (std::uint64_t ep = 0; ep < tc.episodes; ++ep) {
    const double eps = tc.schedule.epsilon(
        tc.eps_max, tc.eps_min,
        static_cast<double>(ep) / static_cast<double>(tc.episodes));
    const std::uint64_t ep_seed = rng::mix(tc.seed, ep);
    rng::Stream policy_rng = rng::make_stream(ep_seed, 5);
    AgentState s = env.reset(ep_seed);
    double total = 0.0;
    bool done = false;
    while (!done) {
      const std::vector<Action> legal = legal_actions(s, sc);
      const Action a = select_action(out.table, s, eps, legal, policy_rng);
      const StepResult res = env.step(a);
      q_update(out.table, s, a, res.reward, res.state, res.done, tc.alpha, tc.gamma, sc);
      total += res.reward;
      s = res.state;
      done = res.done;
    }
    out.episode_rewards.push_back(total);
    if (checkpoint && tc.checkpoint_every > 0 && (ep + 1) % tc.checkpoint_every == 0)
      checkpoint(ep + 1, out.table);
  }
  return out;
}

// Scripted flight plan: one cell per time step, consecutive cells identical
// or 4-adjacent.
struct FixedPath {
  std::vector<GridCell> cells;

  void validate(const ScenarioConfig& cfg) const {
    if (cells.size() != static_cast<std::size_t>(cfg.episode_length))
      throw std::invalid_argument("FixedPath: need exactly one cell per time step");
    for (const GridCell& c : cells)
      if (!cfg.in_grid(c)) throw std::invalid_argument("FixedPath: cell off grid");
    for (std::size_t i = 1; i < cells.size(); ++i) {
      const int dist = std::abs(cells[i].cx - cells[i - 1].cx) +
                       std::abs(cells[i].cy - cells[i - 1].cy);
      if (dist > 1) throw std::invalid_argument("FixedPath: consecutive cells not adjacent");
    }
  }
};

inline Action action_between(GridCell from, GridCell to) {
  const int dx = to.cx - from.cx;
  const int dy = to.cy - from.cy;
  if (dx == 0 && dy == 0) return Action::Stay;
  if (dx == 1 && dy == 0) return Action::PlusX;
  if (dx == -1 && dy == 0) return Action::MinusX;
  if (dx == 0 && dy == 1) return Action::PlusY;
  if (dx == 0 && dy == -1) return Action::MinusY;
  throw std::invalid_argument("action_between: cells are not adjacent");
}

// A deployable policy: either a greedy read of a trained table or a scripted
// path.
struct Policy {
  std::variant<QTable, FixedPath> impl;

  static Policy greedy(QTable table) { return {std::move(table)}; }
  static Policy fixed(FixedPath path) { return {std::move(path)}; }

  const QTable* table() const { return std::get_if<QTable>(&impl); }
  const FixedPath* path() const { return std::get_if<FixedPath>(&impl); }
};

// Runs one full episode under the policy (epsilon = 0 for tables; ties still
// resolve through the action substream) and returns its record. A fixed path
// starts at its own first cell; any start override must agree.
inline EpisodeRecord greedy_rollout(const Policy& policy, const ScenarioConfig& sc,
                                    RewardKind kind, const ResetOverrides& overrides,
                                    std::uint64_t seed) {
  Environment env(sc, kind);
  if (const FixedPath* fp = policy.path()) {
    fp->validate(sc);
    ResetOverrides ov = overrides;
    if (ov.start_cell && !(*ov.start_cell == fp->cells.front()))
      throw std::invalid_argument("greedy_rollout: start override conflicts with path");
    ov.start_cell = fp->cells.front();
    env.reset(seed, ov);
    for (std::size_t i = 1; i < fp->cells.size(); ++i)
      env.step(action_between(fp->cells[i - 1], fp->cells[i]));
  } else {
    const QTable& q = *policy.table();
    rng::Stream policy_rng = rng::make_stream(seed, 5);
    AgentState s = env.reset(seed, overrides);
    bool done = false;
    while (!done) {
      const std::vector<Action> legal = legal_actions(s, sc);
      const Action a = select_action(q, s, 0.0, legal, policy_rng);
      const StepResult res = env.step(a);
      s = res.state;
      done = res.done;
    }
  }
  return env.record();
}

}  // namespace hotspot
