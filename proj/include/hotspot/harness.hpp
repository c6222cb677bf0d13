#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "hotspot/qlearning.hpp"

namespace hotspot {

inline constexpr std::string_view kVersion = "0.1.0";

namespace detail {

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline void append_num(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g,", v);
  out += buf;
}

// Stable worker pool over [0, count); each index runs exactly once and any
// worker exception is rethrown on the caller.
template <class Fn>
void run_parallel(std::uint64_t count, int threads, Fn&& fn) {
  unsigned n = threads > 0 ? static_cast<unsigned>(threads)
                           : std::max(1u, std::thread::hardware_concurrency());
  if (n <= 1 || count < 2) {
    for (std::uint64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  n = static_cast<unsigned>(std::min<std::uint64_t>(n, count));
  std::atomic<std::uint64_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr err;
  auto worker = [&] {
    while (true) {
      const std::uint64_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        const std::scoped_lock lock(err_mutex);
        if (!err) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(n);
  for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace detail

// Left-to-right mean and n-1 standard deviation; evaluation aggregates use
// exactly this so reports can be recomputed bit-for-bit from kept flights.
inline std::pair<double, double> mean_sd(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean_sd: empty sample");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

// Canonical evaluation start cells, derived from the plume geometry: walk
// from the source along the downwind and upwind rays to where they leave the
// grid, and from the midpoint of that transect along the crosswind
// direction with more room. Results land on edge cells by construction.
inline std::map<std::string, GridCell> canonical_starts(const ScenarioConfig& sc) {
  const double w = sc.grid_nx * sc.cell_size;
  const double h = sc.grid_ny * sc.cell_size;
  const double beta =
      detail::deg_to_rad(std::fmod(sc.plume.wind_direction_deg + 180.0, 360.0));
  const double ux = std::sin(beta);
  const double uy = std::cos(beta);

  // Distance until the ray p + t d leaves [0,w] x [0,h].
  auto exit_distance = [&](double px, double py, double dx, double dy) {
    double t = std::numeric_limits<double>::infinity();
    if (dx > 0.0) t = std::min(t, (w - px) / dx);
    if (dx < 0.0) t = std::min(t, -px / dx);
    if (dy > 0.0) t = std::min(t, (h - py) / dy);
    if (dy < 0.0) t = std::min(t, -py / dy);
    return t;
  };
  auto cell_at = [&](double x, double y) {
    GridCell c{static_cast<int>(std::floor(x / sc.cell_size)),
               static_cast<int>(std::floor(y / sc.cell_size))};
    c.cx = std::clamp(c.cx, 0, sc.grid_nx - 1);
    c.cy = std::clamp(c.cy, 0, sc.grid_ny - 1);
    return c;
  };

  const double sx = sc.plume.source_x;
  const double sy = sc.plume.source_y;
  const double t_down = exit_distance(sx, sy, ux, uy);
  const double t_up = exit_distance(sx, sy, -ux, -uy);
  const GridCell down = cell_at(sx + t_down * ux, sy + t_down * uy);
  const GridCell up = cell_at(sx - t_up * ux, sy - t_up * uy);

  const double mx = sx + 0.5 * (t_down - t_up) * ux;
  const double my = sy + 0.5 * (t_down - t_up) * uy;
  const double vx = -uy;
  const double vy = ux;
  const double t_left = exit_distance(mx, my, vx, vy);
  const double t_right = exit_distance(mx, my, -vx, -vy);
  const double side = t_left >= t_right ? 1.0 : -1.0;
  const double t_cross = std::max(t_left, t_right);
  const GridCell cross = cell_at(mx + side * t_cross * vx, my + side * t_cross * vy);

  return {{"upwind", up}, {"downwind", down}, {"crosswind", cross}};
}

struct EvalConfig {
  std::uint64_t n_flights = 5000;
  double true_flux = 250.0;
  std::map<std::string, GridCell> starts;  // empty: canonical_starts(scenario)
  std::uint64_t seed = 0;
  bool keep_flights = false;
  int threads = 0;  // 0: hardware concurrency

  void validate() const {
    if (n_flights < 1) throw std::invalid_argument("EvalConfig: n_flights must be >= 1");
    if (!(true_flux > 0.0)) throw std::invalid_argument("EvalConfig: true_flux must be > 0");
  }
};

struct StartReport {
  GridCell cell;
  std::uint64_t n_flights = 0;
  double mean_crps = 0.0;
  double sd_crps = 0.0;
  std::vector<double> flight_crps;  // populated only when keep_flights is set

  friend bool operator==(const StartReport&, const StartReport&) = default;
};

struct EvalReport {
  std::string version;
  std::string config_hash;
  std::uint64_t seed = 0;
  double true_flux = 0.0;
  std::map<std::string, StartReport> groups;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// Order-independent fingerprint of everything that decides evaluation
// results, embedded in reports so mismatched comparisons are detectable.
inline std::string config_fingerprint(const ScenarioConfig& sc, const EvalConfig& ec) {
  std::string s;
  s.reserve(512);
  s += "scenario:";
  detail::append_num(s, sc.grid_nx);
  detail::append_num(s, sc.grid_ny);
  detail::append_num(s, sc.cell_size);
  detail::append_num(s, sc.measurement_z);
  detail::append_num(s, sc.plume.wind_speed);
  detail::append_num(s, sc.plume.wind_direction_deg);
  detail::append_num(s, sc.plume.stability_class);
  detail::append_num(s, sc.plume.source_x);
  detail::append_num(s, sc.plume.source_y);
  detail::append_num(s, sc.plume.source_z);
  detail::append_num(s, sc.plume.cell_size);
  detail::append_num(s, sc.plume.background_ppm);
  detail::append_num(s, sc.plume.air_temperature_k);
  detail::append_num(s, sc.plume.pressure_kpa);
  detail::append_num(s, sc.prior.mu);
  detail::append_num(s, sc.prior.sigma);
  detail::append_num(s, sc.enkf.iterations);
  for (double a : sc.enkf.alphas()) detail::append_num(s, a);
  detail::append_num(s, static_cast<double>(sc.ensemble_size));
  detail::append_num(s, sc.noise_sd);
  detail::append_num(s, sc.episode_length);
  detail::append_num(s, sc.flux_min);
  detail::append_num(s, sc.flux_max);
  detail::append_num(s, sc.battery_minutes);
  detail::append_num(s, sc.sampling_hz);
  detail::append_num(s, sc.samples_per_location);
  s += "eval:";
  detail::append_num(s, static_cast<double>(ec.n_flights));
  detail::append_num(s, ec.true_flux);
  for (const auto& [name, cell] : ec.starts) {
    s += name;
    detail::append_num(s, cell.cx);
    detail::append_num(s, cell.cy);
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(detail::fnv1a64(s)));
  return buf;
}

// Monte Carlo evaluation: n_flights independent greedy episodes per start
// group at a fixed true flux, aggregated to mean/sd of final CRPS. Flight i
// of a group runs under seed mix(seed, fnv1a64(group), i), so results do not
// depend on scheduling and a serial run reproduces a threaded one exactly.
inline EvalReport evaluate(const Policy& policy, const EvalConfig& ec,
                           const ScenarioConfig& sc,
                           RewardKind kind = RewardKind::NegCrps) {
  ec.validate();
  sc.validate();

  std::map<std::string, GridCell> groups;
  if (const FixedPath* fp = policy.path()) {
    fp->validate(sc);
    groups.emplace("path", fp->cells.front());
  } else if (ec.starts.empty()) {
    groups = canonical_starts(sc);
  } else {
    groups = ec.starts;
    for (const auto& [name, cell] : groups)
      if (!sc.is_edge(cell))
        throw std::invalid_argument("evaluate: start '" + name + "' is not an edge cell");
  }

  EvalReport report;
  report.version = std::string(kVersion);
  report.config_hash = config_fingerprint(sc, ec);
  report.seed = ec.seed;
  report.true_flux = ec.true_flux;

  for (const auto& [name, cell] : groups) {
    const std::uint64_t group_tag = detail::fnv1a64(name);
    std::vector<double> crps_values(ec.n_flights);
    detail::run_parallel(ec.n_flights, ec.threads, [&](std::uint64_t i) {
      ResetOverrides ov;
      ov.true_flux = ec.true_flux;
      if (!policy.path()) ov.start_cell = cell;
      const EpisodeRecord rec =
          greedy_rollout(policy, sc, kind, ov, rng::mix(ec.seed, group_tag, i));
      crps_values[i] = rec.final_crps;
    });
    StartReport sr;
    sr.cell = cell;
    sr.n_flights = ec.n_flights;
    const auto [mean, sd] = mean_sd(crps_values);
    sr.mean_crps = mean;
    sr.sd_crps = sd;
    if (ec.keep_flights) sr.flight_crps = std::move(crps_values);
    report.groups.emplace(name, std::move(sr));
  }
  return report;
}

// Trailing moving average (window w, emitted from the first full window)
// followed by min-max normalisation to [0, 1]. A flat smoothed series maps
// to all zeros.
inline std::vector<double> postprocess_curve(std::span<const double> raw,
                                             std::size_t window = 1000) {
  if (window < 1) throw std::invalid_argument("postprocess_curve: window must be >= 1");
  if (raw.size() < window)
    throw std::invalid_argument("postprocess_curve: series shorter than window");
  std::vector<double> out;
  out.reserve(raw.size() - window + 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    sum += raw[i];
    if (i + 1 >= window) {
      out.push_back(sum / static_cast<double>(window));
      sum -= raw[i + 1 - window];
    }
  }
  const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) {
    std::fill(out.begin(), out.end(), 0.0);
    return out;
  }
  const double base = *lo;
  for (double& v : out) v = (v - base) / range;
  return out;
}

struct FieldCell {
  int cx = 0;
  int cy = 0;
  double ppm = 0.0;
};

// Noise-free concentration at every cell centre for a given flux, row-major
// over (cx, cy).
inline std::vector<FieldCell> dump_field(const ScenarioConfig& sc, double phi) {
  if (!(phi >= 0.0)) throw std::domain_error("dump_field: flux must be >= 0");
  std::vector<FieldCell> out;
  out.reserve(static_cast<std::size_t>(sc.grid_nx) * sc.grid_ny);
  for (int cx = 0; cx < sc.grid_nx; ++cx)
    for (int cy = 0; cy < sc.grid_ny; ++cy)
      out.push_back({cx, cy, concentration(phi, sc.cell_center({cx, cy}), sc.plume)});
  return out;
}

struct PosteriorPoint {
  double flux = 0.0;
  double prior_density = 0.0;
  double posterior_density = 0.0;
};

struct PosteriorDump {
  double true_flux = 0.0;
  std::vector<PosteriorPoint> points;
};

// Prior and fitted-posterior densities from a finished episode, tabulated on
// a deterministic log-spaced flux grid covering +-6 sigma of both
// distributions.
inline PosteriorDump dump_posterior(const EpisodeRecord& rec, std::size_t n_points = 512) {
  if (n_points < 2) throw std::invalid_argument("dump_posterior: need >= 2 grid points");
  const LognormalParams& prior = rec.prior;
  const LognormalParams& post = rec.final_posterior;
  if (!(prior.sigma > 0.0) || !(post.sigma > 0.0))
    throw std::invalid_argument("dump_posterior: record lacks fitted distributions");
  const double lo = std::min(prior.mu - 6.0 * prior.sigma, post.mu - 6.0 * post.sigma);
  const double hi = std::max(prior.mu + 6.0 * prior.sigma, post.mu + 6.0 * post.sigma);
  PosteriorDump dump;
  dump.true_flux = rec.true_flux;
  dump.points.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double u =
        lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_points - 1);
    const double flux = std::exp(u);
    dump.points.push_back({flux, prior.pdf(flux), post.pdf(flux)});
  }
  return dump;
}

}  // namespace hotspot
