#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hotspot/harness.hpp"

// File formats: JSON for configs, episode records and evaluation reports
// (insertion-ordered objects, round-trip-exact doubles); a versioned text
// dump for Q-tables; plain text/CSV for paths, curves, fields and posterior
// tabulations. Config parsing is strict: unknown keys are errors, missing
// keys keep library defaults.
namespace hotspot::io {

using json = nlohmann::ordered_json;

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ifstream open_input(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string() + " for reading");
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot open " + p.string() + " for writing");
  return out;
}

inline json parse_json_file(const std::filesystem::path& p) {
  std::ifstream in = open_input(p);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(p.string() + ": " + e.what());
  }
}

namespace detail {

// Strict object walker: every consumed key is recorded and finish() rejects
// anything left over.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string what) : j_(j), what_(std::move(what)) {
    if (!j.is_object()) throw std::invalid_argument(what_ + ": expected a JSON object");
  }

  const json* find(const char* key) {
    const auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.emplace_back(key);
    return &*it;
  }

  const json& require(const char* key) {
    const json* v = find(key);
    if (!v) throw std::invalid_argument(what_ + ": missing key '" + key + "'");
    return *v;
  }

  template <class T>
  void read(const char* key, T& out) {
    if (const json* v = find(key)) out = get<T>(*v, key);
  }

  template <class T>
  T get(const json& v, const char* key) const {
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw std::invalid_argument(what_ + ": bad value for '" + std::string(key) + "'");
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
        throw std::invalid_argument(what_ + ": unknown key '" + it.key() + "'");
  }

  const std::string& what() const { return what_; }

 private:
  const json& j_;
  std::string what_;
  std::vector<std::string> seen_;
};

}  // namespace detail

inline json cell_to_json(GridCell c) { return json::array({c.cx, c.cy}); }

inline GridCell cell_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() ||
      !j[1].is_number_integer())
    throw std::invalid_argument(what + ": expected a [cx, cy] pair");
  return {j[0].get<int>(), j[1].get<int>()};
}

inline json lognormal_to_json(const LognormalParams& p) {
  return json{{"mu", p.mu}, {"sigma", p.sigma}};
}

inline LognormalParams lognormal_from_json(const json& j, const std::string& what) {
  detail::ObjectReader r(j, what);
  if (j.contains("median") || j.contains("mode")) {
    const double median = r.get<double>(r.require("median"), "median");
    const double mode = r.get<double>(r.require("mode"), "mode");
    r.finish();
    return LognormalParams::from_median_mode(median, mode);
  }
  LognormalParams p;
  p.mu = r.get<double>(r.require("mu"), "mu");
  p.sigma = r.get<double>(r.require("sigma"), "sigma");
  r.finish();
  return p;
}

inline void merge_plume(PlumeConfig& p, const json& j) {
  detail::ObjectReader r(j, "plume");
  r.read("wind_speed", p.wind_speed);
  r.read("wind_direction_deg", p.wind_direction_deg);
  r.read("stability_class", p.stability_class);
  r.read("source_x", p.source_x);
  r.read("source_y", p.source_y);
  r.read("source_z", p.source_z);
  r.read("cell_size", p.cell_size);
  r.read("background_ppm", p.background_ppm);
  r.read("air_temperature_k", p.air_temperature_k);
  r.read("pressure_kpa", p.pressure_kpa);
  r.finish();
}

inline void merge_enkf(EnkfConfig& c, const json& j) {
  detail::ObjectReader r(j, "enkf");
  r.read("iterations", c.iterations);
  r.read("inflation", c.inflation);
  r.finish();
}

inline void merge_scenario(ScenarioConfig& sc, const json& j) {
  detail::ObjectReader r(j, "scenario");
  r.read("grid_nx", sc.grid_nx);
  r.read("grid_ny", sc.grid_ny);
  r.read("cell_size", sc.cell_size);
  r.read("measurement_z", sc.measurement_z);
  r.read("ensemble_size", sc.ensemble_size);
  r.read("noise_sd", sc.noise_sd);
  r.read("episode_length", sc.episode_length);
  r.read("flux_min", sc.flux_min);
  r.read("flux_max", sc.flux_max);
  r.read("battery_minutes", sc.battery_minutes);
  r.read("sampling_hz", sc.sampling_hz);
  r.read("samples_per_location", sc.samples_per_location);
  if (const json* sub = r.find("plume")) merge_plume(sc.plume, *sub);
  if (const json* sub = r.find("prior")) sc.prior = lognormal_from_json(*sub, "scenario.prior");
  if (const json* sub = r.find("enkf")) merge_enkf(sc.enkf, *sub);
  r.finish();
  // A scenario-level cell_size propagates to the plume unless the plume
  // block pins its own.
  if (j.contains("cell_size") && !(j.contains("plume") && j["plume"].contains("cell_size")))
    sc.plume.cell_size = sc.cell_size;
}

inline void merge_train(TrainConfig& tc, const json& j) {
  detail::ObjectReader r(j, "train");
  r.read("episodes", tc.episodes);
  r.read("alpha", tc.alpha);
  r.read("gamma", tc.gamma);
  r.read("eps_max", tc.eps_max);
  r.read("eps_min", tc.eps_min);
  r.read("seed", tc.seed);
  r.read("checkpoint_every", tc.checkpoint_every);
  if (const json* v = r.find("schedule"))
    tc.schedule = EpsSchedule::parse(r.get<std::string>(*v, "schedule"));
  if (const json* v = r.find("reward"))
    tc.reward_kind = parse_reward_kind(r.get<std::string>(*v, "reward"));
  r.finish();
}

inline void merge_eval(EvalConfig& ec, const json& j) {
  detail::ObjectReader r(j, "eval");
  r.read("n_flights", ec.n_flights);
  r.read("true_flux", ec.true_flux);
  r.read("seed", ec.seed);
  r.read("keep_flights", ec.keep_flights);
  r.read("threads", ec.threads);
  if (const json* starts = r.find("starts")) {
    if (!starts->is_object())
      throw std::invalid_argument("eval.starts: expected an object of name -> [cx, cy]");
    ec.starts.clear();
    for (auto it = starts->begin(); it != starts->end(); ++it)
      ec.starts.emplace(it.key(), cell_from_json(it.value(), "eval.starts." + it.key()));
  }
  r.finish();
}

struct ConfigBundle {
  ScenarioConfig scenario;
  TrainConfig train;
  EvalConfig eval;
};

// Top-level config file: optional "scenario", "train" and "eval" sections,
// each merged over the built-in defaults and validated.
inline ConfigBundle parse_config(const json& j) {
  ConfigBundle b;
  detail::ObjectReader r(j, "config");
  if (const json* sub = r.find("scenario")) merge_scenario(b.scenario, *sub);
  if (const json* sub = r.find("train")) merge_train(b.train, *sub);
  if (const json* sub = r.find("eval")) merge_eval(b.eval, *sub);
  r.finish();
  b.scenario.validate();
  b.train.validate();
  b.eval.validate();
  return b;
}

inline ConfigBundle load_config(const std::filesystem::path& p) {
  return parse_config(parse_json_file(p));
}

// ---- Q-table dump: versioned structured text ------------------------------
//
//   qtable v1
//   shape <nx> <ny> <horizon> <actions>
//   values
//   <one line per state: <actions> values, %.17g>
//   visits
//   <same shape, counters>

inline void save_qtable(std::ostream& out, const QTable& q) {
  out << "qtable v1\n";
  out << "shape " << q.nx() << ' ' << q.ny() << ' ' << q.horizon() << ' '
      << QTable::kNumActions << '\n';
  const std::size_t states = q.size() / QTable::kNumActions;
  out << "values\n";
  for (std::size_t s = 0; s < states; ++s) {
    for (int a = 0; a < QTable::kNumActions; ++a)
      out << (a ? " " : "") << format_double(q.raw_values()[s * QTable::kNumActions + a]);
    out << '\n';
  }
  out << "visits\n";
  for (std::size_t s = 0; s < states; ++s) {
    for (int a = 0; a < QTable::kNumActions; ++a)
      out << (a ? " " : "") << q.raw_visits()[s * QTable::kNumActions + a];
    out << '\n';
  }
  if (!out) throw std::runtime_error("save_qtable: write failed");
}

inline QTable load_qtable(std::istream& in) {
  std::string magic, version, tag;
  if (!(in >> magic >> version) || magic != "qtable" || version != "v1")
    throw std::runtime_error("load_qtable: not a qtable v1 file");
  int nx = 0, ny = 0, horizon = 0, actions = 0;
  if (!(in >> tag >> nx >> ny >> horizon >> actions) || tag != "shape")
    throw std::runtime_error("load_qtable: malformed shape header");
  if (nx < 1 || ny < 1 || horizon < 1 || actions != QTable::kNumActions)
    throw std::runtime_error("load_qtable: unsupported shape");
  QTable q(nx, ny, horizon);
  if (!(in >> tag) || tag != "values")
    throw std::runtime_error("load_qtable: missing values section");
  for (double& v : q.raw_values())
    if (!(in >> v)) throw std::runtime_error("load_qtable: truncated values section");
  if (!(in >> tag) || tag != "visits")
    throw std::runtime_error("load_qtable: missing visits section");
  for (std::uint64_t& v : q.raw_visits())
    if (!(in >> v)) throw std::runtime_error("load_qtable: truncated visits section");
  return q;
}

inline void save_qtable(const std::filesystem::path& p, const QTable& q) {
  std::ofstream out = open_output(p);
  save_qtable(out, q);
}

inline QTable load_qtable(const std::filesystem::path& p) {
  std::ifstream in = open_input(p);
  return load_qtable(in);
}

// ---- Episode records: single-line JSON -------------------------------------

inline json record_to_json(const EpisodeRecord& rec) {
  json path = json::array();
  for (const AgentState& s : rec.path) path.push_back(json::array({s.cx, s.cy, s.t}));
  json obs = json::array();
  for (const Observation& o : rec.observations)
    obs.push_back(json{{"value", o.value},
                       {"noise_sd", o.noise_sd},
                       {"x", o.location.x},
                       {"y", o.location.y},
                       {"z", o.location.z},
                       {"t", o.time_step}});
  return json{{"true_flux", rec.true_flux},
              {"start_cell", cell_to_json(rec.start_cell)},
              {"prior", lognormal_to_json(rec.prior)},
              {"path", path},
              {"observations", obs},
              {"rewards", rec.rewards},
              {"final_posterior", lognormal_to_json(rec.final_posterior)},
              {"final_stats",
               json{{"mean", rec.final_stats.mean},
                    {"median", rec.final_stats.median},
                    {"sd", rec.final_stats.sd}}},
              {"final_crps", rec.final_crps}};
}

inline EpisodeRecord record_from_json(const json& j) {
  detail::ObjectReader r(j, "record");
  EpisodeRecord rec;
  rec.true_flux = r.get<double>(r.require("true_flux"), "true_flux");
  rec.start_cell = cell_from_json(r.require("start_cell"), "record.start_cell");
  rec.prior = lognormal_from_json(r.require("prior"), "record.prior");
  for (const json& s : r.require("path")) {
    if (!s.is_array() || s.size() != 3)
      throw std::invalid_argument("record.path: expected [cx, cy, t] triples");
    rec.path.push_back({s[0].get<int>(), s[1].get<int>(), s[2].get<int>()});
  }
  for (const json& o : r.require("observations")) {
    detail::ObjectReader ro(o, "record.observation");
    Observation ob;
    ob.value = ro.get<double>(ro.require("value"), "value");
    ob.noise_sd = ro.get<double>(ro.require("noise_sd"), "noise_sd");
    ob.location.x = ro.get<double>(ro.require("x"), "x");
    ob.location.y = ro.get<double>(ro.require("y"), "y");
    ob.location.z = ro.get<double>(ro.require("z"), "z");
    ob.time_step = ro.get<int>(ro.require("t"), "t");
    ro.finish();
    rec.observations.push_back(ob);
  }
  rec.rewards = r.get<std::vector<double>>(r.require("rewards"), "rewards");
  rec.final_posterior = lognormal_from_json(r.require("final_posterior"), "record.final_posterior");
  {
    detail::ObjectReader rs(r.require("final_stats"), "record.final_stats");
    rec.final_stats.mean = rs.get<double>(rs.require("mean"), "mean");
    rec.final_stats.median = rs.get<double>(rs.require("median"), "median");
    rec.final_stats.sd = rs.get<double>(rs.require("sd"), "sd");
    rs.finish();
  }
  rec.final_crps = r.get<double>(r.require("final_crps"), "final_crps");
  r.finish();
  return rec;
}

inline void save_record(const std::filesystem::path& p, const EpisodeRecord& rec) {
  if (!std::isfinite(rec.final_crps))
    throw std::invalid_argument("save_record: episode is not finished");
  std::ofstream out = open_output(p);
  out << record_to_json(rec).dump() << '\n';
  if (!out) throw std::runtime_error("save_record: write failed");
}

inline EpisodeRecord load_record(const std::filesystem::path& p) {
  return record_from_json(parse_json_file(p));
}

// ---- Evaluation reports: JSON ----------------------------------------------

inline json report_to_json(const EvalReport& rep) {
  json groups = json::object();
  for (const auto& [name, sr] : rep.groups) {
    json g{{"cell", cell_to_json(sr.cell)},
           {"n_flights", sr.n_flights},
           {"mean_crps", sr.mean_crps},
           {"sd_crps", sr.sd_crps}};
    if (!sr.flight_crps.empty()) g["flight_crps"] = sr.flight_crps;
    groups[name] = std::move(g);
  }
  return json{{"version", rep.version},
              {"config_hash", rep.config_hash},
              {"seed", rep.seed},
              {"true_flux", rep.true_flux},
              {"groups", groups}};
}

inline EvalReport report_from_json(const json& j) {
  detail::ObjectReader r(j, "report");
  EvalReport rep;
  rep.version = r.get<std::string>(r.require("version"), "version");
  rep.config_hash = r.get<std::string>(r.require("config_hash"), "config_hash");
  rep.seed = r.get<std::uint64_t>(r.require("seed"), "seed");
  rep.true_flux = r.get<double>(r.require("true_flux"), "true_flux");
  const json& groups = r.require("groups");
  if (!groups.is_object()) throw std::invalid_argument("report.groups: expected an object");
  for (auto it = groups.begin(); it != groups.end(); ++it) {
    detail::ObjectReader rg(it.value(), "report.groups." + it.key());
    StartReport sr;
    sr.cell = cell_from_json(rg.require("cell"), "report cell");
    sr.n_flights = rg.get<std::uint64_t>(rg.require("n_flights"), "n_flights");
    sr.mean_crps = rg.get<double>(rg.require("mean_crps"), "mean_crps");
    sr.sd_crps = rg.get<double>(rg.require("sd_crps"), "sd_crps");
    if (const json* fc = rg.find("flight_crps"))
      sr.flight_crps = rg.get<std::vector<double>>(*fc, "flight_crps");
    rg.finish();
    rep.groups.emplace(it.key(), std::move(sr));
  }
  r.finish();
  return rep;
}

inline void save_report(const std::filesystem::path& p, const EvalReport& rep) {
  std::ofstream out = open_output(p);
  out << report_to_json(rep).dump(2) << '\n';
  if (!out) throw std::runtime_error("save_report: write failed");
}

inline EvalReport load_report(const std::filesystem::path& p) {
  return report_from_json(parse_json_file(p));
}

// ---- Fixed paths: text, one "cx cy" per line, # comments -------------------

inline FixedPath load_path(std::istream& in) {
  FixedPath path;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const std::size_t hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    std::istringstream ss(line);
    int cx = 0, cy = 0;
    if (!(ss >> cx)) continue;  // blank or comment-only line
    std::string trailing;
    if (!(ss >> cy) || (ss >> trailing))
      throw std::runtime_error("path file line " + std::to_string(line_no) +
                               ": expected 'cx cy'");
    path.cells.push_back({cx, cy});
  }
  return path;
}

inline void save_path(std::ostream& out, const FixedPath& path) {
  for (const GridCell& c : path.cells) out << c.cx << ' ' << c.cy << '\n';
  if (!out) throw std::runtime_error("save_path: write failed");
}

inline FixedPath load_path(const std::filesystem::path& p) {
  std::ifstream in = open_input(p);
  return load_path(in);
}

// Policy files are sniffed by content: a Q-table dump announces itself with
// its magic line, anything else parses as a fixed path.
inline Policy load_policy(const std::filesystem::path& p) {
  {
    std::ifstream probe = open_input(p);
    std::string first;
    std::getline(probe, first);
    if (first.rfind("qtable", 0) == 0) return Policy::greedy(load_qtable(p));
  }
  return Policy::fixed(load_path(p));
}

// ---- CSV outputs ------------------------------------------------------------

inline void write_series_csv(std::ostream& out, std::span<const double> values,
                             std::string_view value_header, std::size_t first_index = 0) {
  out << "episode," << value_header << '\n';
  for (std::size_t i = 0; i < values.size(); ++i)
    out << (first_index + i) << ',' << format_double(values[i]) << '\n';
  if (!out) throw std::runtime_error("write_series_csv: write failed");
}

// Reads the last column of a CSV, skipping the header and blank lines.
inline std::vector<double> read_series_csv(std::istream& in) {
  std::vector<double> out;
  std::string line;
  bool first = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t comma = line.rfind(',');
    const std::string field = comma == std::string::npos ? line : line.substr(comma + 1);
    try {
      std::size_t used = 0;
      const double v = std::stod(field, &used);
      if (used != field.size()) throw std::invalid_argument(field);
      out.push_back(v);
    } catch (const std::exception&) {
      if (first) {
        first = false;
        continue;  // header row
      }
      throw std::runtime_error("series csv line " + std::to_string(line_no) +
                               ": bad number '" + field + "'");
    }
    first = false;
  }
  return out;
}

inline void write_field_csv(std::ostream& out, std::span<const FieldCell> field) {
  out << "cx,cy,ppm\n";
  for (const FieldCell& c : field)
    out << c.cx << ',' << c.cy << ',' << format_double(c.ppm) << '\n';
  if (!out) throw std::runtime_error("write_field_csv: write failed");
}

inline void write_posterior_csv(std::ostream& out, const PosteriorDump& dump) {
  out << "# true_flux," << format_double(dump.true_flux) << '\n';
  out << "flux,prior_density,posterior_density\n";
  for (const PosteriorPoint& p : dump.points)
    out << format_double(p.flux) << ',' << format_double(p.prior_density) << ','
        << format_double(p.posterior_density) << '\n';
  if (!out) throw std::runtime_error("write_posterior_csv: write failed");
}

// ---- Ensemble dumps: one flux per line --------------------------------------

inline void write_ensemble(std::ostream& out, const FluxEnsemble& e) {
  for (std::size_t i = 0; i < e.size(); ++i) out << format_double(e.flux(i)) << '\n';
  if (!out) throw std::runtime_error("write_ensemble: write failed");
}

inline FluxEnsemble read_ensemble(std::istream& in) {
  FluxEnsemble e;
  double flux = 0.0;
  while (in >> flux) {
    if (!(flux > 0.0)) throw std::runtime_error("read_ensemble: non-positive flux");
    e.log_members.push_back(std::log(flux));
  }
  if (!in.eof()) throw std::runtime_error("read_ensemble: bad flux value");
  return e;
}

}  // namespace hotspot::io
