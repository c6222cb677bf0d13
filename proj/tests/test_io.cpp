#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <sstream>
#include <string>

#include "hotspot/io.hpp"

using namespace hotspot;
namespace fs = std::filesystem;

namespace {

// Scratch directory that cleans up after the test run.
struct TempDir {
  fs::path dir;
  TempDir() {
    dir = fs::temp_directory_path() /
          ("hotspot-test-" + std::to_string(::getpid()) + "-" +
           std::to_string(counter++));
    fs::create_directories(dir);
  }
  ~TempDir() { std::error_code ec; fs::remove_all(dir, ec); }
  fs::path operator/(const char* name) const { return dir / name; }
  static inline int counter = 0;
};

EpisodeRecord finished_record(std::uint64_t seed) {
  const ScenarioConfig sc;
  Environment env(sc);
  env.reset(seed, {250.0, GridCell{2, 7}});
  while (!env.done()) env.step(Action::Stay);
  return env.record();
}

}  // namespace

TEST_CASE("format_double survives the text round trip", "[io]") {
  for (double v : {1.0 / 3.0, 603.7591559079153, -1e-300, 2.5e17, 0.0,
                   1.0972569454443823}) {
    CHECK(std::stod(io::format_double(v)) == v);
  }
}

TEST_CASE("config parsing applies defaults and rejects unknown keys", "[io]") {
  SECTION("empty object means library defaults") {
    const io::ConfigBundle b = io::parse_config(io::json::object());
    CHECK(b.scenario.grid_nx == 10);
    CHECK(b.scenario.plume.wind_direction_deg == 320.0);
    CHECK(b.scenario.prior.mu == std::log(100.0));
    CHECK(b.train.episodes == 1500000);
    CHECK(b.eval.true_flux == 250.0);
  }

  SECTION("partial overrides keep everything else") {
    const io::json j = {{"scenario", {{"noise_sd", 5.0},
                                      {"plume", {{"wind_speed", 6.5}}}}},
                        {"train", {{"reward", "kl"}, {"episodes", 2000}}}};
    const io::ConfigBundle b = io::parse_config(j);
    CHECK(b.scenario.noise_sd == 5.0);
    CHECK(b.scenario.plume.wind_speed == 6.5);
    CHECK(b.scenario.plume.wind_direction_deg == 320.0);
    CHECK(b.scenario.ensemble_size == 100);
    CHECK(b.train.reward_kind == RewardKind::KlGain);
    CHECK(b.train.episodes == 2000);
    CHECK(b.train.alpha == 0.1);
  }

  SECTION("prior accepts both parameterisations") {
    const io::json by_stats = {{"scenario", {{"prior", {{"median", 50.0}, {"mode", 20.0}}}}}};
    const LognormalParams p = io::parse_config(by_stats).scenario.prior;
    CHECK(p == LognormalParams::from_median_mode(50.0, 20.0));

    const io::json by_params = {{"scenario", {{"prior", {{"mu", 4.0}, {"sigma", 0.5}}}}}};
    CHECK((io::parse_config(by_params).scenario.prior == LognormalParams{4.0, 0.5}));
  }

  SECTION("scenario-level cell_size propagates into the plume") {
    io::json j = {{"scenario", {{"cell_size", 50.0}}}};
    CHECK(io::parse_config(j).scenario.plume.cell_size == 50.0);
  }

  SECTION("unknown keys are rejected at every level") {
    CHECK_THROWS_AS(io::parse_config({{"scenari0", io::json::object()}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(io::parse_config({{"scenario", {{"grid_nz", 3}}}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(io::parse_config({{"scenario", {{"plume", {{"windspeed", 1.0}}}}}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(io::parse_config({{"train", {{"rewardkind", "kl"}}}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(io::parse_config({{"eval", {{"flights", 10}}}}),
                    std::invalid_argument);
  }

  SECTION("semantic validation still runs on parsed configs") {
    CHECK_THROWS_AS(io::parse_config({{"scenario", {{"episode_length", 12}}}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(io::parse_config({{"train", {{"alpha", 0.0}}}}),
                    std::invalid_argument);
  }

  SECTION("eval starts parse as named cells") {
    const io::json j = {{"eval", {{"starts", {{"south", {4, 0}}, {"west", {0, 3}}}}}}};
    const EvalConfig ec = io::parse_config(j).eval;
    REQUIRE(ec.starts.size() == 2);
    CHECK((ec.starts.at("south") == GridCell{4, 0}));
    CHECK((ec.starts.at("west") == GridCell{0, 3}));
    CHECK_THROWS_AS(io::parse_config({{"eval", {{"starts", {{"bad", {1, 2, 3}}}}}}}),
                    std::invalid_argument);
  }

  SECTION("file errors carry the filename") {
    TempDir tmp;
    CHECK_THROWS_AS(io::load_config(tmp / "missing.json"), std::runtime_error);
    const fs::path bad = tmp / "bad.json";
    std::ofstream(bad) << "{ not json";
    CHECK_THROWS_WITH(io::load_config(bad), Catch::Matchers::ContainsSubstring("bad.json"));
  }
}

TEST_CASE("q-tables round trip exactly through the text dump", "[io]") {
  QTable q(10, 10, 16);
  rng::Stream stream = rng::make_stream(3, 0);
  for (double& v : q.raw_values()) v = rng::normal(stream, 0.0, 7.0);
  q.raw_visits()[1234] = 987654321;

  TempDir tmp;
  const fs::path file = tmp / "table.qt";
  io::save_qtable(file, q);
  const QTable back = io::load_qtable(file);
  CHECK(back == q);

  SECTION("header is human-auditable") {
    std::ifstream in(file);
    std::string line;
    std::getline(in, line);
    CHECK(line == "qtable v1");
    std::getline(in, line);
    CHECK(line == "shape 10 10 16 5");
  }

  SECTION("malformed dumps are rejected") {
    const fs::path bad = tmp / "bad.qt";
    std::ofstream(bad) << "qtable v2\nshape 1 1 1 5\n";
    CHECK_THROWS_AS(io::load_qtable(bad), std::runtime_error);
    std::ofstream(bad) << "qtable v1\nshape 2 2 2 4\nvalues\n";
    CHECK_THROWS_AS(io::load_qtable(bad), std::runtime_error);
    std::ofstream(bad) << "qtable v1\nshape 2 2 2 5\nvalues\n1 2 3\n";
    CHECK_THROWS_AS(io::load_qtable(bad), std::runtime_error);
  }
}

TEST_CASE("episode records round trip exactly through JSON", "[io]") {
  const EpisodeRecord rec = finished_record(17);
  TempDir tmp;
  const fs::path file = tmp / "episode.json";
  io::save_record(file, rec);
  const EpisodeRecord back = io::load_record(file);
  CHECK(back == rec);

  SECTION("one line per record") {
    std::ifstream in(file);
    std::string line;
    int lines = 0;
    while (std::getline(in, line))
      if (!line.empty()) ++lines;
    CHECK(lines == 1);
  }

  SECTION("unfinished episodes cannot be saved") {
    const ScenarioConfig sc;
    Environment env(sc);
    env.reset(1);
    CHECK_THROWS_AS(io::save_record(tmp / "x.json", env.record()), std::invalid_argument);
  }

  SECTION("missing and unknown fields are rejected") {
    io::json j = io::record_to_json(rec);
    j.erase("rewards");
    CHECK_THROWS_AS(io::record_from_json(j), std::invalid_argument);
    io::json extra = io::record_to_json(rec);
    extra["bonus"] = 1;
    CHECK_THROWS_AS(io::record_from_json(extra), std::invalid_argument);
  }
}

TEST_CASE("evaluation reports round trip exactly through JSON", "[io]") {
  const ScenarioConfig sc;
  EvalConfig ec;
  ec.n_flights = 6;
  ec.keep_flights = true;
  ec.threads = 1;
  FixedPath path;
  path.cells.assign(16, GridCell{2, 7});
  const EvalReport report = evaluate(Policy::fixed(path), ec, sc);

  TempDir tmp;
  const fs::path file = tmp / "report.json";
  io::save_report(file, report);
  const EvalReport back = io::load_report(file);
  CHECK(back == report);

  SECTION("flight lists are optional") {
    EvalConfig lean = ec;
    lean.keep_flights = false;
    const EvalReport no_flights = evaluate(Policy::fixed(path), lean, sc);
    io::save_report(file, no_flights);
    CHECK(io::load_report(file) == no_flights);
  }

  SECTION("tampered reports fail to parse") {
    io::json j = io::report_to_json(report);
    j["groups"]["path"]["extra"] = true;
    CHECK_THROWS_AS(io::report_from_json(j), std::invalid_argument);
    j = io::report_to_json(report);
    j.erase("config_hash");
    CHECK_THROWS_AS(io::report_from_json(j), std::invalid_argument);
  }
}

TEST_CASE("fixed-path files parse with comments and validate on use", "[io]") {
  std::istringstream in(
      "# serpentine\n"
      "3 5\n"
      "4 5  # eastward\n"
      "\n"
      "5 5\n");
  const FixedPath path = io::load_path(in);
  REQUIRE(path.cells.size() == 3);
  CHECK((path.cells[1] == GridCell{4, 5}));

  std::ostringstream out;
  io::save_path(out, path);
  std::istringstream again(out.str());
  CHECK(io::load_path(again).cells == path.cells);

  std::istringstream bad("3\n");
  CHECK_THROWS_AS(io::load_path(bad), std::runtime_error);
  std::istringstream trailing("3 5 7\n");
  CHECK_THROWS_AS(io::load_path(trailing), std::runtime_error);
}

TEST_CASE("policy files are sniffed by content", "[io]") {
  TempDir tmp;
  const fs::path table_file = tmp / "policy.qt";
  io::save_qtable(table_file, QTable(10, 10, 16));
  const Policy table_policy = io::load_policy(table_file);
  CHECK(table_policy.table() != nullptr);
  CHECK(table_policy.path() == nullptr);

  const fs::path path_file = tmp / "route.txt";
  std::ofstream(path_file) << "2 7\n2 7\n";
  const Policy path_policy = io::load_policy(path_file);
  CHECK(path_policy.path() != nullptr);
  CHECK(path_policy.path()->cells.size() == 2);
}

TEST_CASE("series CSVs round trip and reject junk", "[io]") {
  const std::vector<double> values = {-31.25, 0.125, 17.0, 1.0 / 3.0};
  std::ostringstream out;
  io::write_series_csv(out, values, "reward_sum", 4);

  std::istringstream in(out.str());
  const std::vector<double> back = io::read_series_csv(in);
  CHECK(back == values);

  CHECK(out.str().substr(0, out.str().find('\n')) == "episode,reward_sum");
  CHECK(out.str().find("4,-31.25") != std::string::npos);

  std::istringstream junk("episode,reward\n0,1.5\n1,abc\n");
  CHECK_THROWS_AS(io::read_series_csv(junk), std::runtime_error);
}

TEST_CASE("field and posterior CSVs carry their headers", "[io]") {
  const ScenarioConfig sc;
  std::ostringstream field_out;
  io::write_field_csv(field_out, dump_field(sc, 250.0));
  std::istringstream field_in(field_out.str());
  std::string header;
  std::getline(field_in, header);
  CHECK(header == "cx,cy,ppm");
  int rows = 0;
  std::string line;
  while (std::getline(field_in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 100);

  const EpisodeRecord rec = finished_record(23);
  std::ostringstream post_out;
  io::write_posterior_csv(post_out, dump_posterior(rec, 64));
  std::istringstream post_in(post_out.str());
  std::getline(post_in, header);
  CHECK(header == "# true_flux,250");
  std::getline(post_in, header);
  CHECK(header == "flux,prior_density,posterior_density");
}

TEST_CASE("ensemble dumps preserve fluxes", "[io]") {
  rng::Stream stream = rng::make_stream(12, 2);
  const FluxEnsemble e = sample_prior(LognormalParams::from_median_mode(100.0, 30.0), 50, stream);
  std::ostringstream out;
  io::write_ensemble(out, e);
  std::istringstream in(out.str());
  const FluxEnsemble back = io::read_ensemble(in);
  REQUIRE(back.size() == e.size());
  for (std::size_t i = 0; i < e.size(); ++i)
    CHECK_THAT(back.flux(i), Catch::Matchers::WithinRel(e.flux(i), 1e-14));

  std::istringstream bad("100\n-3\n");
  CHECK_THROWS_AS(io::read_ensemble(bad), std::runtime_error);
}
