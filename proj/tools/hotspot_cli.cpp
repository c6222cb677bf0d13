// Command-line front end: train / eval / simulate / dump-field /
// dump-posterior / curve. Every command is deterministic given its arguments
// and config file.

#include <cstdint>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hotspot/hotspot.hpp"

namespace {

using namespace hotspot;

GridCell resolve_start(const std::string& s, const ScenarioConfig& sc) {
  if (s == "upwind" || s == "downwind" || s == "crosswind") return canonical_starts(sc).at(s);
  std::istringstream ss(s);
  int cx = 0, cy = 0;
  char comma = 0;
  if (!(ss >> cx >> comma >> cy) || comma != ',' || !(ss >> std::ws).eof())
    throw std::invalid_argument("bad start '" + s +
                                "' (expected upwind, downwind, crosswind or cx,cy)");
  return {cx, cy};
}

io::ConfigBundle load_bundle(const std::string& config_path) {
  if (config_path.empty()) return {};
  return io::load_config(config_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Drone-based greenhouse-gas hotspot quantification toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (defaults used when absent)")
      ->check(CLI::ExistingFile);

  // train ---------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "Q-learning training run");
  std::string train_reward = "neg-crps";
  std::uint64_t train_episodes = 0;
  std::uint64_t train_seed = 0;
  std::uint64_t checkpoint_every = 0;
  std::string train_out;
  std::string rewards_out;
  train_cmd->add_option("--reward", train_reward, "neg-crps | kl | neg-entropy");
  train_cmd->add_option("--episodes", train_episodes, "number of training episodes");
  train_cmd->add_option("--seed", train_seed, "master seed");
  train_cmd->add_option("--checkpoint-every", checkpoint_every,
                        "write <out>.ckpt<N> every N episodes");
  train_cmd->add_option("--out", train_out, "output Q-table file")->required();
  train_cmd->add_option("--rewards-out", rewards_out,
                        "optional CSV of raw per-episode reward sums");
  train_cmd->callback([&] {
    io::ConfigBundle bundle = load_bundle(config_path);
    if (train_cmd->count("--reward")) bundle.train.reward_kind = parse_reward_kind(train_reward);
    if (train_cmd->count("--episodes")) bundle.train.episodes = train_episodes;
    if (train_cmd->count("--seed")) bundle.train.seed = train_seed;
    if (train_cmd->count("--checkpoint-every")) bundle.train.checkpoint_every = checkpoint_every;
    CheckpointFn checkpoint;
    if (bundle.train.checkpoint_every > 0)
      checkpoint = [&](std::uint64_t done, const QTable& q) {
        io::save_qtable(train_out + ".ckpt" + std::to_string(done), q);
      };
    const TrainResult result = train(bundle.train, bundle.scenario, checkpoint);
    io::save_qtable(train_out, result.table);
    if (!rewards_out.empty()) {
      std::ofstream out = io::open_output(rewards_out);
      io::write_series_csv(out, result.episode_rewards, "reward_sum");
    }
    const std::size_t tail_n = std::min<std::size_t>(result.episode_rewards.size(), 1000);
    const auto tail = mean_sd(std::span(result.episode_rewards).last(tail_n));
    std::cout << "trained " << bundle.train.episodes << " episodes ("
              << to_string(bundle.train.reward_kind) << "), tail mean reward "
              << tail.first << ", table -> " << train_out << '\n';
  });

  // eval ----------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "Monte Carlo policy evaluation");
  std::string eval_policy;
  std::uint64_t eval_flights = 0;
  double eval_flux = 0.0;
  std::uint64_t eval_seed = 0;
  std::vector<std::string> eval_starts;
  bool keep_flights = false;
  int eval_threads = 0;
  std::string eval_out;
  eval_cmd->add_option("--policy", eval_policy, "Q-table or fixed-path file")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--flights", eval_flights, "flights per start group");
  eval_cmd->add_option("--flux", eval_flux, "true flux for every flight");
  eval_cmd->add_option("--start", eval_starts,
                       "upwind | downwind | crosswind | cx,cy (repeatable; "
                       "default: all canonical starts)");
  eval_cmd->add_option("--seed", eval_seed, "master seed");
  eval_cmd->add_flag("--keep-flights", keep_flights, "retain per-flight CRPS in the report");
  eval_cmd->add_option("--threads", eval_threads, "worker threads (0 = hardware)");
  eval_cmd->add_option("--out", eval_out, "output report file")->required();
  eval_cmd->callback([&] {
    io::ConfigBundle bundle = load_bundle(config_path);
    if (eval_cmd->count("--flights")) bundle.eval.n_flights = eval_flights;
    if (eval_cmd->count("--flux")) bundle.eval.true_flux = eval_flux;
    if (eval_cmd->count("--seed")) bundle.eval.seed = eval_seed;
    if (eval_cmd->count("--threads")) bundle.eval.threads = eval_threads;
    if (keep_flights) bundle.eval.keep_flights = true;
    if (!eval_starts.empty()) {
      bundle.eval.starts.clear();
      for (const std::string& s : eval_starts)
        bundle.eval.starts.emplace(s, resolve_start(s, bundle.scenario));
    }
    const Policy policy = io::load_policy(eval_policy);
    const EvalReport report = evaluate(policy, bundle.eval, bundle.scenario);
    io::save_report(eval_out, report);
    for (const auto& [name, group] : report.groups)
      std::cout << name << ": mean CRPS " << group.mean_crps << ", sd " << group.sd_crps
                << " over " << group.n_flights << " flights\n";
    std::cout << "report -> " << eval_out << '\n';
  });

  // simulate ------------------------------------------------------------
  auto* sim_cmd = app.add_subcommand("simulate", "single-episode rollout with full record");
  std::string sim_policy;
  std::uint64_t sim_seed = 0;
  double sim_flux = 0.0;
  std::string sim_start;
  std::string sim_reward = "neg-crps";
  std::string sim_out;
  sim_cmd->add_option("--policy", sim_policy, "Q-table or fixed-path file")
      ->required()
      ->check(CLI::ExistingFile);
  sim_cmd->add_option("--seed", sim_seed, "episode seed");
  sim_cmd->add_option("--flux", sim_flux, "override the scenario's flux draw");
  sim_cmd->add_option("--start", sim_start, "override the random edge start");
  sim_cmd->add_option("--reward", sim_reward, "reward recorded per step");
  sim_cmd->add_option("--out", sim_out, "output record file")->required();
  sim_cmd->callback([&] {
    io::ConfigBundle bundle = load_bundle(config_path);
    ResetOverrides overrides;
    if (sim_cmd->count("--flux")) overrides.true_flux = sim_flux;
    if (sim_cmd->count("--start"))
      overrides.start_cell = resolve_start(sim_start, bundle.scenario);
    const Policy policy = io::load_policy(sim_policy);
    const EpisodeRecord record = greedy_rollout(
        policy, bundle.scenario, parse_reward_kind(sim_reward), overrides, sim_seed);
    io::save_record(sim_out, record);
    std::cout << "true flux " << record.true_flux << ", final CRPS " << record.final_crps
              << ", posterior median " << record.final_posterior.median() << ", record -> "
              << sim_out << '\n';
  });

  // dump-field ----------------------------------------------------------
  auto* field_cmd = app.add_subcommand("dump-field", "noise-free concentration field CSV");
  double field_flux = 250.0;
  std::string field_out;
  field_cmd->add_option("--flux", field_flux, "surface flux of the hotspot cell");
  field_cmd->add_option("--out", field_out, "output CSV")->required();
  field_cmd->callback([&] {
    io::ConfigBundle bundle = load_bundle(config_path);
    std::ofstream out = io::open_output(field_out);
    io::write_field_csv(out, dump_field(bundle.scenario, field_flux));
    std::cout << "field -> " << field_out << '\n';
  });

  // dump-posterior --------------------------------------------------------
  auto* post_cmd = app.add_subcommand("dump-posterior",
                                      "prior/posterior densities from an episode record");
  std::string post_record;
  std::size_t post_points = 512;
  std::string post_out;
  post_cmd->add_option("--record", post_record, "episode record file")
      ->required()
      ->check(CLI::ExistingFile);
  post_cmd->add_option("--points", post_points, "flux grid resolution");
  post_cmd->add_option("--out", post_out, "output CSV")->required();
  post_cmd->callback([&] {
    const EpisodeRecord record = io::load_record(post_record);
    std::ofstream out = io::open_output(post_out);
    io::write_posterior_csv(out, dump_posterior(record, post_points));
    std::cout << "posterior -> " << post_out << '\n';
  });

  // curve -----------------------------------------------------------------
  auto* curve_cmd = app.add_subcommand("curve", "smooth + normalise a training curve");
  std::string curve_in;
  std::size_t curve_window = 1000;
  std::string curve_out;
  curve_cmd->add_option("--in", curve_in, "raw per-episode reward CSV")
      ->required()
      ->check(CLI::ExistingFile);
  curve_cmd->add_option("--window", curve_window, "trailing moving-average window");
  curve_cmd->add_option("--out", curve_out, "output CSV")->required();
  curve_cmd->callback([&] {
    std::ifstream in = io::open_input(curve_in);
    const std::vector<double> raw = io::read_series_csv(in);
    const std::vector<double> smoothed = postprocess_curve(raw, curve_window);
    std::ofstream out = io::open_output(curve_out);
    io::write_series_csv(out, smoothed, "normalized_reward", curve_window - 1);
    std::cout << "curve -> " << curve_out << " (" << smoothed.size() << " points)\n";
  });

  try {
    CLI11_PARSE(app, argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
