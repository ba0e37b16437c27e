#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "navguard/errors.hpp"
#include "navguard/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace navguard::harness {

namespace {

constexpr const char* kUsage =
    "usage: navguard <subcommand> [options]\n"
    "\n"
    "subcommands:\n"
    "  train            train a policy (algorithm from the config)\n"
    "  evaluate         run a frozen policy and write metrics\n"
    "  tune-supervisor  NSGA-II search over the fuzzy spreads\n"
    "  replay <log>     recompute metrics from an episode log\n"
    "  export-metrics   aggregate logs under the output directory\n"
    "\n"
    "options:\n"
    "  --config <file>  run configuration (JSON)\n"
    "  --seed <n>       override the config's seed list with one seed\n"
    "  --out <dir>      override the output directory\n";

struct CliArgs {
  std::string config_path;
  std::string positional;
  std::optional<uint64_t> seed;
  std::optional<std::string> out;
};

CliArgs parse_args(int argc, const char* const* argv, int first) {
  CliArgs a;
  for (int i = first; i < argc; i++) {
    std::string arg = argv[i];
    auto need_value = [&](const char* flag) -> std::string {
      if (i + 1 >= argc)
        throw ConfigError(std::string(flag) + " requires a value");
      return argv[++i];
    };
    if (arg == "--config")
      a.config_path = need_value("--config");
    else if (arg == "--seed")
      a.seed = std::stoull(need_value("--seed"));
    else if (arg == "--out")
      a.out = need_value("--out");
    else if (!arg.empty() && arg[0] == '-')
      throw ConfigError("unknown option '" + arg + "'");
    else if (a.positional.empty())
      a.positional = arg;
    else
      throw ConfigError("unexpected argument '" + arg + "'");
  }
  return a;
}

RunConfig load_config(const CliArgs& a) {
  if (a.config_path.empty()) throw ConfigError("--config is required");
  RunConfig cfg = RunConfig::load(a.config_path);
  if (a.seed) cfg.seeds = {*a.seed};
  if (a.out) cfg.out_dir = *a.out;
  if (cfg.seeds.empty()) throw ConfigError("config has an empty seed list");
  return cfg;
}

// Accepts either a checkpoint file or a directory containing policy.ckpt.
std::string resolve_checkpoint(const std::string& path) {
  if (path.empty()) throw ConfigError("a checkpoint path is required");
  if (fs::is_directory(path)) return (fs::path(path) / "policy.ckpt").string();
  return path;
}

std::string seed_dir(const RunConfig& cfg, uint64_t seed) {
  fs::path p = fs::path(cfg.out_dir) / algorithm_name(cfg.algorithm) /
               ("seed_" + std::to_string(seed));
  fs::create_directories(p);
  return p.string();
}

int cmd_train(const CliArgs& args) {
  RunConfig cfg = load_config(args);
  if (cfg.algorithm == Algorithm::kDwa)
    throw ConfigError("the dwa algorithm has no trainable policy");

  rl::TD3Config td3 = cfg.td3;
  if (cfg.algorithm == Algorithm::kRl) {
    // Plain TD3: no expert seeding, no regularization, random warmup.
    td3.seed_steps = 0;
    td3.lambda_reg = 0.0;
    if (td3.warmup_steps <= 0) td3.warmup_steps = 1000;
  }
  td3.validate();

  for (uint64_t seed : cfg.seeds) {
    rl::NavEnv env = cfg.make_env();
    rl::TrainResult result = rl::train(env, td3, cfg.actor_spec(),
                                       cfg.critic_spec(), cfg.adam, seed);
    std::string dir = seed_dir(cfg, seed);
    nn::save_checkpoint(result.bundle, dir + "/policy.ckpt");
    write_training_curve_csv(dir + "/training_curve.csv", result.episodes);
    write_episode_log(dir + "/episodes.jsonl", result.episodes, {}, false);
    export_plot_data(dir + "/training_curve.csv", dir + "/plot_data.csv");
    std::cout << "trained " << algorithm_name(cfg.algorithm) << " seed " << seed
              << ": " << result.episodes.size() << " episodes -> " << dir
              << "\n";
  }
  return 0;
}

int cmd_evaluate(const CliArgs& args) {
  RunConfig cfg = load_config(args);

  nn::PolicyBundle bundle =
      cfg.algorithm == Algorithm::kDwa
          ? nn::PolicyBundle::make(cfg.actor_spec(), cfg.critic_spec(),
                                   cfg.adam, 0)
          : nn::load_checkpoint(resolve_checkpoint(cfg.checkpoint));

  rl::EvalOptions opt;
  switch (cfg.algorithm) {
    case Algorithm::kDwa: opt.source = rl::PolicySource::kDwa; break;
    case Algorithm::kRl:
    case Algorithm::kRlDwa: opt.source = rl::PolicySource::kNeural; break;
    case Algorithm::kRlDwaSupervisor:
      opt.source = rl::PolicySource::kNeuralSupervised;
      break;
  }
  opt.n_steps = cfg.eval_steps;
  opt.horizon_steps = cfg.td3.horizon_steps;
  opt.fuzzy = {cfg.fuzzy.sigma_v_low, cfg.fuzzy.sigma_v_high,
               cfg.fuzzy.sigma_r_small, cfg.fuzzy.sigma_r_big};
  opt.hysteresis = cfg.hysteresis;

  std::vector<rl::EpisodeRecord> all;
  for (uint64_t seed : cfg.seeds) {
    rl::NavEnv env = cfg.make_env();
    rl::EvalResult res = rl::evaluate_policy(bundle, env, opt, seed);
    std::string dir = seed_dir(cfg, seed);
    write_episode_log(dir + "/episodes.jsonl", res.episodes, res.step_logs,
                      cfg.log_steps);
    for (rl::EpisodeRecord e : res.episodes) {
      e.episode = static_cast<int>(all.size());
      all.push_back(e);
    }
  }
  MetricsRow row = aggregate_metrics(all, algorithm_name(cfg.algorithm));
  fs::create_directories(cfg.out_dir);
  write_metrics_csv(cfg.out_dir + "/metrics.csv", {row});
  std::printf("%s: reward %.3f +- %.3f, mse %.2f%%, critical %.2f%% (%d ep)\n",
              row.algorithm.c_str(), row.total_reward.mean,
              row.total_reward.ci95, row.mse_dwa_pct.mean,
              row.critical_pct.mean, row.episodes);
  return 0;
}

int cmd_tune_supervisor(const CliArgs& args) {
  RunConfig cfg = load_config(args);
  nn::PolicyBundle bundle =
      nn::load_checkpoint(resolve_checkpoint(cfg.checkpoint));
  world::Scenario scenario = cfg.load_scenario();

  // Each call gets a private env copy so parallel evaluation is safe.
  rl::NavEnv proto(scenario, cfg.env);
  auto eval = [&](const supervisor::Genome& g) {
    rl::NavEnv env = proto;
    return supervisor::evaluate_genome(g, bundle, env, cfg.genome_eval);
  };
  supervisor::Nsga2Result result =
      supervisor::nsga2_run(cfg.nsga, eval, cfg.seeds.front());

  fs::create_directories(cfg.out_dir);
  {
    std::ofstream out(cfg.out_dir + "/evolution.csv");
    out << "generation,switches_mean,criticals_mean\n";
    for (const supervisor::GenerationStats& g : result.history) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g\n", g.generation,
                    g.switches_mean, g.criticals_mean);
      out << buf;
    }
  }
  {
    json front = json::array();
    for (const supervisor::Individual& ind : result.front) {
      front.push_back({{"sigmas", ind.genome},
                       {"switches", ind.objectives.switches},
                       {"criticals", ind.objectives.criticals}});
    }
    std::ofstream out(cfg.out_dir + "/front.json");
    out << front.dump(2) << "\n";
  }
  std::cout << "pareto front: " << result.front.size() << " members -> "
            << cfg.out_dir << "/front.json\n";
  return 0;
}

int cmd_replay(const CliArgs& args) {
  if (args.positional.empty()) throw ConfigError("replay requires a log path");
  std::ifstream in(args.positional);
  if (!in) throw ConfigError("cannot open log file: " + args.positional);

  // Recompute per-episode totals from step lines and check them against the
  // logged summaries. A malformed line aborts with the last valid line.
  double reward = 0.0, sq = 0.0;
  int steps = 0, criticals = 0, checked = 0;
  int line_no = 0, last_valid = 0;
  bool mismatch = false;
  std::string line;
  while (std::getline(in, line)) {
    line_no++;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      if (j.contains("episode_summary")) {
        const json& s = j["episode_summary"];
        if (steps > 0) {
          double mse = sq / steps / 4.0 * 100.0;
          double crit = 100.0 * criticals / steps;
          if (std::abs(reward - s.at("total_reward").get<double>()) > 1e-6 ||
              std::abs(mse - s.at("mse_dwa_pct").get<double>()) > 1e-6 ||
              std::abs(crit - s.at("critical_pct").get<double>()) > 1e-6) {
            std::cerr << "episode " << s.at("episode")
                      << ": recomputed metrics disagree with the summary\n";
            mismatch = true;
          }
          checked++;
        }
        reward = sq = 0.0;
        steps = criticals = 0;
      } else {
        reward += j.at("r").get<double>();
        for (int k = 0; k < 2; k++) {
          double d = j.at("a")[k].get<double>() - j.at("a_e")[k].get<double>();
          sq += 0.5 * d * d;
        }
        if (j.at("dist").get<double>() < 0.3) criticals++;
        steps++;
      }
      last_valid = line_no;
    } catch (const json::exception&) {
      std::cerr << "truncated or corrupt log at line " << line_no
                << "; last valid line " << last_valid << "\n";
      return 1;
    }
  }
  if (steps > 0) {
    std::cerr << "log ends mid-episode; last valid line " << last_valid << "\n";
    return 1;
  }
  std::cout << "replayed " << checked << " episodes with step data; "
            << (mismatch ? "MISMATCH" : "consistent") << "\n";
  return mismatch ? 1 : 0;
}

int cmd_export_metrics(const CliArgs& args) {
  RunConfig cfg = load_config(args);
  if (!fs::is_directory(cfg.out_dir))
    throw ConfigError("output directory not found: " + cfg.out_dir);

  std::vector<MetricsRow> rows;
  std::vector<std::string> algs;
  for (const auto& alg_entry : fs::directory_iterator(cfg.out_dir))
    if (alg_entry.is_directory()) algs.push_back(alg_entry.path().string());
  std::sort(algs.begin(), algs.end());

  for (const std::string& alg_dir : algs) {
    std::vector<rl::EpisodeRecord> all;
    std::vector<std::string> seeds;
    for (const auto& seed_entry : fs::directory_iterator(alg_dir))
      if (seed_entry.is_directory()) seeds.push_back(seed_entry.path().string());
    std::sort(seeds.begin(), seeds.end());
    for (const std::string& sd : seeds) {
      std::string log = sd + "/episodes.jsonl";
      if (!fs::exists(log) && !fs::exists(log + ".gz")) continue;
      for (rl::EpisodeRecord e : read_episode_log(log)) {
        e.episode = static_cast<int>(all.size());
        all.push_back(e);
      }
      std::string curve = sd + "/training_curve.csv";
      if (fs::exists(curve)) export_plot_data(curve, sd + "/plot_data.csv");
    }
    if (all.size() >= 2)
      rows.push_back(
          aggregate_metrics(all, fs::path(alg_dir).filename().string()));
  }
  if (rows.empty())
    throw InsufficientData("no episode logs found under " + cfg.out_dir);
  write_metrics_csv(cfg.out_dir + "/metrics.csv", rows);
  std::cout << "wrote " << cfg.out_dir << "/metrics.csv (" << rows.size()
            << " algorithms)\n";
  return 0;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv) {
  try {
    if (argc < 2) {
      std::cerr << kUsage;
      return 2;
    }
    std::string sub = argv[1];
    CliArgs args = parse_args(argc, argv, 2);
    if (sub == "train") return cmd_train(args);
    if (sub == "evaluate") return cmd_evaluate(args);
    if (sub == "tune-supervisor") return cmd_tune_supervisor(args);
    if (sub == "replay") return cmd_replay(args);
    if (sub == "export-metrics") return cmd_export_metrics(args);
    std::cerr << "unknown subcommand '" << sub << "'\n" << kUsage;
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidScenario& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace navguard::harness
