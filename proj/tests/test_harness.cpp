#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "navguard/errors.hpp"
#include "navguard/harness.hpp"
#include "navguard/rng.hpp"
#include "util.hpp"

namespace fs = std::filesystem;
using namespace navguard;
using namespace navguard::harness;
using testutil::data_path;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
}

int run_cli(const std::string& args) {
  std::string cmd =
      std::string(NAVGUARD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

// Minimal well-formed run configuration for CLI subprocess tests.
std::string write_cli_config(const std::string& path, const std::string& alg,
                             const std::string& out_dir) {
  nlohmann::json j;
  j["world"] = {{"dt", 0.1}};
  j["sensing"] = {{"n_rays", 72}, {"obs_rays", 16}};
  j["classical"] = {{"dwa", nlohmann::json::object()}};
  j["td3"] = {{"trunk", {8}}, {"horizon_steps", 200}};
  j["supervisor"] = nlohmann::json::object();
  j["run"] = {{"scenario", data_path("scenarios/corridor.json")},
              {"algorithm", alg},
              {"seeds", {1, 2}},
              {"eval_steps", 400},
              {"out", out_dir}};
  spit(path, j.dump(2));
  return path;
}

rl::EpisodeRecord record(int ep, int steps, double reward) {
  rl::EpisodeRecord e;
  e.episode = ep;
  e.steps = steps;
  e.total_reward = reward;
  e.total_r_collision = -reward * 0.1;
  e.mse_dwa_pct = 1.25 * ep;
  e.critical_pct = 2.5;
  e.env_step_at_end = (ep + 1) * steps;
  return e;
}

}  // namespace

TEST_CASE("t_quantile reproduces standard table values") {
  CHECK(t_quantile(0.975, 1) == doctest::Approx(12.7062).epsilon(1e-4));
  CHECK(t_quantile(0.975, 4) == doctest::Approx(2.7764).epsilon(1e-4));
  CHECK(t_quantile(0.975, 10) == doctest::Approx(2.2281).epsilon(1e-4));
  CHECK(t_quantile(0.975, 100) == doctest::Approx(1.9840).epsilon(1e-4));
  CHECK(t_quantile(0.95, 10) == doctest::Approx(1.8125).epsilon(1e-4));
  CHECK_THROWS_AS(t_quantile(0.975, 0), InsufficientData);
}

TEST_CASE("summarize computes the mean and t-based half width") {
  MetricStat s = summarize({1.0, 3.0});
  CHECK(s.mean == doctest::Approx(2.0).epsilon(1e-12));
  // sd = sqrt(2), n = 2: half width = t(0.975, 1) * sd / sqrt(2) = t.
  CHECK(s.ci95 == doctest::Approx(12.7062).epsilon(1e-4));

  s = summarize({5.0, 5.0, 5.0, 5.0});
  CHECK(s.mean == doctest::Approx(5.0));
  CHECK(s.ci95 == doctest::Approx(0.0));

  CHECK_THROWS_AS(summarize({1.0}), InsufficientData);
  CHECK_THROWS_AS(summarize({}), InsufficientData);
}

TEST_CASE("aggregate_metrics summarizes every column") {
  std::vector<rl::EpisodeRecord> eps = {record(0, 100, 10.0),
                                        record(1, 200, 30.0)};
  MetricsRow row = aggregate_metrics(eps, "rl+dwa");
  CHECK(row.algorithm == "rl+dwa");
  CHECK(row.episodes == 2);
  CHECK(row.total_reward.mean == doctest::Approx(20.0));
  CHECK(row.timesteps.mean == doctest::Approx(150.0));
  CHECK(row.mse_dwa_pct.mean == doctest::Approx(0.625));
  CHECK(row.critical_pct.mean == doctest::Approx(2.5));
  CHECK(row.critical_pct.ci95 == doctest::Approx(0.0));
  CHECK_THROWS_AS(aggregate_metrics({record(0, 1, 0.0)}, "rl"),
                  InsufficientData);
}

TEST_CASE("run configuration survives a serialize/parse round trip") {
  RunConfig a = RunConfig::load(data_path("configs/accept.json"));
  const std::string tmp = "/tmp/navguard_cfg_roundtrip.json";
  spit(tmp, a.to_json());
  RunConfig b = RunConfig::load(tmp);
  CHECK(a.to_json() == b.to_json());
  CHECK(b.algorithm == a.algorithm);
  CHECK(b.seeds == a.seeds);
  CHECK(b.td3.total_steps == a.td3.total_steps);
  CHECK(b.trunk == a.trunk);
}

TEST_CASE("run configuration rejects malformed input") {
  CHECK_THROWS_AS(RunConfig::load("/tmp/navguard_missing.json"), ConfigError);
  const std::string tmp = "/tmp/navguard_cfg_bad.json";
  spit(tmp, "{not json");
  CHECK_THROWS_AS(RunConfig::load(tmp), ConfigError);
  spit(tmp, "{\"world\": {}}");  // missing sections
  CHECK_THROWS_AS(RunConfig::load(tmp), ConfigError);
  RunConfig good = RunConfig::load(data_path("configs/accept.json"));
  nlohmann::json j = nlohmann::json::parse(good.to_json());
  j["td3"]["reward_variant"] = "banana";
  spit(tmp, j.dump());
  CHECK_THROWS_AS(RunConfig::load(tmp), ConfigError);
}

TEST_CASE("network specs follow the encoder selection") {
  RunConfig cfg = RunConfig::load(data_path("configs/accept.json"));
  nn::NetworkSpec actor = cfg.actor_spec();
  CHECK(actor.encoder == nn::NetworkSpec::Encoder::kVector);
  CHECK(actor.vector_dim == cfg.env.obs_rays + 4);
  CHECK(actor.out_dim == 2);
  CHECK(actor.tanh_head);
  nn::NetworkSpec critic = cfg.critic_spec();
  CHECK(critic.vector_dim == actor.vector_dim + 2);
  CHECK(critic.out_dim == 1);
  CHECK_FALSE(critic.tanh_head);

  cfg.conv_encoder = true;
  actor = cfg.actor_spec();
  CHECK(actor.encoder == nn::NetworkSpec::Encoder::kConv);
  CHECK(actor.image_side == cfg.costmap_cells);
  CHECK(actor.aux_dim == 4);
  CHECK(cfg.critic_spec().aux_dim == 6);
}

TEST_CASE("episode log round trips through JSONL") {
  std::vector<rl::EpisodeRecord> eps = {record(0, 50, -12.5),
                                        record(1, 80, 4.25)};
  std::vector<std::vector<rl::StepLog>> steps(2);
  for (int e = 0; e < 2; e++)
    for (int t = 0; t < 3; t++)
      steps[e].push_back({{0.1f * t, -0.2f}, {0.0f, 0.0f}, -0.5, 1.0 + t, -1});

  const std::string path = "/tmp/navguard_episodes.jsonl";
  write_episode_log(path, eps, steps, true);
  std::vector<rl::EpisodeRecord> back = read_episode_log(path);
  REQUIRE(back.size() == 2);
  for (int e = 0; e < 2; e++) {
    CHECK(back[e].episode == eps[e].episode);
    CHECK(back[e].steps == eps[e].steps);
    CHECK(back[e].total_reward == eps[e].total_reward);
    CHECK(back[e].total_r_collision == eps[e].total_r_collision);
    CHECK(back[e].mse_dwa_pct == eps[e].mse_dwa_pct);
    CHECK(back[e].critical_pct == eps[e].critical_pct);
    CHECK(back[e].env_step_at_end == eps[e].env_step_at_end);
  }
  // Step lines precede each summary; 2 * (3 + 1) lines total.
  std::istringstream ss(slurp(path));
  int lines = 0;
  std::string line;
  while (std::getline(ss, line)) lines++;
  CHECK(lines == 8);
}

TEST_CASE("rolling_mean matches a windowed oracle") {
  std::vector<double> constant(20, 3.5);
  for (double v : rolling_mean(constant, 5)) CHECK(v == doctest::Approx(3.5));

  Rng rng(19);
  std::vector<double> xs(37);
  for (double& v : xs) v = rng.uniform(-10, 10);
  for (int window : {1, 4, 50}) {
    std::vector<double> rm = rolling_mean(xs, window);
    REQUIRE(rm.size() == xs.size());
    for (size_t i = 0; i < xs.size(); i++) {
      size_t lo = i + 1 >= static_cast<size_t>(window) ? i + 1 - window : 0;
      double acc = 0.0;
      for (size_t k = lo; k <= i; k++) acc += xs[k];
      CHECK(rm[i] == doctest::Approx(acc / (i - lo + 1)).epsilon(1e-12));
    }
  }
}

TEST_CASE("export_plot_data appends the rolling reward column") {
  std::vector<rl::EpisodeRecord> eps;
  for (int e = 0; e < 7; e++) eps.push_back(record(e, 10 + e, e * 2.0));
  const std::string curve = "/tmp/navguard_curve.csv";
  const std::string plot = "/tmp/navguard_plot.csv";
  write_training_curve_csv(curve, eps);
  export_plot_data(curve, plot, 3);

  std::istringstream ss(slurp(plot));
  std::string header;
  std::getline(ss, header);
  CHECK(header ==
        "episode,steps,total_reward,total_r_collision,mse_dwa_pct,"
        "critical_pct,env_step_at_end,reward_rolling_mean");
  std::vector<double> rewards, rolling;
  std::string line;
  while (std::getline(ss, line)) {
    std::istringstream ls(line);
    std::string f;
    std::vector<std::string> fields;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    REQUIRE(fields.size() == 8);
    rewards.push_back(std::stod(fields[2]));
    rolling.push_back(std::stod(fields[7]));
  }
  std::vector<double> expect = rolling_mean(rewards, 3);
  REQUIRE(rolling.size() == expect.size());
  for (size_t i = 0; i < rolling.size(); i++)
    CHECK(rolling[i] == doctest::Approx(expect[i]).epsilon(1e-9));

  // Header-only input stays header-only.
  spit(curve, "episode,steps,total_reward\n");
  export_plot_data(curve, plot, 3);
  CHECK(slurp(plot) == "episode,steps,total_reward,reward_rolling_mean\n");
}

TEST_CASE("algorithm names round trip") {
  for (Algorithm a : {Algorithm::kDwa, Algorithm::kRl, Algorithm::kRlDwa,
                      Algorithm::kRlDwaSupervisor})
    CHECK(algorithm_from_name(algorithm_name(a)) == a);
  CHECK_THROWS_AS(algorithm_from_name("sarsa"), ConfigError);
}

TEST_CASE("cli rejects bad invocations with exit code 2") {
  CHECK(run_cli("") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("evaluate") == 2);  // --config missing
  CHECK(run_cli("evaluate --config /tmp/navguard_nope.json") == 2);
  CHECK(run_cli("evaluate --bogus x") == 2);
  CHECK(run_cli("replay") == 2);
}

TEST_CASE("cli evaluate is byte-identical across reruns and replays cleanly") {
  const std::string cfg = "/tmp/navguard_cli_eval.json";
  fs::remove_all("/tmp/navguard_cli_out_a");
  fs::remove_all("/tmp/navguard_cli_out_b");
  write_cli_config(cfg, "dwa", "/tmp/navguard_cli_out_a");
  REQUIRE(run_cli("evaluate --config " + cfg) == 0);
  REQUIRE(run_cli("evaluate --config " + cfg + " --out /tmp/navguard_cli_out_b") == 0);
  std::string a = slurp("/tmp/navguard_cli_out_a/metrics.csv");
  std::string b = slurp("/tmp/navguard_cli_out_b/metrics.csv");
  CHECK(a == b);
  CHECK(a.substr(0, 9) == "algorithm");
  std::string log_a = "/tmp/navguard_cli_out_a/dwa/seed_1/episodes.jsonl";
  std::string log_b = "/tmp/navguard_cli_out_b/dwa/seed_1/episodes.jsonl";
  CHECK(slurp(log_a) == slurp(log_b));

  // A consistent log replays with exit 0.
  CHECK(run_cli("replay " + log_a) == 0);

  // A truncated copy fails with exit 1.
  std::string body = slurp(log_a);
  spit("/tmp/navguard_cli_trunc.jsonl", body.substr(0, body.size() * 2 / 3));
  CHECK(run_cli("replay /tmp/navguard_cli_trunc.jsonl") == 1);

  // export-metrics aggregates what evaluate wrote.
  CHECK(run_cli("export-metrics --config " + cfg) == 0);
  std::string merged = slurp("/tmp/navguard_cli_out_a/metrics.csv");
  CHECK(merged.find("dwa,") != std::string::npos);
}
