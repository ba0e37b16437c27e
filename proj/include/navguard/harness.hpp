#pragma once

#include <optional>
#include <string>
#include <vector>

#include "navguard/nn.hpp"
#include "navguard/rl.hpp"
#include "navguard/supervisor.hpp"
#include "navguard/world.hpp"

namespace navguard::harness {

enum class Algorithm { kDwa, kRl, kRlDwa, kRlDwaSupervisor };

std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& s);

struct RunConfig {
  std::string scenario_path;
  Algorithm algorithm = Algorithm::kRlDwa;
  world::WorldParams world;
  rl::EnvConfig env;
  rl::TD3Config td3;
  nn::AdamConfig adam;
  std::vector<int> trunk = {64, 64};
  bool conv_encoder = false;
  int costmap_cells = 60;
  std::vector<nn::ConvSpec> conv;
  supervisor::FuzzyParams fuzzy;
  bool hysteresis = true;
  supervisor::Nsga2Config nsga;
  supervisor::GenomeEvalConfig genome_eval;
  std::vector<uint64_t> seeds = {0};
  int eval_steps = 10000;
  std::string out_dir = "out";
  std::string checkpoint;      // policy for evaluate / tune-supervisor
  bool log_steps = true;       // per-step JSONL
  bool log_costmap = false;    // include the costmap in step logs

  static RunConfig load(const std::string& path);  // throws ConfigError
  std::string to_json() const;

  nn::NetworkSpec actor_spec() const;
  nn::NetworkSpec critic_spec() const;
  world::Scenario load_scenario() const;
  rl::NavEnv make_env() const;
};

// Per-metric mean and 95% half-width (Student t over per-episode values).
struct MetricStat {
  double mean = 0.0;
  double ci95 = 0.0;
};

struct MetricsRow {
  std::string algorithm;
  int episodes = 0;
  MetricStat total_reward;
  MetricStat total_r_collision;
  MetricStat timesteps;
  MetricStat mse_dwa_pct;
  MetricStat critical_pct;
};

// Student t distribution quantile (two-sided 95% uses p = 0.975).
double t_quantile(double p, int dof);

MetricStat summarize(const std::vector<double>& values);

// Aggregates per-episode records; throws InsufficientData below 2 episodes.
MetricsRow aggregate_metrics(const std::vector<rl::EpisodeRecord>& episodes,
                             const std::string& algorithm);

// Reads records back from an episode JSONL log (summary lines).
std::vector<rl::EpisodeRecord> read_episode_log(const std::string& path);

void write_episode_log(const std::string& path,
                       const std::vector<rl::EpisodeRecord>& episodes,
                       const std::vector<std::vector<rl::StepLog>>& steps,
                       bool include_steps);

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricsRow>& rows);

void write_training_curve_csv(const std::string& path,
                              const std::vector<rl::EpisodeRecord>& episodes);

// Tidy per-episode curve with a rolling mean (window 50) appended.
void export_plot_data(const std::string& training_csv,
                      const std::string& out_csv, int window = 50);

std::vector<double> rolling_mean(const std::vector<double>& xs, int window);

// CLI entry point: train / evaluate / tune-supervisor / replay / export-metrics.
// Exit codes: 0 success, 2 config error, 1 runtime failure.
int cli_dispatch(int argc, const char* const* argv);

}  // namespace navguard::harness
