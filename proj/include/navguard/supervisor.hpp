#pragma once

#include <array>
#include <functional>
#include <vector>

#include "navguard/rl.hpp"

namespace navguard::supervisor {

// Gaussian membership centers are fixed; only the spreads are tuned.
struct FuzzyParams {
  static constexpr double kCenterVLow = 0.0;   // m/s
  static constexpr double kCenterVHigh = 1.5;  // m/s
  static constexpr double kCenterRSmall = 0.0; // m
  static constexpr double kCenterRBig = 1.3;   // m
  static constexpr double kSigmaMin = 0.05;
  static constexpr double kSigmaMax = 3.0;

  double sigma_v_low = 0.5;
  double sigma_v_high = 0.5;
  double sigma_r_small = 0.5;
  double sigma_r_big = 0.5;
};

enum class Policy { kNeural = 0, kSafe = 1, kBackoff = 2 };

struct SupervisorState {
  Policy active_policy = Policy::kNeural;
  int switch_count = 0;
  int critical_count = 0;
  int hysteresis_ticks = 0;
  bool hysteresis_enabled = true;
};

constexpr double kBackoffDistance = 0.3;   // m, hard reflex threshold
constexpr double kCriticalDistance = 0.3;  // m
constexpr int kHysteresisTicks = 5;

// Zero-order Takagi-Sugeno defuzzification over the two rules:
// radius = (mu_low * 0 + mu_high * 1.3) / (mu_low + mu_high).
double fuzzy_radius(double v, const FuzzyParams& params);

// Rule evaluation plus switch/critical bookkeeping. Never returns kNeural
// below the hard threshold.
Policy supervise_step(double obstacle_distance, double v,
                      const FuzzyParams& params, SupervisorState& state);

// The four tuned spreads, in FuzzyParams field order.
using Genome = std::array<double, 4>;

FuzzyParams genome_params(const Genome& g);

struct Objectives {
  double switches = 0.0;   // mean per episode, minimized
  double criticals = 0.0;  // mean per episode, minimized
};

bool dominates(const Objectives& a, const Objectives& b);

struct GenomeEvalConfig {
  int episodes_per_seed = 2;
  std::vector<uint64_t> seeds = {1, 2};
  double action_noise = 0.1;  // "randomized actions" scale
  int horizon = 300;
};

// Runs supervised episodes with the frozen policy and noise-augmented
// actions; deterministic for a fixed seed set.
Objectives evaluate_genome(const Genome& genome, const nn::PolicyBundle& bundle,
                           rl::NavEnv& env, const GenomeEvalConfig& cfg);

struct Individual {
  Genome genome;
  Objectives objectives;
  int rank = 0;
  double crowding = 0.0;
};

struct Nsga2Config {
  int population_size = 16;
  int generations = 16;
  double eta_crossover = 15.0;
  double eta_mutation = 20.0;
  double mutation_prob = 0.25;  // per gene
  double lo = FuzzyParams::kSigmaMin;
  double hi = FuzzyParams::kSigmaMax;
};

struct GenerationStats {
  int generation = 0;
  double switches_mean = 0.0;
  double criticals_mean = 0.0;
  std::vector<Individual> population;
};

using GenomeEvaluator = std::function<Objectives(const Genome&)>;

struct Nsga2Result {
  std::vector<Individual> front;  // first non-dominated front
  std::vector<GenerationStats> history;
};

// Standard NSGA-II: fast non-dominated sort, crowding distance, binary
// tournament, SBX crossover, polynomial mutation, elitist selection.
Nsga2Result nsga2_run(const Nsga2Config& cfg, const GenomeEvaluator& eval,
                      uint64_t seed, bool parallel_eval = true);

// Exposed for tests.
void non_dominated_sort(std::vector<Individual>& pop);
void crowding_distance(std::vector<Individual*>& front);

}  // namespace navguard::supervisor
