#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "navguard/classical.hpp"
#include "navguard/nn.hpp"
#include "navguard/sensing.hpp"
#include "navguard/world.hpp"

namespace navguard::rl {

using Action = std::array<float, 2>;  // normalized (v, w) in [-1, 1]^2

struct Transition {
  std::vector<float> s;
  Action a;
  Action a_e;
  float r;
  std::vector<float> s_next;
  bool done;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity) : capacity_(capacity) {}
  void push(Transition t);
  const Transition& sample(Rng& rng) const;
  size_t size() const { return ring_.size(); }
  size_t capacity() const { return capacity_; }

 private:
  size_t capacity_;
  size_t head_ = 0;  // next overwrite position once full
  std::vector<Transition> ring_;
};

struct TD3Config {
  double gamma = 0.99;
  double tau_soft = 0.005;
  double sigma_explore = 0.1;  // normalized action units
  double sigma_target = 0.2;
  double clip_c = 0.5;
  int policy_delay = 2;
  int batch_N = 256;
  double lambda_reg = 1.0;
  int seed_steps = 5000;    // expert-seeded transitions (E2TD3)
  int warmup_steps = 0;     // random-action warmup (plain TD3)
  int total_steps = 30000;
  int horizon_steps = 400;
  size_t buffer_capacity = 200000;

  void validate() const;  // throws ConfigError
};

struct RewardConfig {
  enum class Variant { kDense, kSparse };
  Variant variant = Variant::kSparse;
  double r_timestep = -0.5;
  double collision_dist = 0.5;   // m
  double waypoint_bonus = 10.0;  // sparse variant
  double waypoint_margin = 0.3;  // m
  bool signed_progress = true;   // false: literal absolute-value form
};

// Affine bijection between normalized actions and twists:
// v in [0, v_max], w in [-w_max, w_max].
Twist action_denormalize(const Action& a, const world::RobotLimits& lim);
Action action_normalize(const Twist& t, const world::RobotLimits& lim);

double compute_reward(const world::WorldState& prev, const Twist& cmd,
                      const world::WorldState& next, const Vec2& waypoint,
                      bool waypoint_reached, const RewardConfig& cfg);

// Environment wrapper: world stepping, sensing, global-path and waypoint
// management, reward computation. One instance per episode stream.
struct EnvConfig {
  int n_rays = 72;
  double max_range = 6.0;
  int obs_rays = 16;           // ray-vector downsample bins
  double waypoint_lookahead = 2.0;
  double plan_margin = 0.1;      // extra path inflation beyond the radius
  double safe_lookahead = 0.3;   // pure-pursuit waypoint spacing
  double safe_speed = 0.5;       // m/s
  double goal_margin = 0.4;      // m, episode ends inside this of the goal
  int replan_period = 20;        // ticks
  double replan_stray = 1.0;     // m off the path forces a replan
  classical::DwaConfig dwa;
  RewardConfig reward;
};

class NavEnv {
 public:
  NavEnv(world::Scenario scenario, EnvConfig cfg);

  void reset(uint64_t seed);

  // Executes one tick with the given twist. Returns the reward.
  struct StepInfo {
    double reward = 0.0;
    bool done = false;
    bool reached_goal = false;
    bool collided = false;
    bool waypoint_reached = false;
    double obstacle_distance = 0.0;
  };
  StepInfo apply(const Twist& cmd);

  const world::WorldState& state() const { return state_; }
  const sensing::LidarScan& scan() const { return scan_; }
  const Vec2& waypoint() const { return waypoint_; }
  Vec2 safe_waypoint() const;  // 0.3 m lookahead point for the safe policy
  std::vector<float> observation_vector() const;
  Twist dwa_twist() const;  // expert recommendation for the current state
  double obstacle_distance() const;
  int episode_ticks() const { return ticks_; }
  const EnvConfig& config() const { return cfg_; }
  const world::Scenario& scenario() const { return scenario_; }

 private:
  void refresh_plan(bool force);
  void refresh_scan();

  world::Scenario scenario_;
  EnvConfig cfg_;
  world::WorldState state_;
  sensing::LidarScan scan_;
  classical::GlobalPath path_;
  Vec2 goal_;
  Vec2 waypoint_;
  int ticks_ = 0;
  int ticks_since_plan_ = 0;
};

// Fills the buffer with expert rollouts perturbed by Gaussian noise.
void seed_buffer(ReplayBuffer& buffer, NavEnv& env, double sigma,
                 int seed_steps, const TD3Config& cfg, uint64_t seed);

// Clipped-noise twin-min TD target, y = r for terminal transitions.
std::vector<float> td3_target(const std::vector<const Transition*>& batch,
                              const nn::PolicyBundle& bundle,
                              const TD3Config& cfg, Rng& rng);

void update_critics(const std::vector<const Transition*>& batch,
                    const std::vector<float>& y, nn::PolicyBundle& bundle);

// Regularized delayed actor update followed by soft target updates.
void update_actor_regularized(const std::vector<const Transition*>& batch,
                              nn::PolicyBundle& bundle, const TD3Config& cfg);

struct EpisodeRecord {
  int episode = 0;
  int steps = 0;
  double total_reward = 0.0;
  double total_r_collision = 0.0;
  double mse_dwa_pct = 0.0;
  double critical_pct = 0.0;
  int env_step_at_end = 0;
};

struct TrainResult {
  nn::PolicyBundle bundle;
  std::vector<EpisodeRecord> episodes;
};

// Algorithm driver: expert-seeded (or random-warmup) buffer, exploration
// rollouts, per-step critic updates, delayed regularized actor updates.
TrainResult train(NavEnv& env, const TD3Config& cfg,
                  const nn::NetworkSpec& actor_spec,
                  const nn::NetworkSpec& critic_spec,
                  const nn::AdamConfig& adam, uint64_t seed,
                  const std::function<void(const EpisodeRecord&)>& on_episode = {});

enum class PolicySource { kDwa, kNeural, kNeuralSupervised };

struct FuzzySigmas {
  double v_low = 0.5, v_high = 0.5, r_small = 0.5, r_big = 0.5;
};

struct EvalOptions {
  PolicySource source = PolicySource::kNeural;
  int n_steps = 10000;
  int horizon_steps = 400;
  double action_noise = 0.0;  // normalized std; 0 = frozen deterministic
  FuzzySigmas fuzzy;          // supervisor params (kNeuralSupervised only)
  bool hysteresis = true;
};

struct StepLog {
  Action a;
  Action a_e;
  double r;
  double dist;
  int supervisor;  // 0 neural, 1 safe, 2 backoff, -1 n/a
};

struct EvalResult {
  std::vector<EpisodeRecord> episodes;
  std::vector<std::vector<StepLog>> step_logs;  // per episode
  int switches = 0;
  int criticals = 0;
};

EvalResult evaluate_policy(const nn::PolicyBundle& bundle, NavEnv& env,
                           const EvalOptions& opt, uint64_t seed);

}  // namespace navguard::rl
