#include "navguard/rl.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "navguard/errors.hpp"
#include "navguard/supervisor.hpp"

namespace navguard::rl {

void ReplayBuffer::push(Transition t) {
  if (ring_.size() < capacity_) {
    ring_.push_back(std::move(t));
  } else {
    ring_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
  }
}

const Transition& ReplayBuffer::sample(Rng& rng) const {
  return ring_[rng.uniform_index(ring_.size())];
}

void TD3Config::validate() const {
  if (gamma <= 0.0 || gamma > 1.0) throw ConfigError("gamma must be in (0, 1]");
  if (tau_soft < 0.0 || tau_soft > 1.0) throw ConfigError("tau_soft must be in [0, 1]");
  if (clip_c <= 0.0) throw ConfigError("clip_c must be positive");
  if (policy_delay < 1) throw ConfigError("policy_delay must be >= 1");
  if (batch_N < 1) throw ConfigError("batch_N must be >= 1");
  if (lambda_reg < 0.0) throw ConfigError("lambda_reg must be >= 0");
  if (total_steps < 0 || horizon_steps < 1) throw ConfigError("bad step budget");
  if (buffer_capacity < 1) throw ConfigError("buffer_capacity must be >= 1");
}

Twist action_denormalize(const Action& a, const world::RobotLimits& lim) {
  return {(a[0] + 1.0) * 0.5 * lim.v_max, a[1] * lim.w_max};
}

Action action_normalize(const Twist& t, const world::RobotLimits& lim) {
  return {static_cast<float>(2.0 * t.v / lim.v_max - 1.0),
          static_cast<float>(t.w / lim.w_max)};
}

double compute_reward(const world::WorldState& prev, const Twist& cmd,
                      const world::WorldState& next, const Vec2& waypoint,
                      bool waypoint_reached, const RewardConfig& cfg) {
  double r = cfg.r_timestep;
  double dist = world::distance_to_nearest_obstacle(next);
  if (dist < cfg.collision_dist) r += -std::abs(cmd.v) - 1.0;
  if (cfg.variant == RewardConfig::Variant::kDense) {
    double progress = (waypoint - prev.robot_pose.position()).norm() -
                      (waypoint - next.robot_pose.position()).norm();
    r += cfg.signed_progress ? progress : std::abs(progress);
  } else if (waypoint_reached) {
    r += cfg.waypoint_bonus;
  }
  return r;
}

// ---- NavEnv -------------------------------------------------------------

NavEnv::NavEnv(world::Scenario scenario, EnvConfig cfg)
    : scenario_(std::move(scenario)), cfg_(cfg) {}

void NavEnv::refresh_scan() {
  scan_ = sensing::raycast_scan(state_, cfg_.n_rays, cfg_.max_range);
}

namespace {
// Nearest cell free in the inflated grid, spiral search.
Vec2 nearest_plannable(const OccupancyMap& map,
                       const std::vector<uint8_t>& blocked, const Vec2& p) {
  int ci = std::clamp(map.cell_x(p.x), 0, map.width - 1);
  int cj = std::clamp(map.cell_y(p.y), 0, map.height - 1);
  if (!blocked[static_cast<size_t>(cj) * map.width + ci]) return p;
  for (int r = 1; r < 20; r++) {
    for (int dj = -r; dj <= r; dj++) {
      for (int di = -r; di <= r; di++) {
        if (std::max(std::abs(di), std::abs(dj)) != r) continue;
        int i = ci + di, j = cj + dj;
        if (!map.in_bounds(i, j)) continue;
        if (!blocked[static_cast<size_t>(j) * map.width + i])
          return map.cell_center(i, j);
      }
    }
  }
  return p;
}
}  // namespace

void NavEnv::refresh_plan(bool force) {
  if (!force && ticks_since_plan_ < cfg_.replan_period) {
    Vec2 near = path_.point_at_arc(path_.nearest_arc(state_.robot_pose.position()));
    if ((near - state_.robot_pose.position()).norm() <= cfg_.replan_stray) return;
  }
  double inflation = state_.params.limits.radius + cfg_.plan_margin;
  std::vector<uint8_t> blocked = scenario_.map->inflated(inflation);
  Vec2 start =
      nearest_plannable(*scenario_.map, blocked, state_.robot_pose.position());
  try {
    path_ = classical::plan_global(*scenario_.map, start, goal_, inflation);
    ticks_since_plan_ = 0;
  } catch (const NoPath&) {
    if (path_.waypoints.empty()) throw;
    // Keep steering along the previous plan until planning recovers.
  }
  waypoint_ = classical::extract_waypoint(path_, state_.robot_pose,
                                          cfg_.waypoint_lookahead);
}

void NavEnv::reset(uint64_t seed) {
  world::EpisodeStart ep = world::reset_episode(scenario_, seed);
  state_ = std::move(ep.state);
  goal_ = ep.goal;
  ticks_ = 0;
  ticks_since_plan_ = 0;
  path_ = {};
  refresh_plan(true);
  refresh_scan();
}

Vec2 NavEnv::safe_waypoint() const {
  return classical::extract_waypoint(path_, state_.robot_pose,
                                     cfg_.safe_lookahead);
}

std::vector<float> NavEnv::observation_vector() const {
  sensing::Observation obs =
      sensing::assemble_observation(state_, scan_, waypoint_);
  return sensing::encode_ray_vector(scan_, obs, cfg_.obs_rays,
                                    state_.params.limits);
}

Twist NavEnv::dwa_twist() const {
  return classical::dwa_action(state_, scan_, waypoint_, cfg_.dwa).twist;
}

double NavEnv::obstacle_distance() const {
  return world::distance_to_nearest_obstacle(state_);
}

NavEnv::StepInfo NavEnv::apply(const Twist& cmd) {
  StepInfo info;
  world::WorldState prev = state_;
  double dt = state_.params.dt;
  state_ = world::step_robot(state_, cmd, dt);
  state_ = world::step_pedestrians(state_, dt);
  ticks_++;
  ticks_since_plan_++;

  bool wp_reached = (state_.robot_pose.position() - waypoint_).norm() <
                    cfg_.reward.waypoint_margin;
  info.reward = compute_reward(prev, cmd, state_, waypoint_, wp_reached,
                               cfg_.reward);
  info.waypoint_reached = wp_reached;
  info.collided = state_.collided;
  info.obstacle_distance = obstacle_distance();
  info.reached_goal =
      (state_.robot_pose.position() - goal_).norm() < cfg_.goal_margin;
  info.done = info.reached_goal;

  refresh_plan(false);
  if (wp_reached)
    waypoint_ = classical::extract_waypoint(path_, state_.robot_pose,
                                            cfg_.waypoint_lookahead);
  refresh_scan();
  return info;
}

// ---- TD3 updates --------------------------------------------------------

namespace {

Action clip_action(const Action& a) {
  return {std::clamp(a[0], -1.0f, 1.0f), std::clamp(a[1], -1.0f, 1.0f)};
}

// Batched forward helpers. Critic inputs are [obs, action].
std::vector<float> critic_inputs(const std::vector<const Transition*>& batch,
                                 bool next_state,
                                 const std::vector<Action>& actions) {
  size_t obs_dim = next_state ? batch[0]->s_next.size() : batch[0]->s.size();
  std::vector<float> in(batch.size() * (obs_dim + 2));
  for (size_t b = 0; b < batch.size(); b++) {
    const std::vector<float>& s = next_state ? batch[b]->s_next : batch[b]->s;
    std::memcpy(&in[b * (obs_dim + 2)], s.data(), obs_dim * sizeof(float));
    in[b * (obs_dim + 2) + obs_dim] = actions[b][0];
    in[b * (obs_dim + 2) + obs_dim + 1] = actions[b][1];
  }
  return in;
}

std::vector<float> obs_inputs(const std::vector<const Transition*>& batch,
                              bool next_state) {
  size_t obs_dim = next_state ? batch[0]->s_next.size() : batch[0]->s.size();
  std::vector<float> in(batch.size() * obs_dim);
  for (size_t b = 0; b < batch.size(); b++) {
    const std::vector<float>& s = next_state ? batch[b]->s_next : batch[b]->s;
    std::memcpy(&in[b * obs_dim], s.data(), obs_dim * sizeof(float));
  }
  return in;
}

}  // namespace

std::vector<float> td3_target(const std::vector<const Transition*>& batch,
                              const nn::PolicyBundle& bundle,
                              const TD3Config& cfg, Rng& rng) {
  int n = static_cast<int>(batch.size());
  std::vector<float> next_obs = obs_inputs(batch, true);
  std::vector<float> a_next(static_cast<size_t>(n) * 2);
  bundle.actor_target.forward_batch(next_obs.data(), n, a_next.data(), nullptr);

  std::vector<Action> smoothed(n);
  for (int b = 0; b < n; b++) {
    for (int c = 0; c < 2; c++) {
      double eps = clampd(rng.normal(0.0, cfg.sigma_target), -cfg.clip_c,
                          cfg.clip_c);
      smoothed[b][c] = static_cast<float>(
          clampd(a_next[static_cast<size_t>(b) * 2 + c] + eps, -1.0, 1.0));
    }
  }
  std::vector<float> cin = critic_inputs(batch, true, smoothed);
  std::vector<float> q1(n), q2(n);
  bundle.critic1_target.forward_batch(cin.data(), n, q1.data(), nullptr);
  bundle.critic2_target.forward_batch(cin.data(), n, q2.data(), nullptr);

  std::vector<float> y(n);
  for (int b = 0; b < n; b++) {
    if (batch[b]->done) {
      y[b] = batch[b]->r;
    } else {
      y[b] = batch[b]->r +
             static_cast<float>(cfg.gamma) * std::min(q1[b], q2[b]);
    }
  }
  return y;
}

void update_critics(const std::vector<const Transition*>& batch,
                    const std::vector<float>& y, nn::PolicyBundle& bundle) {
  int n = static_cast<int>(batch.size());
  std::vector<Action> actions(n);
  for (int b = 0; b < n; b++) actions[b] = batch[b]->a;
  std::vector<float> cin = critic_inputs(batch, false, actions);

  struct CriticRef {
    nn::Network* net;
    nn::AdamState* opt;
  };
  for (CriticRef c : {CriticRef{&bundle.critic1, &bundle.opt_critic1},
                      CriticRef{&bundle.critic2, &bundle.opt_critic2}}) {
    nn::BatchTape tape;
    std::vector<float> q(n);
    c.net->forward_batch(cin.data(), n, q.data(), &tape);
    std::vector<float> dout(n);
    for (int b = 0; b < n; b++) dout[b] = 2.0f * (q[b] - y[b]) / n;
    std::vector<float> grad(c.net->param_count(), 0.0f);
    c.net->backward_batch(tape, dout.data(), n, grad.data(), nullptr);
    nn::adam_step(c.net->params, grad, *c.opt, bundle.adam);
  }
}

void update_actor_regularized(const std::vector<const Transition*>& batch,
                              nn::PolicyBundle& bundle, const TD3Config& cfg) {
  int n = static_cast<int>(batch.size());
  std::vector<float> obs = obs_inputs(batch, false);
  nn::BatchTape actor_tape;
  std::vector<float> a_pi(static_cast<size_t>(n) * 2);
  bundle.actor.forward_batch(obs.data(), n, a_pi.data(), &actor_tape);

  std::vector<Action> actions(n);
  for (int b = 0; b < n; b++)
    actions[b] = {a_pi[static_cast<size_t>(b) * 2],
                  a_pi[static_cast<size_t>(b) * 2 + 1]};
  std::vector<float> cin = critic_inputs(batch, false, actions);
  nn::BatchTape critic_tape;
  std::vector<float> q(n);
  bundle.critic1.forward_batch(cin.data(), n, q.data(), &critic_tape);

  // dL/dQ = -1/N per sample; only the input gradient is used (critic
  // parameters are frozen during the actor step).
  std::vector<float> dq(n, -1.0f / n);
  std::vector<float> scratch(bundle.critic1.param_count(), 0.0f);
  size_t cin_dim = bundle.critic1.spec.input_size();
  std::vector<float> din(static_cast<size_t>(n) * cin_dim, 0.0f);
  bundle.critic1.backward_batch(critic_tape, dq.data(), n, scratch.data(),
                                din.data());

  size_t obs_dim = cin_dim - 2;
  std::vector<float> da(static_cast<size_t>(n) * 2);
  for (int b = 0; b < n; b++) {
    for (int c = 0; c < 2; c++) {
      float dqa = din[static_cast<size_t>(b) * cin_dim + obs_dim + c];
      float reg = 0.0f;
      if (cfg.lambda_reg != 0.0) {
        // d/da of lambda * mean_c (a - a_e)^2 averaged over the batch.
        reg = static_cast<float>(cfg.lambda_reg) *
              (a_pi[static_cast<size_t>(b) * 2 + c] - batch[b]->a_e[c]) / n;
      }
      da[static_cast<size_t>(b) * 2 + c] = dqa + reg;
    }
  }
  std::vector<float> grad(bundle.actor.param_count(), 0.0f);
  bundle.actor.backward_batch(actor_tape, da.data(), n, grad.data(), nullptr);
  nn::adam_step(bundle.actor.params, grad, bundle.opt_actor, bundle.adam);

  nn::soft_update(bundle.actor_target, bundle.actor,
                  static_cast<float>(cfg.tau_soft));
  nn::soft_update(bundle.critic1_target, bundle.critic1,
                  static_cast<float>(cfg.tau_soft));
  nn::soft_update(bundle.critic2_target, bundle.critic2,
                  static_cast<float>(cfg.tau_soft));
}

// ---- training loop ------------------------------------------------------

namespace {

// Per-episode metric accumulator shared by training and evaluation.
struct EpisodeAccum {
  double reward = 0.0;
  double r_collision = 0.0;
  double mse = 0.0;
  int critical = 0;
  int steps = 0;

  void add(const Action& a, const Action& a_e, double r, const Twist& cmd,
           double dist, const RewardConfig& rcfg) {
    reward += r;
    if (dist < rcfg.collision_dist) r_collision += -std::abs(cmd.v) - 1.0;
    double d0 = a[0] - a_e[0], d1 = a[1] - a_e[1];
    mse += 0.5 * (d0 * d0 + d1 * d1);
    if (dist < supervisor::kCriticalDistance) critical++;
    steps++;
  }

  EpisodeRecord record(int episode, int env_step) const {
    EpisodeRecord r;
    r.episode = episode;
    r.steps = steps;
    r.total_reward = reward;
    r.total_r_collision = r_collision;
    r.mse_dwa_pct = steps > 0 ? mse / steps / 4.0 * 100.0 : 0.0;
    r.critical_pct = steps > 0 ? 100.0 * critical / steps : 0.0;
    r.env_step_at_end = env_step;
    return r;
  }
};

constexpr int kHardCollisionTicks = 20;  // consecutive contacts end the episode

}  // namespace

void seed_buffer(ReplayBuffer& buffer, NavEnv& env, double sigma,
                 int seed_steps, const TD3Config& cfg, uint64_t seed) {
  Rng rng(Rng::derive(seed, 0x5EED));
  int stored = 0;
  int episode = 0;
  const world::RobotLimits& lim = env.state().params.limits;
  while (stored < seed_steps) {
    env.reset(Rng::derive(seed, 1000 + episode));
    episode++;
    int collided_run = 0;
    for (int t = 0; t < cfg.horizon_steps && stored < seed_steps; t++) {
      std::vector<float> s = env.observation_vector();
      Action a_e = clip_action(action_normalize(env.dwa_twist(), lim));
      Action a = a_e;
      for (int c = 0; c < 2; c++)
        a[c] = static_cast<float>(
            clampd(a[c] + rng.normal(0.0, sigma), -1.0, 1.0));
      NavEnv::StepInfo info = env.apply(action_denormalize(a, lim));
      collided_run = info.collided ? collided_run + 1 : 0;
      bool done = info.done || collided_run >= kHardCollisionTicks;
      buffer.push({std::move(s), a, a_e, static_cast<float>(info.reward),
                   env.observation_vector(), done});
      stored++;
      if (done) break;
    }
  }
}

TrainResult train(NavEnv& env, const TD3Config& cfg,
                  const nn::NetworkSpec& actor_spec,
                  const nn::NetworkSpec& critic_spec,
                  const nn::AdamConfig& adam, uint64_t seed,
                  const std::function<void(const EpisodeRecord&)>& on_episode) {
  cfg.validate();
  if (critic_spec.input_size() != actor_spec.input_size() + 2)
    throw ConfigError("critic input must be actor input plus the 2-dim action");

  TrainResult result{nn::PolicyBundle::make(actor_spec, critic_spec, adam, seed),
                     {}};
  nn::PolicyBundle& bundle = result.bundle;
  ReplayBuffer buffer(cfg.buffer_capacity);
  Rng rng(Rng::derive(seed, 0x7D3));
  const world::RobotLimits& lim = env.state().params.limits;

  if (cfg.seed_steps > 0)
    seed_buffer(buffer, env, cfg.sigma_explore, cfg.seed_steps, cfg, seed);

  int episode = 0;
  int step = 0;
  int update_count = 0;
  while (step < cfg.total_steps) {
    env.reset(Rng::derive(seed, 2000000 + episode));
    EpisodeAccum acc;
    int collided_run = 0;
    for (int t = 0; t < cfg.horizon_steps && step < cfg.total_steps; t++) {
      std::vector<float> s = env.observation_vector();
      Action a;
      if (cfg.warmup_steps > 0 && step < cfg.warmup_steps) {
        a = {static_cast<float>(rng.uniform(-1.0, 1.0)),
             static_cast<float>(rng.uniform(-1.0, 1.0))};
      } else {
        std::vector<float> out = bundle.actor.forward(s);
        a = {out[0], out[1]};
        for (int c = 0; c < 2; c++)
          a[c] = static_cast<float>(
              clampd(a[c] + rng.normal(0.0, cfg.sigma_explore), -1.0, 1.0));
      }
      Action a_e = clip_action(action_normalize(env.dwa_twist(), lim));
      Twist cmd = action_denormalize(a, lim);
      NavEnv::StepInfo info = env.apply(cmd);
      collided_run = info.collided ? collided_run + 1 : 0;
      bool done = info.done || collided_run >= kHardCollisionTicks;
      acc.add(a, a_e, info.reward, cmd, info.obstacle_distance,
              env.config().reward);
      buffer.push({std::move(s), a, a_e, static_cast<float>(info.reward),
                   env.observation_vector(), done});
      step++;

      if (static_cast<int>(buffer.size()) >= cfg.batch_N) {
        std::vector<const Transition*> batch(cfg.batch_N);
        for (int b = 0; b < cfg.batch_N; b++) batch[b] = &buffer.sample(rng);
        std::vector<float> y = td3_target(batch, bundle, cfg, rng);
        update_critics(batch, y, bundle);
        update_count++;
        if (update_count % cfg.policy_delay == 0)
          update_actor_regularized(batch, bundle, cfg);
      }
      if (done) break;
    }
    EpisodeRecord rec = acc.record(episode, step);
    if (on_episode) on_episode(rec);
    result.episodes.push_back(rec);
    episode++;
  }
  return result;
}

// ---- evaluation ---------------------------------------------------------

EvalResult evaluate_policy(const nn::PolicyBundle& bundle, NavEnv& env,
                           const EvalOptions& opt, uint64_t seed) {
  EvalResult result;
  Rng rng(Rng::derive(seed, 0xEA1));
  const world::RobotLimits& lim = env.state().params.limits;

  supervisor::FuzzyParams fuzzy;
  fuzzy.sigma_v_low = opt.fuzzy.v_low;
  fuzzy.sigma_v_high = opt.fuzzy.v_high;
  fuzzy.sigma_r_small = opt.fuzzy.r_small;
  fuzzy.sigma_r_big = opt.fuzzy.r_big;

  int total_steps = 0;
  int episode = 0;
  while (total_steps < opt.n_steps) {
    env.reset(Rng::derive(seed, 3000000 + episode));
    EpisodeAccum acc;
    std::vector<StepLog> log;
    supervisor::SupervisorState sup;
    sup.hysteresis_enabled = opt.hysteresis;
    int collided_run = 0;
    for (int t = 0; t < opt.horizon_steps && total_steps < opt.n_steps; t++) {
      Action a_e = Action{0, 0};
      Twist dwa = env.dwa_twist();
      a_e = action_normalize(dwa, lim);
      a_e = Action{std::clamp(a_e[0], -1.0f, 1.0f),
                   std::clamp(a_e[1], -1.0f, 1.0f)};

      Twist cmd;
      int sup_choice = -1;
      if (opt.source == PolicySource::kDwa) {
        cmd = dwa;
      } else {
        bool use_neural = true;
        if (opt.source == PolicySource::kNeuralSupervised) {
          double dist = env.obstacle_distance();
          supervisor::Policy choice = supervisor::supervise_step(
              dist, std::abs(env.state().robot_twist.v), fuzzy, sup);
          sup_choice = static_cast<int>(choice);
          if (choice == supervisor::Policy::kBackoff) {
            cmd = classical::backoff_action();
            use_neural = false;
          } else if (choice == supervisor::Policy::kSafe) {
            cmd = classical::pure_pursuit_action(env.state().robot_pose,
                                                 env.safe_waypoint(),
                                                 env.config().safe_speed,
                                                 lim.w_max);
            use_neural = false;
          }
        }
        if (use_neural) {
          std::vector<float> out = bundle.actor.forward(env.observation_vector());
          Action a{out[0], out[1]};
          if (opt.action_noise > 0.0) {
            for (int c = 0; c < 2; c++)
              a[c] = static_cast<float>(
                  clampd(a[c] + rng.normal(0.0, opt.action_noise), -1.0, 1.0));
          }
          cmd = action_denormalize(a, lim);
        }
      }

      NavEnv::StepInfo info = env.apply(cmd);
      collided_run = info.collided ? collided_run + 1 : 0;
      Action a_exec = action_normalize(cmd, lim);
      a_exec = Action{std::clamp(a_exec[0], -1.0f, 1.0f),
                      std::clamp(a_exec[1], -1.0f, 1.0f)};
      acc.add(a_exec, a_e, info.reward, cmd, info.obstacle_distance,
              env.config().reward);
      log.push_back({a_exec, a_e, info.reward, info.obstacle_distance,
                     sup_choice});
      total_steps++;
      if (info.done || collided_run >= kHardCollisionTicks) break;
    }
    result.episodes.push_back(acc.record(episode, total_steps));
    result.step_logs.push_back(std::move(log));
    result.switches += sup.switch_count;
    result.criticals += sup.critical_count;
    episode++;
  }
  return result;
}

}  // namespace navguard::rl
