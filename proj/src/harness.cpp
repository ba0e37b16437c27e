#include "navguard/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <zlib.h>

#include "navguard/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace navguard::harness {

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kDwa: return "dwa";
    case Algorithm::kRl: return "rl";
    case Algorithm::kRlDwa: return "rl+dwa";
    case Algorithm::kRlDwaSupervisor: return "rl+dwa+supervisor";
  }
  return "?";
}

Algorithm algorithm_from_name(const std::string& s) {
  if (s == "dwa") return Algorithm::kDwa;
  if (s == "rl") return Algorithm::kRl;
  if (s == "rl+dwa") return Algorithm::kRlDwa;
  if (s == "rl+dwa+supervisor") return Algorithm::kRlDwaSupervisor;
  throw ConfigError("unknown algorithm '" + s + "'");
}

// ---- Student t ----------------------------------------------------------

namespace {

double betacf(double a, double b, double x) {
  const int kMaxIter = 200;
  const double kEps = 3e-14, kFpMin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; m++) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

double ibeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
              a * std::log(x) + b * std::log(1.0 - x);
  double bt = std::exp(ln);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double t_cdf(double t, int dof) {
  double x = dof / (dof + t * t);
  double p = 0.5 * ibeta(dof / 2.0, 0.5, x);
  return t >= 0.0 ? 1.0 - p : p;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

double t_quantile(double p, int dof) {
  if (dof < 1) throw InsufficientData("t quantile needs dof >= 1");
  double lo = 0.0, hi = 1.0;
  while (t_cdf(hi, dof) < p) hi *= 2.0;  // bracket
  for (int i = 0; i < 200; i++) {
    double mid = 0.5 * (lo + hi);
    if (t_cdf(mid, dof) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

MetricStat summarize(const std::vector<double>& values) {
  size_t n = values.size();
  if (n < 2) throw InsufficientData("need >= 2 episodes for a CI");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= (n - 1);
  double sd = std::sqrt(var);
  double tq = t_quantile(0.975, static_cast<int>(n) - 1);
  return {mean, tq * sd / std::sqrt(static_cast<double>(n))};
}

MetricsRow aggregate_metrics(const std::vector<rl::EpisodeRecord>& episodes,
                             const std::string& algorithm) {
  if (episodes.size() < 2)
    throw InsufficientData("aggregate_metrics: need >= 2 episodes");
  std::vector<double> reward, rcol, steps, mse, crit;
  for (const rl::EpisodeRecord& e : episodes) {
    reward.push_back(e.total_reward);
    rcol.push_back(e.total_r_collision);
    steps.push_back(e.steps);
    mse.push_back(e.mse_dwa_pct);
    crit.push_back(e.critical_pct);
  }
  MetricsRow row;
  row.algorithm = algorithm;
  row.episodes = static_cast<int>(episodes.size());
  row.total_reward = summarize(reward);
  row.total_r_collision = summarize(rcol);
  row.timesteps = summarize(steps);
  row.mse_dwa_pct = summarize(mse);
  row.critical_pct = summarize(crit);
  return row;
}

// ---- logs ---------------------------------------------------------------

namespace {

json summary_json(const rl::EpisodeRecord& e) {
  return json{{"episode_summary",
               {{"episode", e.episode},
                {"steps", e.steps},
                {"total_reward", e.total_reward},
                {"total_r_collision", e.total_r_collision},
                {"mse_dwa_pct", e.mse_dwa_pct},
                {"critical_pct", e.critical_pct},
                {"env_step_at_end", e.env_step_at_end}}}};
}

rl::EpisodeRecord summary_from_json(const json& j) {
  const json& s = j.at("episode_summary");
  rl::EpisodeRecord e;
  e.episode = s.at("episode").get<int>();
  e.steps = s.at("steps").get<int>();
  e.total_reward = s.at("total_reward").get<double>();
  e.total_r_collision = s.at("total_r_collision").get<double>();
  e.mse_dwa_pct = s.at("mse_dwa_pct").get<double>();
  e.critical_pct = s.at("critical_pct").get<double>();
  e.env_step_at_end = s.at("env_step_at_end").get<int>();
  return e;
}

constexpr size_t kGzipThreshold = 10 * 1024 * 1024;

void maybe_gzip(const std::string& path) {
  std::error_code ec;
  auto size = fs::file_size(path, ec);
  if (ec || size <= kGzipThreshold) return;
  std::ifstream in(path, std::ios::binary);
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  in.close();
  gzFile gz = gzopen((path + ".gz").c_str(), "wb");
  if (!gz) return;
  gzwrite(gz, data.data(), static_cast<unsigned>(data.size()));
  gzclose(gz);
  fs::remove(path, ec);
}

// Reads a possibly gzip-compressed text file line by line.
std::vector<std::string> read_lines(const std::string& path) {
  std::string real = path;
  if (!fs::exists(real) && fs::exists(real + ".gz")) real += ".gz";
  std::vector<std::string> lines;
  if (real.size() > 3 && real.substr(real.size() - 3) == ".gz") {
    gzFile gz = gzopen(real.c_str(), "rb");
    if (!gz) throw ConfigError("cannot open log file: " + real);
    char buf[1 << 16];
    std::string pending;
    int n;
    while ((n = gzread(gz, buf, sizeof(buf))) > 0) pending.append(buf, n);
    gzclose(gz);
    std::istringstream ss(pending);
    std::string line;
    while (std::getline(ss, line)) lines.push_back(line);
  } else {
    std::ifstream in(real);
    if (!in) throw ConfigError("cannot open log file: " + real);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
  }
  return lines;
}

}  // namespace

void write_episode_log(const std::string& path,
                       const std::vector<rl::EpisodeRecord>& episodes,
                       const std::vector<std::vector<rl::StepLog>>& steps,
                       bool include_steps) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write log file: " + path);
  for (size_t e = 0; e < episodes.size(); e++) {
    if (include_steps && e < steps.size()) {
      int t = 0;
      for (const rl::StepLog& s : steps[e]) {
        json j{{"episode", episodes[e].episode},
               {"t", t++},
               {"a", {s.a[0], s.a[1]}},
               {"a_e", {s.a_e[0], s.a_e[1]}},
               {"r", s.r},
               {"dist", s.dist},
               {"sup", s.supervisor}};
        out << j.dump() << "\n";
      }
    }
    out << summary_json(episodes[e]).dump() << "\n";
  }
  out.close();
  maybe_gzip(path);
}

std::vector<rl::EpisodeRecord> read_episode_log(const std::string& path) {
  std::vector<rl::EpisodeRecord> out;
  for (const std::string& line : read_lines(path)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    if (j.contains("episode_summary")) out.push_back(summary_from_json(j));
  }
  return out;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricsRow>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "algorithm,episodes,total_reward_mean,total_reward_ci95,"
         "total_r_collision_mean,total_r_collision_ci95,timesteps_mean,"
         "timesteps_ci95,mse_dwa_pct_mean,mse_dwa_pct_ci95,critical_pct_mean,"
         "critical_pct_ci95\n";
  for (const MetricsRow& r : rows) {
    out << r.algorithm << "," << r.episodes << "," << fmt(r.total_reward.mean)
        << "," << fmt(r.total_reward.ci95) << ","
        << fmt(r.total_r_collision.mean) << "," << fmt(r.total_r_collision.ci95)
        << "," << fmt(r.timesteps.mean) << "," << fmt(r.timesteps.ci95) << ","
        << fmt(r.mse_dwa_pct.mean) << "," << fmt(r.mse_dwa_pct.ci95) << ","
        << fmt(r.critical_pct.mean) << "," << fmt(r.critical_pct.ci95) << "\n";
  }
}

void write_training_curve_csv(const std::string& path,
                              const std::vector<rl::EpisodeRecord>& episodes) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "episode,steps,total_reward,total_r_collision,mse_dwa_pct,"
         "critical_pct,env_step_at_end\n";
  for (const rl::EpisodeRecord& e : episodes) {
    out << e.episode << "," << e.steps << "," << fmt(e.total_reward) << ","
        << fmt(e.total_r_collision) << "," << fmt(e.mse_dwa_pct) << ","
        << fmt(e.critical_pct) << "," << e.env_step_at_end << "\n";
  }
}

std::vector<double> rolling_mean(const std::vector<double>& xs, int window) {
  std::vector<double> out(xs.size());
  double acc = 0.0;
  for (size_t i = 0; i < xs.size(); i++) {
    acc += xs[i];
    if (i >= static_cast<size_t>(window)) acc -= xs[i - window];
    size_t n = std::min(i + 1, static_cast<size_t>(window));
    out[i] = acc / n;
  }
  return out;
}

void export_plot_data(const std::string& training_csv,
                      const std::string& out_csv, int window) {
  std::ifstream in(training_csv);
  if (!in) throw ConfigError("cannot open " + training_csv);
  std::string header;
  std::getline(in, header);
  std::vector<std::string> lines;
  std::vector<double> rewards;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    lines.push_back(line);
    std::istringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');  // episode
    std::getline(ss, field, ',');  // steps
    std::getline(ss, field, ',');  // total_reward
    rewards.push_back(std::stod(field));
  }
  std::vector<double> rm = rolling_mean(rewards, window);
  std::ofstream out(out_csv);
  if (!out) throw ConfigError("cannot write " + out_csv);
  out << header << ",reward_rolling_mean\n";
  for (size_t i = 0; i < lines.size(); i++)
    out << lines[i] << "," << fmt(rm[i]) << "\n";
}

// ---- RunConfig ----------------------------------------------------------

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  RunConfig c;
  try {
    const json& w = j.at("world");
    c.world.dt = w.value("dt", 0.1);
    c.world.limits.radius = w.value("robot_radius", 0.3);
    c.world.limits.v_max = w.value("v_max", 1.5);
    c.world.limits.w_max = w.value("w_max", 1.5);
    c.world.limits.accel_v = w.value("accel_v", 2.0);
    c.world.limits.accel_w = w.value("accel_w", 4.0);
    if (w.contains("social")) {
      const json& s = w["social"];
      c.world.social.relaxation_time = s.value("relaxation_time", 0.5);
      c.world.social.repulsion_strength_A = s.value("repulsion_strength_A", 2.0);
      c.world.social.repulsion_range_B = s.value("repulsion_range_B", 0.3);
      c.world.social.wall_strength = s.value("wall_strength", 2.0);
      c.world.social.wall_range = s.value("wall_range", 0.3);
      c.world.social.max_speed = s.value("max_speed", 3.0);
    }

    const json& sen = j.at("sensing");
    c.env.n_rays = sen.value("n_rays", 72);
    c.env.max_range = sen.value("max_range", 6.0);
    c.env.obs_rays = sen.value("obs_rays", 16);
    c.costmap_cells = sen.value("costmap_cells", 60);
    c.conv_encoder = sen.value("conv_encoder", false);

    const json& cl = j.at("classical");
    const json& dwa = cl.at("dwa");
    c.env.dwa.v_samples = dwa.value("v_samples", 5);
    c.env.dwa.w_samples = dwa.value("w_samples", 9);
    c.env.dwa.sim_time = dwa.value("sim_time", 1.0);
    c.env.dwa.dt = dwa.value("dt", 0.1);
    c.env.dwa.accel_v = c.world.limits.accel_v;
    c.env.dwa.accel_w = c.world.limits.accel_w;
    c.env.dwa.weight_heading = dwa.value("weight_heading", 0.8);
    c.env.dwa.weight_clearance = dwa.value("weight_clearance", 0.2);
    c.env.dwa.weight_velocity = dwa.value("weight_velocity", 0.2);
    c.env.waypoint_lookahead = cl.value("waypoint_lookahead", 2.0);
    c.env.plan_margin = cl.value("plan_margin", 0.1);
    c.env.safe_lookahead = cl.value("safe_lookahead", 0.3);
    c.env.safe_speed = cl.value("safe_speed", 0.5);
    c.env.goal_margin = cl.value("goal_margin", 0.4);
    c.env.replan_period = cl.value("replan_period", 20);
    c.env.replan_stray = cl.value("replan_stray", 1.0);

    const json& td3 = j.at("td3");
    c.td3.gamma = td3.value("gamma", 0.99);
    c.td3.tau_soft = td3.value("tau_soft", 0.005);
    c.td3.sigma_explore = td3.value("sigma_explore", 0.1);
    c.td3.sigma_target = td3.value("sigma_target", 0.2);
    c.td3.clip_c = td3.value("clip_c", 0.5);
    c.td3.policy_delay = td3.value("policy_delay", 2);
    c.td3.batch_N = td3.value("batch_N", 256);
    c.td3.lambda_reg = td3.value("lambda_reg", 1.0);
    c.td3.seed_steps = td3.value("seed_steps", 5000);
    c.td3.warmup_steps = td3.value("warmup_steps", 1000);
    c.td3.total_steps = td3.value("total_steps", 30000);
    c.td3.horizon_steps = td3.value("horizon_steps", 400);
    c.td3.buffer_capacity = td3.value("buffer_capacity", 200000);
    c.adam.lr = td3.value("lr", 3e-4f);
    c.trunk = td3.value("trunk", std::vector<int>{64, 64});
    std::string variant = td3.value("reward_variant", "sparse");
    if (variant == "dense")
      c.env.reward.variant = rl::RewardConfig::Variant::kDense;
    else if (variant == "sparse")
      c.env.reward.variant = rl::RewardConfig::Variant::kSparse;
    else
      throw ConfigError("reward_variant must be dense or sparse");
    c.env.reward.signed_progress = td3.value("signed_progress", true);
    c.env.reward.waypoint_margin = td3.value("waypoint_margin", 0.3);

    const json& sup = j.at("supervisor");
    if (sup.contains("sigmas")) {
      auto s = sup["sigmas"].get<std::vector<double>>();
      if (s.size() != 4) throw ConfigError("supervisor.sigmas needs 4 values");
      c.fuzzy.sigma_v_low = s[0];
      c.fuzzy.sigma_v_high = s[1];
      c.fuzzy.sigma_r_small = s[2];
      c.fuzzy.sigma_r_big = s[3];
    }
    c.hysteresis = sup.value("hysteresis", true);
    if (sup.contains("nsga")) {
      const json& n = sup["nsga"];
      c.nsga.population_size = n.value("population_size", 16);
      c.nsga.generations = n.value("generations", 16);
    }
    if (sup.contains("genome_eval")) {
      const json& g = sup["genome_eval"];
      c.genome_eval.episodes_per_seed = g.value("episodes_per_seed", 2);
      c.genome_eval.seeds = g.value("seeds", std::vector<uint64_t>{1, 2});
      c.genome_eval.action_noise = g.value("action_noise", 0.1);
      c.genome_eval.horizon = g.value("horizon", 300);
    }

    const json& run = j.at("run");
    c.scenario_path = run.at("scenario").get<std::string>();
    c.algorithm = algorithm_from_name(run.value("algorithm", "rl+dwa"));
    c.seeds = run.value("seeds", std::vector<uint64_t>{0});
    c.eval_steps = run.value("eval_steps", 10000);
    c.out_dir = run.value("out", "out");
    c.checkpoint = run.value("checkpoint", "");
    c.log_steps = run.value("log_steps", true);
    c.log_costmap = run.value("log_costmap", false);
  } catch (const json::exception& e) {
    throw ConfigError("config field error in " + path + ": " + e.what());
  }
  return c;
}

std::string RunConfig::to_json() const {
  json j;
  j["world"] = {{"dt", world.dt},
                {"robot_radius", world.limits.radius},
                {"v_max", world.limits.v_max},
                {"w_max", world.limits.w_max},
                {"accel_v", world.limits.accel_v},
                {"accel_w", world.limits.accel_w},
                {"social",
                 {{"relaxation_time", world.social.relaxation_time},
                  {"repulsion_strength_A", world.social.repulsion_strength_A},
                  {"repulsion_range_B", world.social.repulsion_range_B},
                  {"wall_strength", world.social.wall_strength},
                  {"wall_range", world.social.wall_range},
                  {"max_speed", world.social.max_speed}}}};
  j["sensing"] = {{"n_rays", env.n_rays},
                  {"max_range", env.max_range},
                  {"obs_rays", env.obs_rays},
                  {"costmap_cells", costmap_cells},
                  {"conv_encoder", conv_encoder}};
  j["classical"] = {{"dwa",
                     {{"v_samples", env.dwa.v_samples},
                      {"w_samples", env.dwa.w_samples},
                      {"sim_time", env.dwa.sim_time},
                      {"dt", env.dwa.dt},
                      {"weight_heading", env.dwa.weight_heading},
                      {"weight_clearance", env.dwa.weight_clearance},
                      {"weight_velocity", env.dwa.weight_velocity}}},
                    {"waypoint_lookahead", env.waypoint_lookahead},
                    {"plan_margin", env.plan_margin},
                    {"safe_lookahead", env.safe_lookahead},
                    {"safe_speed", env.safe_speed},
                    {"goal_margin", env.goal_margin},
                    {"replan_period", env.replan_period},
                    {"replan_stray", env.replan_stray}};
  j["td3"] = {{"gamma", td3.gamma},
              {"tau_soft", td3.tau_soft},
              {"sigma_explore", td3.sigma_explore},
              {"sigma_target", td3.sigma_target},
              {"clip_c", td3.clip_c},
              {"policy_delay", td3.policy_delay},
              {"batch_N", td3.batch_N},
              {"lambda_reg", td3.lambda_reg},
              {"seed_steps", td3.seed_steps},
              {"warmup_steps", td3.warmup_steps},
              {"total_steps", td3.total_steps},
              {"horizon_steps", td3.horizon_steps},
              {"buffer_capacity", td3.buffer_capacity},
              {"lr", adam.lr},
              {"trunk", trunk},
              {"reward_variant",
               env.reward.variant == rl::RewardConfig::Variant::kDense
                   ? "dense"
                   : "sparse"},
              {"signed_progress", env.reward.signed_progress},
              {"waypoint_margin", env.reward.waypoint_margin}};
  j["supervisor"] = {{"sigmas",
                      {fuzzy.sigma_v_low, fuzzy.sigma_v_high,
                       fuzzy.sigma_r_small, fuzzy.sigma_r_big}},
                     {"hysteresis", hysteresis},
                     {"nsga",
                      {{"population_size", nsga.population_size},
                       {"generations", nsga.generations}}},
                     {"genome_eval",
                      {{"episodes_per_seed", genome_eval.episodes_per_seed},
                       {"seeds", genome_eval.seeds},
                       {"action_noise", genome_eval.action_noise},
                       {"horizon", genome_eval.horizon}}}};
  j["run"] = {{"scenario", scenario_path},
              {"algorithm", algorithm_name(algorithm)},
              {"seeds", seeds},
              {"eval_steps", eval_steps},
              {"out", out_dir},
              {"checkpoint", checkpoint},
              {"log_steps", log_steps},
              {"log_costmap", log_costmap}};
  return j.dump(2);
}

nn::NetworkSpec RunConfig::actor_spec() const {
  nn::NetworkSpec spec;
  if (conv_encoder) {
    spec.encoder = nn::NetworkSpec::Encoder::kConv;
    spec.image_side = costmap_cells;
    spec.image_channels = 1;
    spec.conv = conv.empty()
                    ? std::vector<nn::ConvSpec>{{8, 5, 2}, {16, 3, 2}, {16, 3, 2}}
                    : conv;
    spec.aux_dim = 4;
  } else {
    spec.encoder = nn::NetworkSpec::Encoder::kVector;
    spec.vector_dim = env.obs_rays + 4;
    spec.aux_dim = 0;
  }
  spec.trunk = trunk;
  spec.out_dim = 2;
  spec.tanh_head = true;
  return spec;
}

nn::NetworkSpec RunConfig::critic_spec() const {
  nn::NetworkSpec spec = actor_spec();
  if (conv_encoder)
    spec.aux_dim += 2;  // action joins the concatenated vector
  else
    spec.vector_dim += 2;
  spec.out_dim = 1;
  spec.tanh_head = false;
  return spec;
}

world::Scenario RunConfig::load_scenario() const {
  world::Scenario s = world::Scenario::load(scenario_path);
  s.world_params = world;
  return s;
}

rl::NavEnv RunConfig::make_env() const {
  return rl::NavEnv(load_scenario(), env);
}

}  // namespace navguard::harness
