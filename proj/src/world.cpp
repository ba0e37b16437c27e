#include "navguard/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "navguard/errors.hpp"

namespace navguard::world {

namespace {

Twist clamp_command(const Twist& cmd, const Twist& current,
                    const RobotLimits& lim, double dt) {
  Twist c;
  c.v = clampd(cmd.v, -lim.v_max, lim.v_max);
  c.w = clampd(cmd.w, -lim.w_max, lim.w_max);
  c.v = clampd(c.v, current.v - lim.accel_v * dt, current.v + lim.accel_v * dt);
  c.w = clampd(c.w, current.w - lim.accel_w * dt, current.w + lim.accel_w * dt);
  return c;
}

}  // namespace

double robot_clearance_signed(const WorldState& state, const Pose& pose) {
  double d = state.map->distance_to_occupied(pose.position()) -
             state.params.limits.radius;
  for (const Pedestrian& p : state.pedestrians) {
    double dp = (p.position - pose.position()).norm() - p.radius -
                state.params.limits.radius;
    d = std::min(d, dp);
  }
  return d;
}

double distance_to_nearest_obstacle(const WorldState& state) {
  return std::max(0.0, robot_clearance_signed(state, state.robot_pose));
}

WorldState step_robot(const WorldState& state, const Twist& cmd, double dt) {
  WorldState next = state;
  Twist u = clamp_command(cmd, state.robot_twist, state.params.limits, dt);
  Pose candidate = step_unicycle(state.robot_pose, u, dt);
  if (robot_clearance_signed(state, candidate) <= 0.0) {
    // Stopped at contact; pose held, twist cleared.
    next.robot_twist = Twist{0.0, 0.0};
    next.collided = true;
  } else {
    next.robot_pose = candidate;
    next.robot_twist = u;
    next.collided = false;
  }
  next.time = state.time + dt;
  return next;
}

WorldState step_pedestrians(const WorldState& state, double dt) {
  WorldState next = state;
  const SocialForceParams& sf = state.params.social;
  for (size_t i = 0; i < next.pedestrians.size(); i++) {
    const Pedestrian& p = state.pedestrians[i];
    Vec2 force{0.0, 0.0};

    // Goal attraction (relaxation toward desired velocity).
    Vec2 to_goal = p.goal - p.position;
    Vec2 v_des = to_goal.norm() > 1e-9 ? to_goal.unit() * p.desired_speed
                                       : Vec2{0.0, 0.0};
    force = force + (v_des - p.velocity) * (1.0 / sf.relaxation_time);

    // Pairwise repulsion from other pedestrians.
    for (size_t j = 0; j < state.pedestrians.size(); j++) {
      if (j == i) continue;
      const Pedestrian& q = state.pedestrians[j];
      Vec2 diff = p.position - q.position;
      double d = diff.norm();
      if (d < 1e-9) continue;
      double mag = sf.repulsion_strength_A *
                   std::exp((p.radius + q.radius - d) / sf.repulsion_range_B);
      force = force + diff.unit() * mag;
    }

    // Repulsion from the robot, treated as another disc.
    {
      Vec2 diff = p.position - state.robot_pose.position();
      double d = diff.norm();
      if (d > 1e-9) {
        double mag = sf.repulsion_strength_A *
                     std::exp((p.radius + state.params.limits.radius - d) /
                              sf.repulsion_range_B);
        force = force + diff.unit() * mag;
      }
    }

    // Wall repulsion from the nearest static obstacle point.
    {
      Vec2 closest;
      double d = state.map->distance_to_occupied(p.position, &closest);
      Vec2 away = p.position - closest;
      if (d > 1e-9 && away.norm() > 1e-9) {
        double mag =
            sf.wall_strength * std::exp((p.radius - d) / sf.wall_range);
        force = force + away.unit() * mag;
      }
    }

    Pedestrian& out = next.pedestrians[i];
    out.velocity = p.velocity + force * dt;
    double cap = std::min(sf.max_speed, 1.5 * p.desired_speed);
    double speed = out.velocity.norm();
    if (speed > cap) out.velocity = out.velocity.unit() * cap;
    out.position = p.position + out.velocity * dt;

    // Patrol: swap goal and home on arrival.
    if ((out.goal - out.position).norm() < 0.3) std::swap(out.goal, out.home);
  }
  return next;
}

Scenario Scenario::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidScenario("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidScenario("scenario parse error in " + path + ": " + e.what());
  }
  Scenario s;
  s.name = j.value("name", path);
  s.map_path = j.at("map").get<std::string>();
  // Map path is resolved relative to the scenario file's directory.
  std::string dir;
  auto slash = path.find_last_of('/');
  if (slash != std::string::npos) dir = path.substr(0, slash + 1);
  std::string map_file = s.map_path;
  if (!map_file.empty() && map_file[0] != '/') map_file = dir + map_file;
  s.map = std::make_shared<OccupancyMap>(OccupancyMap::load(map_file));
  s.start_room = j.at("start_room").get<std::string>();
  s.goal_room = j.at("goal_room").get<std::string>();
  s.spawn_jitter = j.value("spawn_jitter", 0.0);
  if (j.contains("pedestrians")) {
    for (const auto& pj : j["pedestrians"]) {
      PedSpec p;
      p.pos = {pj.at("pos")[0].get<double>(), pj.at("pos")[1].get<double>()};
      p.goal = {pj.at("goal")[0].get<double>(), pj.at("goal")[1].get<double>()};
      p.speed = pj.value("speed", 1.0);
      p.radius = pj.value("radius", 0.25);
      s.pedestrians.push_back(p);
    }
  }
  if (!s.map->find_room(s.start_room))
    throw InvalidScenario("unknown start room '" + s.start_room + "'");
  if (!s.map->find_room(s.goal_room))
    throw InvalidScenario("unknown goal room '" + s.goal_room + "'");
  return s;
}

namespace {
Vec2 room_center(const OccupancyMap& map, const Room& r) {
  return {(r.x0 + r.x1 + 1) * 0.5 * map.resolution,
          (r.y0 + r.y1 + 1) * 0.5 * map.resolution};
}
}  // namespace

EpisodeStart reset_episode(const Scenario& scenario, uint64_t seed) {
  const Room* start = scenario.map->find_room(scenario.start_room);
  const Room* goal = scenario.map->find_room(scenario.goal_room);
  if (!start || !goal) throw InvalidScenario("scenario rooms missing");

  EpisodeStart ep;
  ep.state.map = scenario.map;
  ep.state.params = scenario.world_params;
  ep.state.rng_seed = seed;
  ep.goal = room_center(*scenario.map, *goal);

  Rng rng(Rng::derive(seed, 0xE51D));
  const OccupancyMap& map = *scenario.map;
  double x0 = start->x0 * map.resolution, x1 = (start->x1 + 1) * map.resolution;
  double y0 = start->y0 * map.resolution, y1 = (start->y1 + 1) * map.resolution;

  // Rejection-sample a collision-free spawn inside the start room.
  Pose pose;
  bool ok = false;
  for (int attempt = 0; attempt < 1000; attempt++) {
    pose.x = rng.uniform(x0, x1);
    pose.y = rng.uniform(y0, y1);
    pose.theta = 0.0;
    WorldState probe = ep.state;
    probe.robot_pose = pose;
    if (robot_clearance_signed(probe, pose) > 0.05) {
      ok = true;
      break;
    }
  }
  if (!ok)
    throw InvalidScenario("could not place robot in room '" +
                          scenario.start_room + "'");
  pose.theta = normalize_angle(std::atan2(ep.goal.y - pose.y, ep.goal.x - pose.x));
  ep.state.robot_pose = pose;
  ep.state.robot_twist = Twist{0.0, 0.0};

  for (const PedSpec& ps : scenario.pedestrians) {
    Pedestrian p;
    double jx = scenario.spawn_jitter > 0.0
                    ? rng.uniform(-scenario.spawn_jitter, scenario.spawn_jitter)
                    : 0.0;
    double jy = scenario.spawn_jitter > 0.0
                    ? rng.uniform(-scenario.spawn_jitter, scenario.spawn_jitter)
                    : 0.0;
    p.position = {ps.pos.x + jx, ps.pos.y + jy};
    p.velocity = {0.0, 0.0};
    p.goal = ps.goal;
    p.home = p.position;
    p.desired_speed = ps.speed;
    p.radius = ps.radius;
    ep.state.pedestrians.push_back(p);
  }
  ep.state.time = 0.0;
  return ep;
}

}  // namespace navguard::world
