#pragma once

#include <memory>
#include <string>
#include <vector>

#include "navguard/geometry.hpp"
#include "navguard/map.hpp"
#include "navguard/rng.hpp"

namespace navguard::world {

struct Pedestrian {
  Vec2 position;
  Vec2 velocity;
  Vec2 goal;
  Vec2 home;  // patrol origin; goal and home swap on arrival
  double desired_speed = 1.0;
  double radius = 0.25;
};

struct SocialForceParams {
  double relaxation_time = 0.5;  // s
  double repulsion_strength_A = 2.0;
  double repulsion_range_B = 0.3;  // m
  double wall_strength = 2.0;
  double wall_range = 0.3;  // m
  double max_speed = 3.0;   // absolute ceiling; per-ped cap is 1.5 * desired
};

struct RobotLimits {
  double v_max = 1.5;    // m/s, commands clamped to [0, v_max]
  double w_max = 1.5;    // rad/s
  double accel_v = 2.0;  // m/s^2
  double accel_w = 4.0;  // rad/s^2
  double radius = 0.3;   // m
};

struct WorldParams {
  RobotLimits limits;
  SocialForceParams social;
  double dt = 0.1;  // s, one control tick
};

struct WorldState {
  std::shared_ptr<const OccupancyMap> map;
  WorldParams params;
  Pose robot_pose;
  Twist robot_twist;
  std::vector<Pedestrian> pedestrians;
  double time = 0.0;
  uint64_t rng_seed = 0;
  bool collided = false;  // set by the last step_robot
};

// Scenario descriptor loaded from file (JSON).
struct PedSpec {
  Vec2 pos;
  Vec2 goal;
  double speed = 1.0;
  double radius = 0.25;
};

struct Scenario {
  std::string name;
  WorldParams world_params;  // copied into every episode's WorldState
  std::string map_path;
  std::shared_ptr<const OccupancyMap> map;
  std::string start_room;
  std::string goal_room;
  std::vector<PedSpec> pedestrians;
  double spawn_jitter = 0.0;  // m, uniform jitter applied to ped spawn points

  static Scenario load(const std::string& path);
};

struct EpisodeStart {
  WorldState state;
  Vec2 goal;  // goal-room center, the global-plan target
};

// Exact-arc kinematic update with velocity/acceleration clamping. On contact
// the robot is stopped in place and `collided` is raised; physics continues.
WorldState step_robot(const WorldState& state, const Twist& cmd, double dt);

// Social-force pedestrian update (explicit Euler, one step).
WorldState step_pedestrians(const WorldState& state, double dt);

// Minimum of (distance to nearest occupied cell boundary - robot radius) and
// (center distance to each pedestrian - both radii); floored at zero.
double distance_to_nearest_obstacle(const WorldState& state);

// Signed variant (can be negative in penetration); used for contact checks.
double robot_clearance_signed(const WorldState& state, const Pose& pose);

// Deterministic spawn: robot collision-free inside the start room, heading
// toward the goal-room center; pedestrians per scenario spec.
EpisodeStart reset_episode(const Scenario& scenario, uint64_t seed);

}  // namespace navguard::world
