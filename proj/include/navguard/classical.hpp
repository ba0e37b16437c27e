#pragma once

#include <vector>

#include "navguard/geometry.hpp"
#include "navguard/map.hpp"
#include "navguard/sensing.hpp"
#include "navguard/world.hpp"

namespace navguard::classical {

struct GlobalPath {
  std::vector<Vec2> waypoints;
  double resolution_m = 0.1;   // nominal spacing
  double grid_cost_cells = 0;  // A* cost in cell units (Euclidean steps)

  double arc_length() const;
  // Arc position (meters from the start) of the path point nearest to `p`.
  double nearest_arc(const Vec2& p) const;
  // Point at arc position `s`, clamped to [0, length].
  Vec2 point_at_arc(double s) const;
};

struct DwaConfig {
  int v_samples = 5;
  int w_samples = 9;
  double sim_time = 1.0;     // s
  double dt = 0.1;           // s, rollout step
  double accel_v = 2.0;      // m/s^2
  double accel_w = 4.0;      // rad/s^2
  double weight_heading = 0.8;
  double weight_clearance = 0.2;
  double weight_velocity = 0.2;
  double clearance_cap = 2.0;  // m, clearance saturates here
};

struct ExpertAction {
  Twist twist;
  bool feasible = true;  // false when every sampled rollout collides
};

// 8-connected A* on the inflated grid; throws NoPath when unreachable.
GlobalPath plan_global(const OccupancyMap& map, const Vec2& start,
                       const Vec2& goal, double inflation_radius);

// First path point at arc distance >= lookahead beyond the nearest point;
// the final goal when the remaining path is shorter.
Vec2 extract_waypoint(const GlobalPath& path, const Pose& robot,
                      double lookahead);

// DWA over the scan-derived obstacle points (the expert sees the same
// geometry as the learner, not ground truth).
ExpertAction dwa_action(const world::WorldState& state,
                        const sensing::LidarScan& scan, const Vec2& waypoint,
                        const DwaConfig& cfg);

// Pure pursuit toward a close waypoint at fixed low speed; rotates in place
// when the waypoint is behind the robot.
Twist pure_pursuit_action(const Pose& robot, const Vec2& waypoint,
                          double v_fixed, double w_max);

// Fixed reverse twist used below the hard safety threshold.
Twist backoff_action();

// Shared rollout collision predicate (also used by the acceptance oracle):
// true if any rollout pose comes within robot_radius of an obstacle point.
bool rollout_collides(const Pose& start, const Twist& cmd, double sim_time,
                      double dt, const std::vector<Vec2>& obstacles_world,
                      double robot_radius);

}  // namespace navguard::classical
