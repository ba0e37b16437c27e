#pragma once

#include <vector>

#include "navguard/geometry.hpp"
#include "navguard/world.hpp"

namespace navguard::sensing {

struct LidarScan {
  int n_rays = 0;
  double max_range = 6.0;
  std::vector<double> ranges;  // meters, ray i at robot_theta + 2*pi*i/n
};

// Robot-centered, heading-aligned square grayscale grid.
// 1 = occupied, 0 = free, 0.5 = unknown.
struct Costmap {
  double side_m = 6.0;
  int cells_per_side = 60;
  std::vector<float> values;

  float at(int i, int j) const {
    return values[static_cast<size_t>(j) * cells_per_side + i];
  }
};

struct Observation {
  Costmap costmap;
  Twist velocity;
  Vec2 waypoint_rel;  // waypoint in robot frame
};

// 360-degree raycast against occupied cells (DDA traversal) and pedestrian
// discs. Ranges clipped to max_range.
LidarScan raycast_scan(const world::WorldState& state, int n_rays,
                       double max_range);

// Marks ray endpoints occupied, traversed cells free, untouched cells 0.5.
Costmap build_costmap(const LidarScan& scan, int cells_per_side,
                      double side_m = 6.0);

Observation assemble_observation(const world::WorldState& state,
                                 const LidarScan& scan, const Vec2& waypoint);

// Flat network input for the ray-vector observation mode: ranges min-pooled
// into n_down bins and scaled to [0,1], then v/v_max, w/w_max, waypoint/side.
std::vector<float> encode_ray_vector(const LidarScan& scan,
                                     const Observation& obs, int n_down,
                                     const world::RobotLimits& limits);

// Obstacle points in the robot frame (ray endpoints with a hit). This is the
// scan-derived geometry the DWA expert plans against.
std::vector<Vec2> scan_hit_points(const LidarScan& scan);

}  // namespace navguard::sensing
