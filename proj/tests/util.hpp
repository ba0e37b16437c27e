#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "navguard/map.hpp"
#include "navguard/world.hpp"

namespace navguard::testutil {

inline std::string data_path(const std::string& rel) {
  return std::string(NAVGUARD_DATA_DIR) + "/" + rel;
}

// Square room with 1-cell walls and an interior of exactly side_m meters.
inline OccupancyMap make_room(double side_m = 6.0, double res = 0.1) {
  OccupancyMap m;
  int interior = static_cast<int>(std::lround(side_m / res));
  m.width = m.height = interior + 2;
  m.resolution = res;
  m.cells.assign(static_cast<size_t>(m.width) * m.height, 0);
  for (int i = 0; i < m.width; i++) {
    m.cells[i] = 1;
    m.cells[static_cast<size_t>(m.height - 1) * m.width + i] = 1;
  }
  for (int j = 0; j < m.height; j++) {
    m.cells[static_cast<size_t>(j) * m.width] = 1;
    m.cells[static_cast<size_t>(j) * m.width + m.width - 1] = 1;
  }
  return m;
}

// The canonical 6x6 m test room with one square pillar near the middle.
inline OccupancyMap make_pillar_map() {
  OccupancyMap m = make_room(6.0, 0.1);
  for (int j = 25; j < 32; j++)
    for (int i = 38; i < 45; i++)
      m.cells[static_cast<size_t>(j) * m.width + i] = 1;
  return m;
}

// Exhaustive-scan oracle for distance to the nearest occupied rectangle.
inline double brute_distance_to_occupied(const OccupancyMap& m, const Vec2& p) {
  double best = 1e18;
  for (int j = 0; j < m.height; j++) {
    for (int i = 0; i < m.width; i++) {
      if (!m.cells[static_cast<size_t>(j) * m.width + i]) continue;
      double x0 = i * m.resolution, y0 = j * m.resolution;
      double dx = std::max({x0 - p.x, 0.0, p.x - x0 - m.resolution});
      double dy = std::max({y0 - p.y, 0.0, p.y - y0 - m.resolution});
      best = std::min(best, std::hypot(dx, dy));
    }
  }
  return best;
}

inline world::WorldState room_state(const std::shared_ptr<OccupancyMap>& map,
                                    const Pose& pose, double robot_radius = 0.0) {
  world::WorldState s;
  s.map = map;
  s.params.limits.radius = robot_radius;
  s.robot_pose = pose;
  return s;
}

}  // namespace navguard::testutil
