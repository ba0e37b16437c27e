#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "navguard/geometry.hpp"

namespace navguard {

// Axis-aligned rectangle of cells, inclusive bounds.
struct Room {
  std::string name;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

// Static binary occupancy grid. Row y=0 corresponds to the first grid line
// of the map file; cell (i, j) covers [i*res, (i+1)*res) x [j*res, (j+1)*res).
class OccupancyMap {
 public:
  int width = 0;
  int height = 0;
  double resolution = 0.1;        // meters / cell
  double inflation_radius = 0.4;  // meters, used by the global planner
  std::vector<uint8_t> cells;     // 1 = occupied
  std::vector<Room> rooms;

  static OccupancyMap load(const std::string& path);
  void save(const std::string& path) const;

  bool in_bounds(int i, int j) const {
    return i >= 0 && i < width && j >= 0 && j < height;
  }
  bool occupied(int i, int j) const {
    return !in_bounds(i, j) || cells[static_cast<size_t>(j) * width + i] != 0;
  }
  int cell_x(double x) const { return static_cast<int>(std::floor(x / resolution)); }
  int cell_y(double y) const { return static_cast<int>(std::floor(y / resolution)); }
  Vec2 cell_center(int i, int j) const {
    return {(i + 0.5) * resolution, (j + 0.5) * resolution};
  }
  double width_m() const { return width * resolution; }
  double height_m() const { return height * resolution; }

  const Room* find_room(const std::string& name) const;

  // Exact Euclidean distance (meters) from each cell center to the nearest
  // occupied cell center. Computed lazily, cached.
  const std::vector<double>& clearance_field() const;

  // Distance from an arbitrary point to the boundary of the nearest occupied
  // cell rectangle. Exact (matches an exhaustive scan over occupied cells).
  double distance_to_occupied(const Vec2& p) const;

  // Same, but also reports the closest boundary point.
  double distance_to_occupied(const Vec2& p, Vec2* closest) const;

  // Occupancy grid inflated by `radius` meters (center-to-center metric).
  std::vector<uint8_t> inflated(double radius) const;

  void validate() const;  // boundary closed, sizes consistent

 private:
  mutable std::vector<double> clearance_;  // cache
};

// Exact squared Euclidean distance transform (Felzenszwalb-Huttenlocher),
// distances in cell units squared. Input: 1 = feature (occupied).
std::vector<double> squared_edt(const std::vector<uint8_t>& grid, int width,
                                int height);

}  // namespace navguard
