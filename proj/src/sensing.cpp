#include "navguard/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace navguard::sensing {

namespace {

// Amanatides-Woo grid traversal; returns distance to the entry face of the
// first occupied cell, or max_range.
double cast_ray_grid(const OccupancyMap& map, const Vec2& origin, double angle,
                     double max_range) {
  double dx = std::cos(angle), dy = std::sin(angle);
  int ix = map.cell_x(origin.x), iy = map.cell_y(origin.y);
  if (map.occupied(ix, iy)) return 0.0;

  int step_x = dx > 0 ? 1 : -1;
  int step_y = dy > 0 ? 1 : -1;
  double res = map.resolution;
  double inf = std::numeric_limits<double>::infinity();
  double t_max_x = inf, t_delta_x = inf;
  double t_max_y = inf, t_delta_y = inf;
  if (std::abs(dx) > 1e-12) {
    double next_x = (dx > 0 ? (ix + 1) * res : ix * res);
    t_max_x = (next_x - origin.x) / dx;
    t_delta_x = res / std::abs(dx);
  }
  if (std::abs(dy) > 1e-12) {
    double next_y = (dy > 0 ? (iy + 1) * res : iy * res);
    t_max_y = (next_y - origin.y) / dy;
    t_delta_y = res / std::abs(dy);
  }
  double t_entry = 0.0;
  while (t_entry <= max_range) {
    if (t_max_x < t_max_y) {
      t_entry = t_max_x;
      t_max_x += t_delta_x;
      ix += step_x;
    } else {
      t_entry = t_max_y;
      t_max_y += t_delta_y;
      iy += step_y;
    }
    if (t_entry > max_range) break;
    if (map.occupied(ix, iy)) return t_entry;
  }
  return max_range;
}

// Smallest positive intersection distance with a disc, or +inf.
double cast_ray_disc(const Vec2& origin, double angle, const Vec2& center,
                     double radius) {
  Vec2 d{std::cos(angle), std::sin(angle)};
  Vec2 oc = origin - center;
  double b = oc.dot(d);
  double c = oc.dot(oc) - radius * radius;
  double disc = b * b - c;
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  double s = std::sqrt(disc);
  double t = -b - s;
  if (t < 0.0) t = -b + s;
  if (t < 0.0) return std::numeric_limits<double>::infinity();
  return t;
}

}  // namespace

LidarScan raycast_scan(const world::WorldState& state, int n_rays,
                       double max_range) {
  LidarScan scan;
  scan.n_rays = n_rays;
  scan.max_range = max_range;
  scan.ranges.resize(n_rays);
  Vec2 origin = state.robot_pose.position();
  for (int i = 0; i < n_rays; i++) {
    double angle = state.robot_pose.theta + 2.0 * M_PI * i / n_rays;
    double r = cast_ray_grid(*state.map, origin, angle, max_range);
    for (const world::Pedestrian& p : state.pedestrians) {
      double rp = cast_ray_disc(origin, angle, p.position, p.radius);
      r = std::min(r, rp);
    }
    scan.ranges[i] = std::min(r, max_range);
  }
  return scan;
}

Costmap build_costmap(const LidarScan& scan, int cells_per_side,
                      double side_m) {
  Costmap cm;
  cm.side_m = side_m;
  cm.cells_per_side = cells_per_side;
  cm.values.assign(static_cast<size_t>(cells_per_side) * cells_per_side, 0.5f);
  double half = side_m / 2.0;
  double cell = side_m / cells_per_side;
  auto cell_of = [&](double x, double y, int& i, int& j) {
    i = static_cast<int>(std::floor((x + half) / cell));
    j = static_cast<int>(std::floor((y + half) / cell));
    return i >= 0 && i < cells_per_side && j >= 0 && j < cells_per_side;
  };

  // Free space along each ray first; hits overwrite afterwards so an endpoint
  // shared with another ray's traversal stays occupied.
  for (int r = 0; r < scan.n_rays; r++) {
    double angle = 2.0 * M_PI * r / scan.n_rays;  // robot frame
    double range = scan.ranges[r];
    double dx = std::cos(angle), dy = std::sin(angle);
    for (double t = 0.0; t < range; t += cell * 0.5) {
      int i, j;
      if (cell_of(t * dx, t * dy, i, j))
        cm.values[static_cast<size_t>(j) * cells_per_side + i] = 0.0f;
    }
  }
  for (int r = 0; r < scan.n_rays; r++) {
    if (scan.ranges[r] >= scan.max_range) continue;
    double angle = 2.0 * M_PI * r / scan.n_rays;
    int i, j;
    if (cell_of(scan.ranges[r] * std::cos(angle), scan.ranges[r] * std::sin(angle),
                i, j))
      cm.values[static_cast<size_t>(j) * cells_per_side + i] = 1.0f;
  }
  return cm;
}

Observation assemble_observation(const world::WorldState& state,
                                 const LidarScan& scan, const Vec2& waypoint) {
  Observation obs;
  obs.costmap = build_costmap(scan, 60, 6.0);
  obs.velocity = state.robot_twist;
  obs.waypoint_rel = world_to_robot(state.robot_pose, waypoint);
  return obs;
}

std::vector<float> encode_ray_vector(const LidarScan& scan,
                                     const Observation& obs, int n_down,
                                     const world::RobotLimits& limits) {
  std::vector<float> out;
  out.reserve(n_down + 4);
  int per_bin = std::max(1, scan.n_rays / n_down);
  for (int b = 0; b < n_down; b++) {
    double m = scan.max_range;
    for (int k = b * per_bin; k < (b + 1) * per_bin && k < scan.n_rays; k++)
      m = std::min(m, scan.ranges[k]);
    out.push_back(static_cast<float>(m / scan.max_range));
  }
  out.push_back(static_cast<float>(obs.velocity.v / limits.v_max));
  out.push_back(static_cast<float>(obs.velocity.w / limits.w_max));
  out.push_back(static_cast<float>(obs.waypoint_rel.x / obs.costmap.side_m));
  out.push_back(static_cast<float>(obs.waypoint_rel.y / obs.costmap.side_m));
  return out;
}

std::vector<Vec2> scan_hit_points(const LidarScan& scan) {
  std::vector<Vec2> pts;
  for (int i = 0; i < scan.n_rays; i++) {
    if (scan.ranges[i] < scan.max_range) {
      double a = 2.0 * M_PI * i / scan.n_rays;
      pts.push_back({scan.ranges[i] * std::cos(a), scan.ranges[i] * std::sin(a)});
    }
  }
  return pts;
}

}  // namespace navguard::sensing
