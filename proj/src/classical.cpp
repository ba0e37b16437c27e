#include "navguard/classical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "navguard/errors.hpp"

namespace navguard::classical {

double GlobalPath::arc_length() const {
  double s = 0.0;
  for (size_t i = 1; i < waypoints.size(); i++)
    s += (waypoints[i] - waypoints[i - 1]).norm();
  return s;
}

double GlobalPath::nearest_arc(const Vec2& p) const {
  double best_d = std::numeric_limits<double>::infinity();
  double best_s = 0.0, s = 0.0;
  for (size_t i = 0; i < waypoints.size(); i++) {
    if (i > 0) s += (waypoints[i] - waypoints[i - 1]).norm();
    double d = (waypoints[i] - p).norm();
    if (d < best_d) {
      best_d = d;
      best_s = s;
    }
  }
  return best_s;
}

Vec2 GlobalPath::point_at_arc(double s) const {
  if (waypoints.empty()) return {0.0, 0.0};
  if (s <= 0.0) return waypoints.front();
  double acc = 0.0;
  for (size_t i = 1; i < waypoints.size(); i++) {
    double seg = (waypoints[i] - waypoints[i - 1]).norm();
    if (acc + seg >= s) {
      double t = seg > 0.0 ? (s - acc) / seg : 0.0;
      return waypoints[i - 1] + (waypoints[i] - waypoints[i - 1]) * t;
    }
    acc += seg;
  }
  return waypoints.back();
}

namespace {

struct AStarNode {
  double f;
  double g;
  int idx;
  bool operator>(const AStarNode& o) const {
    return f > o.f || (f == o.f && idx > o.idx);
  }
};

double octile(int dx, int dy) {
  dx = std::abs(dx);
  dy = std::abs(dy);
  int lo = std::min(dx, dy), hi = std::max(dx, dy);
  return hi - lo + lo * std::sqrt(2.0);
}

}  // namespace

GlobalPath plan_global(const OccupancyMap& map, const Vec2& start,
                       const Vec2& goal, double inflation_radius) {
  std::vector<uint8_t> blocked = map.inflated(inflation_radius);
  int w = map.width, h = map.height;
  int si = map.cell_x(start.x), sj = map.cell_y(start.y);
  int gi = map.cell_x(goal.x), gj = map.cell_y(goal.y);
  auto id = [&](int i, int j) { return j * w + i; };
  if (!map.in_bounds(si, sj) || !map.in_bounds(gi, gj))
    throw NoPath("start or goal outside map");
  if (blocked[id(si, sj)]) throw NoPath("start inside inflated obstacle");
  if (blocked[id(gi, gj)]) throw NoPath("goal inside inflated obstacle");

  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> g(static_cast<size_t>(w) * h, kInf);
  std::vector<int> parent(static_cast<size_t>(w) * h, -1);
  std::priority_queue<AStarNode, std::vector<AStarNode>, std::greater<>> open;
  g[id(si, sj)] = 0.0;
  open.push({octile(gi - si, gj - sj), 0.0, id(si, sj)});

  static const int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  static const int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};
  static const double kCost[8] = {1, 1, 1, 1, M_SQRT2, M_SQRT2, M_SQRT2, M_SQRT2};

  int goal_idx = id(gi, gj);
  while (!open.empty()) {
    AStarNode n = open.top();
    open.pop();
    if (n.g > g[n.idx]) continue;
    if (n.idx == goal_idx) break;
    int ci = n.idx % w, cj = n.idx / w;
    for (int k = 0; k < 8; k++) {
      int ni = ci + kDx[k], nj = cj + kDy[k];
      if (ni < 0 || ni >= w || nj < 0 || nj >= h) continue;
      int nid = id(ni, nj);
      if (blocked[nid]) continue;
      // No corner cutting on diagonal moves.
      if (k >= 4 && (blocked[id(ci + kDx[k], cj)] || blocked[id(ci, cj + kDy[k])]))
        continue;
      double ng = n.g + kCost[k];
      if (ng < g[nid]) {
        g[nid] = ng;
        parent[nid] = n.idx;
        open.push({ng + octile(gi - ni, gj - nj), ng, nid});
      }
    }
  }
  if (g[goal_idx] == kInf) throw NoPath("goal unreachable");

  std::vector<int> rev;
  for (int cur = goal_idx; cur != -1; cur = parent[cur]) rev.push_back(cur);
  std::reverse(rev.begin(), rev.end());

  GlobalPath path;
  path.resolution_m = map.resolution;
  path.grid_cost_cells = g[goal_idx];
  for (int idx : rev) path.waypoints.push_back(map.cell_center(idx % w, idx / w));
  // End exactly at the requested goal point (stays inside the goal cell).
  path.waypoints.push_back(goal);
  return path;
}

Vec2 extract_waypoint(const GlobalPath& path, const Pose& robot,
                      double lookahead) {
  double s = path.nearest_arc(robot.position());
  return path.point_at_arc(s + lookahead);
}

bool rollout_collides(const Pose& start, const Twist& cmd, double sim_time,
                      double dt, const std::vector<Vec2>& obstacles_world,
                      double robot_radius) {
  Pose p = start;
  int steps = static_cast<int>(std::round(sim_time / dt));
  for (int k = 0; k < steps; k++) {
    p = step_unicycle(p, cmd, dt);
    for (const Vec2& o : obstacles_world)
      if ((o - p.position()).norm() <= robot_radius) return true;
  }
  return false;
}

ExpertAction dwa_action(const world::WorldState& state,
                        const sensing::LidarScan& scan, const Vec2& waypoint,
                        const DwaConfig& cfg) {
  const world::RobotLimits& lim = state.params.limits;
  std::vector<Vec2> obstacles;
  for (const Vec2& hit : sensing::scan_hit_points(scan))
    obstacles.push_back(robot_to_world(state.robot_pose, hit));

  double v0 = state.robot_twist.v, w0 = state.robot_twist.w;
  double v_lo = std::max(0.0, v0 - cfg.accel_v * cfg.dt);
  double v_hi = std::min(lim.v_max, v0 + cfg.accel_v * cfg.dt);
  double w_lo = std::max(-lim.w_max, w0 - cfg.accel_w * cfg.dt);
  double w_hi = std::min(lim.w_max, w0 + cfg.accel_w * cfg.dt);

  struct Sample {
    Twist cmd;
    double heading, clearance, velocity;
  };
  std::vector<Sample> admissible;
  for (int iv = 0; iv < cfg.v_samples; iv++) {
    double v = cfg.v_samples > 1
                   ? v_lo + (v_hi - v_lo) * iv / (cfg.v_samples - 1)
                   : v_lo;
    for (int iw = 0; iw < cfg.w_samples; iw++) {
      double w = cfg.w_samples > 1
                     ? w_lo + (w_hi - w_lo) * iw / (cfg.w_samples - 1)
                     : w_lo;
      Twist cmd{v, w};
      if (rollout_collides(state.robot_pose, cmd, cfg.sim_time, cfg.dt,
                           obstacles, lim.radius))
        continue;
      // Final rollout pose for heading / clearance scoring.
      Pose p = state.robot_pose;
      double min_clear = cfg.clearance_cap;
      int steps = static_cast<int>(std::round(cfg.sim_time / cfg.dt));
      for (int k = 0; k < steps; k++) {
        p = step_unicycle(p, cmd, cfg.dt);
        for (const Vec2& o : obstacles)
          min_clear = std::min(min_clear, (o - p.position()).norm() - lim.radius);
      }
      double bearing = std::atan2(waypoint.y - p.y, waypoint.x - p.x);
      double err = std::abs(normalize_angle(bearing - p.theta));
      admissible.push_back({cmd, M_PI - err, min_clear, v});
    }
  }
  if (admissible.empty()) return {Twist{0.0, 0.0}, false};

  auto normalize = [&](auto get) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const Sample& s : admissible) {
      lo = std::min(lo, get(s));
      hi = std::max(hi, get(s));
    }
    std::vector<double> out(admissible.size());
    for (size_t i = 0; i < admissible.size(); i++)
      out[i] = hi - lo > 1e-12 ? (get(admissible[i]) - lo) / (hi - lo) : 0.0;
    return out;
  };
  std::vector<double> nh = normalize([](const Sample& s) { return s.heading; });
  std::vector<double> nc = normalize([](const Sample& s) { return s.clearance; });
  std::vector<double> nv = normalize([](const Sample& s) { return s.velocity; });

  size_t best = 0;
  double best_score = -1.0;
  for (size_t i = 0; i < admissible.size(); i++) {
    double score = cfg.weight_heading * nh[i] + cfg.weight_clearance * nc[i] +
                   cfg.weight_velocity * nv[i];
    const Twist& c = admissible[i].cmd;
    const Twist& b = admissible[best].cmd;
    bool better = score > best_score;
    if (!better && score == best_score) {
      // Deterministic tie-break: lowest |w|, then lowest v.
      better = std::abs(c.w) < std::abs(b.w) ||
               (std::abs(c.w) == std::abs(b.w) && c.v < b.v);
    }
    if (better) {
      best = i;
      best_score = score;
    }
  }
  return {admissible[best].cmd, true};
}

Twist pure_pursuit_action(const Pose& robot, const Vec2& waypoint,
                          double v_fixed, double w_max) {
  Vec2 rel = world_to_robot(robot, waypoint);
  if (rel.x < 0.0) {
    // Waypoint behind: rotate in place toward it.
    double w = rel.y >= 0.0 ? w_max : -w_max;
    return {0.0, w};
  }
  double l2 = rel.x * rel.x + rel.y * rel.y;
  if (l2 < 1e-12) return {0.0, 0.0};
  double curvature = 2.0 * rel.y / l2;
  return {v_fixed, clampd(v_fixed * curvature, -w_max, w_max)};
}

Twist backoff_action() { return {-0.2, 0.0}; }

}  // namespace navguard::classical
