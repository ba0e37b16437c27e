#include <doctest.h>

#include <cmath>
#include <memory>

#include "navguard/rng.hpp"
#include "navguard/sensing.hpp"
#include "util.hpp"

using namespace navguard;
using namespace navguard::sensing;
using testutil::make_room;
using testutil::room_state;

namespace {

std::shared_ptr<OccupancyMap> shared_room(double side = 6.0) {
  return std::make_shared<OccupancyMap>(make_room(side));
}

// Fine-marching raycast oracle: walks the ray in 1 mm steps and reports the
// first sample inside an occupied cell.
double march_ray(const OccupancyMap& map, const Vec2& o, double angle,
                 double max_range) {
  double dx = std::cos(angle), dy = std::sin(angle);
  for (double t = 0.0; t < max_range; t += 1e-3) {
    int i = map.cell_x(o.x + t * dx), j = map.cell_y(o.y + t * dy);
    if (map.occupied(i, j)) return t;
  }
  return max_range;
}

}  // namespace

TEST_CASE("raycast ranges in the empty walled room") {
  // Robot at the room center: inner wall face is 3.0 m away on-axis.
  world::WorldState s = room_state(shared_room(), {3.1, 3.1, 0.0});
  LidarScan scan = raycast_scan(s, 8, 6.0);
  CHECK(scan.ranges[0] == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(scan.ranges[2] == doctest::Approx(3.0).epsilon(1e-9));  // +y
  CHECK(scan.ranges[4] == doctest::Approx(3.0).epsilon(1e-9));  // -x
  // Diagonal ray reaches the wall at ~3*sqrt(2); one cell of slack for the
  // corner geometry.
  CHECK(scan.ranges[1] == doctest::Approx(3.0 * std::sqrt(2.0)).epsilon(0.05));
}

TEST_CASE("raycast sees a pedestrian disc") {
  world::WorldState s = room_state(shared_room(), {1.1, 3.1, 0.0});
  world::Pedestrian p;
  p.position = {3.1, 3.1};  // 2 m ahead on the +x axis
  p.radius = 0.3;
  s.pedestrians.push_back(p);
  LidarScan scan = raycast_scan(s, 4, 6.0);
  CHECK(scan.ranges[0] == doctest::Approx(1.7).epsilon(1e-9));
}

TEST_CASE("raycast ranges are clipped and rotate with the robot") {
  world::WorldState s = room_state(shared_room(12.0), {6.1, 6.1, 0.0});
  LidarScan scan = raycast_scan(s, 4, 4.0);
  for (double r : scan.ranges) CHECK(r == doctest::Approx(4.0));  // clipped
  // Heading at 90 degrees: ray 0 now measures the +y wall.
  s = room_state(shared_room(), {3.1, 2.0, M_PI / 2});
  scan = raycast_scan(s, 4, 6.0);
  CHECK(scan.ranges[0] == doctest::Approx(6.1 - 2.0).epsilon(1e-9));
}

TEST_CASE("raycast matches fine marching within a cell diagonal") {
  OccupancyMap corridor = OccupancyMap::load(testutil::data_path("maps/corridor.map"));
  auto map = std::make_shared<OccupancyMap>(corridor);
  Rng rng(5);
  double diag = corridor.resolution * std::sqrt(2.0);
  for (int k = 0; k < 5; k++) {
    Vec2 p{rng.uniform(1.0, 13.0), rng.uniform(1.0, 6.0)};
    if (corridor.occupied(corridor.cell_x(p.x), corridor.cell_y(p.y))) continue;
    world::WorldState s = room_state(map, {p.x, p.y, rng.uniform(0, 2 * M_PI)});
    LidarScan scan = raycast_scan(s, 72, 6.0);
    for (int i = 0; i < 72; i++) {
      double oracle = march_ray(*map, p, s.robot_pose.theta + 2 * M_PI * i / 72.0, 6.0);
      CHECK(std::abs(scan.ranges[i] - oracle) <= diag);
    }
  }
}

TEST_CASE("costmap with all rays at max range has no occupied cells") {
  LidarScan scan;
  scan.n_rays = 36;
  scan.max_range = 6.0;
  scan.ranges.assign(36, 6.0);
  Costmap cm = build_costmap(scan, 60);
  for (float v : cm.values) CHECK(v != 1.0f);
  // The traversed disc is free, corners beyond reach stay unknown.
  CHECK(cm.at(30, 30) == 0.0f);
  CHECK(cm.at(0, 0) == 0.5f);
}

TEST_CASE("costmap marks a single hit at the right cell") {
  LidarScan scan;
  scan.n_rays = 4;
  scan.max_range = 6.0;
  scan.ranges = {1.0, 6.0, 6.0, 6.0};
  Costmap cm = build_costmap(scan, 60);
  // Robot-frame (1, 0): cell floor((1+3)/0.1) = 40, row floor(3/0.1) = 30.
  CHECK(cm.at(40, 30) == 1.0f);
  CHECK(cm.at(35, 30) == 0.0f);  // on the ray, before the hit
  int occupied = 0;
  for (float v : cm.values) occupied += v == 1.0f;
  CHECK(occupied == 1);
}

TEST_CASE("costmap occupied ring matches the analytic room boundary") {
  world::WorldState s = room_state(shared_room(4.0), {2.1, 2.1, 0.0});
  LidarScan scan = raycast_scan(s, 360, 6.0);
  Costmap cm = build_costmap(scan, 60);
  double cell = 6.0 / 60;
  for (int j = 0; j < 60; j++) {
    for (int i = 0; i < 60; i++) {
      if (cm.at(i, j) != 1.0f) continue;
      // Cell center in robot frame; the room's inner wall is 2.0 m away on
      // each axis. Occupied cells must lie within one cell of that boundary.
      double x = (i + 0.5) * cell - 3.0;
      double y = (j + 0.5) * cell - 3.0;
      double wall_excess = std::max(std::abs(x), std::abs(y)) - 2.0;
      CHECK(wall_excess > -cell);
      CHECK(wall_excess < 2 * cell);
    }
  }
}

TEST_CASE("waypoint transforms into the robot frame") {
  world::WorldState s = room_state(shared_room(), {1, 1, M_PI / 2});
  LidarScan scan = raycast_scan(s, 4, 6.0);
  Observation obs = assemble_observation(s, scan, {1, 2});
  CHECK(obs.waypoint_rel.x == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(obs.waypoint_rel.y == doctest::Approx(0.0).epsilon(1e-12));

  s.robot_pose = {3.1, 3.1, 0.0};
  obs = assemble_observation(s, raycast_scan(s, 4, 6.0), {5.1, 3.1});
  CHECK(obs.waypoint_rel.x == doctest::Approx(2.0).epsilon(1e-12));

  s.robot_pose = {3.1, 3.1, M_PI};
  obs = assemble_observation(s, raycast_scan(s, 4, 6.0), {5.1, 3.1});
  CHECK(obs.waypoint_rel.x == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(std::abs(obs.waypoint_rel.y) < 1e-9);
}

TEST_CASE("waypoint transform round-trips within 1e-9") {
  Rng rng(23);
  auto map = shared_room();
  for (int k = 0; k < 50; k++) {
    Pose p{rng.uniform(1, 5), rng.uniform(1, 5), rng.uniform(-M_PI, M_PI)};
    Vec2 wp{rng.uniform(0, 6), rng.uniform(0, 6)};
    Vec2 rel = world_to_robot(p, wp);
    Vec2 back = robot_to_world(p, rel);
    CHECK((back - wp).norm() < 1e-9);
  }
}

TEST_CASE("ray-vector encoding layout and scaling") {
  world::WorldState s = room_state(shared_room(), {3.1, 3.1, 0.0});
  s.robot_twist = {0.75, -1.5};
  LidarScan scan = raycast_scan(s, 72, 6.0);
  Observation obs = assemble_observation(s, scan, {4.1, 3.1});
  world::RobotLimits lim;  // v_max 1.5, w_max 1.5
  std::vector<float> v = encode_ray_vector(scan, obs, 16, lim);
  REQUIRE(v.size() == 20);
  // Each bin is the min of its rays over max_range: in [0, 1].
  for (int b = 0; b < 16; b++) {
    CHECK(v[b] >= 0.0f);
    CHECK(v[b] <= 1.0f);
    double m = 6.0;
    for (int k = b * 4; k < (b + 1) * 4; k++) m = std::min(m, scan.ranges[k]);
    CHECK(v[b] == doctest::Approx(m / 6.0));
  }
  CHECK(v[16] == doctest::Approx(0.5));           // v / v_max
  CHECK(v[17] == doctest::Approx(-1.0));          // w / w_max
  CHECK(v[18] == doctest::Approx(1.0 / 6.0));     // waypoint x / side
  CHECK(v[19] == doctest::Approx(0.0));
}

TEST_CASE("scan hit points are robot-frame endpoints of real hits") {
  LidarScan scan;
  scan.n_rays = 4;
  scan.max_range = 6.0;
  scan.ranges = {2.0, 6.0, 1.0, 6.0};
  std::vector<Vec2> pts = scan_hit_points(scan);
  REQUIRE(pts.size() == 2);
  CHECK(pts[0].x == doctest::Approx(2.0));
  CHECK(pts[0].y == doctest::Approx(0.0));
  CHECK(pts[1].x == doctest::Approx(-1.0));
  CHECK(std::abs(pts[1].y) < 1e-12);
}
