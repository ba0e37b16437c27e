#pragma once

#include <cmath>

namespace navguard {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
  Vec2 unit() const {
    double n = norm();
    return n > 0.0 ? Vec2{x / n, y / n} : Vec2{0.0, 0.0};
  }
};

// Normalizes an angle into (-pi, pi].
inline double normalize_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // (-pi, pi]

  Vec2 position() const { return {x, y}; }
};

struct Twist {
  double v = 0.0;  // m/s
  double w = 0.0;  // rad/s
};

// Exact unicycle arc integration; falls back to a straight segment when
// the angular rate is negligible.
inline Pose step_unicycle(const Pose& p, const Twist& u, double dt) {
  Pose out;
  if (std::abs(u.w) < 1e-6) {
    out.x = p.x + u.v * dt * std::cos(p.theta);
    out.y = p.y + u.v * dt * std::sin(p.theta);
    out.theta = normalize_angle(p.theta + u.w * dt);
  } else {
    double r = u.v / u.w;
    double th1 = p.theta + u.w * dt;
    out.x = p.x + r * (std::sin(th1) - std::sin(p.theta));
    out.y = p.y - r * (std::cos(th1) - std::cos(p.theta));
    out.theta = normalize_angle(th1);
  }
  return out;
}

// Transforms a world-frame point into the robot frame of `p`.
inline Vec2 world_to_robot(const Pose& p, const Vec2& q) {
  double dx = q.x - p.x;
  double dy = q.y - p.y;
  double c = std::cos(p.theta), s = std::sin(p.theta);
  return {c * dx + s * dy, -s * dx + c * dy};
}

inline Vec2 robot_to_world(const Pose& p, const Vec2& q) {
  double c = std::cos(p.theta), s = std::sin(p.theta);
  return {p.x + c * q.x - s * q.y, p.y + s * q.x + c * q.y};
}

inline double clampd(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

}  // namespace navguard
