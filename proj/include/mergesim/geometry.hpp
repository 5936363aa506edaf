#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace mergesim {

struct Vec2 {
  double x{};
  double y{};

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double k) const { return {x * k, y * k}; }
  Vec2 operator-() const { return {-x, -y}; }

  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  // z-component of the 2D cross product this x o.
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }

  Vec2 normalized() const {
    const double n = norm();
    if (n <= 0.0) throw std::domain_error("Vec2::normalized: zero vector");
    return {x / n, y / n};
  }

  // Counter-clockwise rotation by `angle` radians.
  Vec2 rotated(double angle) const {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * x - s * y, s * x + c * y};
  }
};

inline Vec2 operator*(double k, const Vec2& v) { return v * k; }

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double kPi = 3.14159265358979323846;
  double r = std::fmod(a + kPi, 2.0 * kPi);
  if (r <= 0.0) r += 2.0 * kPi;
  return r - kPi;
}

// Wraps an angle to [0, 2*pi).
inline double wrap_angle_positive(double a) {
  constexpr double kTwoPi = 2.0 * 3.14159265358979323846;
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  return r;
}

inline double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

// Precondition helper for plain input errors (bad arguments, misuse of an
// API).  Scenario-level problems use ScenarioError/SimError instead.
inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace mergesim
