#pragma once

#include <cmath>
#include <optional>

#include "mergesim/road.hpp"
#include "mergesim/vehicle.hpp"

namespace mergesim {

// Pose and feedforward of the virtual robot a vehicle tracks.
struct ReferenceState {
  double x{};
  double y{};
  double theta{};
  double v{};      // >= 0
  double omega{};
};

struct TrackingGains {
  double zeta{0.8};  // damping ratio, in (0, 1)
  double b{70.0};    // > 0
};

struct GainTriple {
  double k1{};
  double k2{};
  double k3{};
};

// Gain schedule evaluated at the reference speeds:
//   k1 = k2 = 2*zeta*sqrt(omega_d^2 + b*v_d^2),  k3 = b*v_d.
// At a standstill reference all gains vanish and the commanded input is zero,
// which holds a stopped vehicle in place.
inline GainTriple compute_gains(double v_d, double omega_d,
                                const TrackingGains& g) {
  require(g.zeta > 0.0 && g.zeta < 1.0, "compute_gains: zeta outside (0, 1)");
  require(g.b > 0.0, "compute_gains: b must be positive");
  const double k12 =
      2.0 * g.zeta * std::sqrt(omega_d * omega_d + g.b * v_d * v_d);
  return {k12, k12, g.b * v_d};
}

// Reference-tracking control law.  Position errors are expressed in the
// vehicle body frame; the heading error is wrapped so the correction never
// takes the long way around.
inline ControlInput tracking_control(const VehicleState& s,
                                     const ReferenceState& ref,
                                     const TrackingGains& gains) {
  const GainTriple k = compute_gains(ref.v, ref.omega, gains);
  const double dx = ref.x - s.x;
  const double dy = ref.y - s.y;
  const double c = std::cos(s.theta);
  const double sn = std::sin(s.theta);
  const double e_fwd = dx * c + dy * sn;
  const double e_lat = dy * c - dx * sn;
  const double e_th = wrap_angle(ref.theta - s.theta);
  const double sgn = ref.v < 0.0 ? -1.0 : 1.0;
  return {ref.v * std::cos(e_th) + k.k1 * e_fwd,
          ref.omega + k.k2 * sgn * e_lat + k.k3 * e_th};
}

struct VirtualRobotResult {
  ReferenceState ref;
  std::size_t active_index{};
};

// Advances the virtual robot one step: the route field fixes the direction
// (and the reference heading), the speed command fixes the distance moved.
// The feedforward yaw rate is the finite difference of the heading.  Returns
// nullopt when the reference leaves the road.
inline std::optional<VirtualRobotResult> virtual_robot_step(
    const ReferenceState& ref, const Route& route, std::size_t active_index,
    double speed_command, double dt) {
  require(dt > 0.0, "virtual_robot_step: dt must be positive");
  require(speed_command >= 0.0, "virtual_robot_step: negative speed command");
  const auto rf = evaluate_route_field({ref.x, ref.y}, route, active_index);
  if (!rf) return std::nullopt;
  const Vec2 dir = rf->field.normalized();
  const double theta_new = std::atan2(dir.y, dir.x);
  ReferenceState out;
  out.x = ref.x + speed_command * dt * dir.x;
  out.y = ref.y + speed_command * dt * dir.y;
  out.theta = theta_new;
  out.v = speed_command;
  out.omega = wrap_angle(theta_new - ref.theta) / dt;
  return VirtualRobotResult{out, rf->active_index};
}

}  // namespace mergesim
