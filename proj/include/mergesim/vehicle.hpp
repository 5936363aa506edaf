#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>

#include "mergesim/geometry.hpp"

namespace mergesim {

struct VehicleState {
  double x{};
  double y{};
  double theta{};  // wrapped to (-pi, pi]
};

struct ControlInput {
  double v{};      // forward speed, m/s
  double omega{};  // yaw rate, rad/s
};

struct WheelSpeeds {
  double right{};  // wheel angular speed, rad/s
  double left{};
};

// Differential-drive platform constants.
struct DriveGeometry {
  double wheel_radius{0.016};  // m
  double track_width{0.09};    // m, distance between wheel contact points
  double encoder_cpr{12.0};    // encoder counts per motor revolution
  double gear_ratio{75.81};    // motor revolutions per wheel revolution
  double v_sat{0.7};           // m/s, speed at full duty

  // counts per radian of wheel rotation (~144.78 with the defaults)
  double counts_per_wheel_rad() const {
    return encoder_cpr * gear_ratio / (2.0 * 3.14159265358979323846);
  }
  double max_wheel_speed() const { return v_sat / wheel_radius; }
};

namespace detail {
// sin(u)/u, series-expanded near zero so the arc update below stays exact as
// omega -> 0.
inline double sinc(double u) {
  if (std::abs(u) < 1e-4) {
    const double u2 = u * u;
    return 1.0 - u2 / 6.0 + u2 * u2 / 120.0;
  }
  return std::sin(u) / u;
}
}  // namespace detail

// Exact integration of the unicycle kinematics under a piecewise-constant
// input.  Writing h = omega*dt, the circular-arc displacement is
//   dx = v*dt * sinc(h/2) * cos(theta + h/2)
//   dy = v*dt * sinc(h/2) * sin(theta + h/2)
// which degenerates smoothly to the straight-line update at omega = 0.
// Because this is the exact flow, stepping dt twice equals stepping 2*dt.
inline VehicleState unicycle_step(const VehicleState& state,
                                  const ControlInput& input, double dt) {
  require(dt > 0.0, "unicycle_step: dt must be positive");
  require(std::isfinite(input.v) && std::isfinite(input.omega),
          "unicycle_step: non-finite input");
  const double h = input.omega * dt;
  const double half = 0.5 * h;
  const double chord = input.v * dt * detail::sinc(half);
  return {state.x + chord * std::cos(state.theta + half),
          state.y + chord * std::sin(state.theta + half),
          wrap_angle(state.theta + h)};
}

// v = R*(wr + wl)/2, omega = R*(wr - wl)/d.
inline WheelSpeeds input_to_wheel_speeds(const ControlInput& in,
                                         const DriveGeometry& g) {
  const double base = in.v / g.wheel_radius;
  const double diff = in.omega * g.track_width / (2.0 * g.wheel_radius);
  return {base + diff, base - diff};
}

inline ControlInput wheel_speeds_to_input(const WheelSpeeds& w,
                                          const DriveGeometry& g) {
  return {g.wheel_radius * (w.right + w.left) / 2.0,
          g.wheel_radius * (w.right - w.left) / g.track_width};
}

struct EncoderResult {
  long counts{};
  double residual{};  // fractional count carried to the next sample, [0, 1)
};

// Integer encoder counts accumulated over one sample of length dt at the
// given wheel speed.  The sub-count remainder is carried in `residual`, so no
// motion is ever lost: summed counts stay within one count of the analytic
// shaft angle over any horizon.
inline EncoderResult encoder_measure(double wheel_speed, double dt,
                                     const DriveGeometry& g, double residual) {
  require(dt > 0.0, "encoder_measure: dt must be positive");
  const double accum = residual + wheel_speed * dt * g.counts_per_wheel_rad();
  const double whole = std::floor(accum);
  return {static_cast<long>(whole), accum - whole};
}

// Fixed-capacity ring buffer of speed samples; the controller acts on its
// arithmetic mean.
class MeasurementQueue {
 public:
  static constexpr std::size_t kCapacity = 25;

  void push(double sample) {
    slots_[head_] = sample;
    head_ = (head_ + 1) % kCapacity;
    if (size_ < kCapacity) ++size_;
  }

  bool empty() const { return size_ == 0; }
  std::size_t size() const { return size_; }

  double mean() const {
    require(size_ > 0, "MeasurementQueue::mean: empty queue");
    double sum = 0.0;
    for (std::size_t i = 0; i < size_; ++i) sum += slots_[i];
    return sum / static_cast<double>(size_);
  }

 private:
  std::array<double, kCapacity> slots_{};
  std::size_t size_{0};
  std::size_t head_{0};
};

inline double smoothed_estimate(const MeasurementQueue& q) { return q.mean(); }

struct WheelActuator {
  double duty{};              // [-1, 1]
  double encoder_residual{};  // carried fractional encoder count
  double applied_speed{};     // wheel speed currently produced, rad/s
  MeasurementQueue samples;
};

// Per-vehicle low-level control state.  kp integrates duty against the
// smoothed speed error; sat_multiplier models per-unit top-speed variation.
struct ActuatorState {
  WheelActuator right;
  WheelActuator left;
  double kp{1.5e-4};  // duty per (rad/s) of wheel-speed error
  double sat_multiplier{1.0};
};

namespace detail {
inline double wheel_step(double commanded, WheelActuator& w,
                         const DriveGeometry& g, double dt, double kp,
                         double sat_multiplier) {
  const auto enc = encoder_measure(w.applied_speed, dt, g, w.encoder_residual);
  w.encoder_residual = enc.residual;
  w.samples.push(static_cast<double>(enc.counts) /
                 (g.counts_per_wheel_rad() * dt));
  const double error = commanded - w.samples.mean();
  w.duty = clamp(w.duty + kp * error, -1.0, 1.0);
  w.applied_speed = w.duty * g.max_wheel_speed() * sat_multiplier;
  return w.applied_speed;
}
}  // namespace detail

// One tick of the encoder/duty loop (nominally 2 kHz).  Measures the current
// wheel speeds, updates the duty cycles toward the commanded speeds, and
// returns the wheel speeds actually produced.  Duty saturation keeps the
// resulting |v| within v_sat * sat_multiplier by construction.
inline WheelSpeeds low_level_step(const ControlInput& desired,
                                  ActuatorState& act, const DriveGeometry& g,
                                  double dt) {
  const WheelSpeeds cmd = input_to_wheel_speeds(desired, g);
  return {detail::wheel_step(cmd.right, act.right, g, dt, act.kp,
                             act.sat_multiplier),
          detail::wheel_step(cmd.left, act.left, g, dt, act.kp,
                             act.sat_multiplier)};
}

}  // namespace mergesim
