#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "mergesim/coordination.hpp"
#include "mergesim/errors.hpp"
#include "mergesim/scenario.hpp"
#include "mergesim/trace.hpp"

namespace mergesim {

inline std::string fmt_g12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// World
// ---------------------------------------------------------------------------

// Deterministic fixed-step simulation of one scenario.  Per tick:
//   1. spawn due vehicles
//   2. detect zone boundary crossings (arrivals feed the coordinator and
//      receive merge plans in optimal mode)
//   3. per vehicle: choose a reference speed, advance the virtual robot,
//      run the tracking law, drive the plant, record the trace row
// All iteration orders are fixed (road label, then vehicle id), and the only
// randomness is the coordinator's seeded tie-breaker, so a scenario+seed pair
// replays identically.
class World {
 public:
  explicit World(Scenario sc)
      : scenario_(std::move(sc)), coordinator_(scenario_.seed) {
    trace_.scenario_name = scenario_.name;
    trace_.mode = scenario_.mode;
    trace_.seed = scenario_.seed;
    trace_.dt = scenario_.dt;
    trace_.geometry = scenario_.geometry;
    vehicles_.reserve(scenario_.vehicles.size());
    for (std::size_t i = 0; i < scenario_.vehicles.size(); ++i) {
      VehicleRuntime rt;
      rt.spec = &scenario_.vehicles[i];
      rt.road = &scenario_.road(rt.spec->road);
      rt.index = static_cast<int>(i);
      vehicles_.push_back(rt);
      trace_.vehicle_ids.push_back(rt.spec->id);
      trace_.vehicle_roads.push_back(rt.spec->road);
    }
    order_.resize(vehicles_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    std::sort(order_.begin(), order_.end(), [this](std::size_t a, std::size_t b) {
      const auto& va = *vehicles_[a].spec;
      const auto& vb = *vehicles_[b].spec;
      return va.road != vb.road ? va.road < vb.road : va.id < vb.id;
    });
  }

  double time() const { return static_cast<double>(tick_) * scenario_.dt; }
  long tick() const { return tick_; }
  const Scenario& scenario() const { return scenario_; }
  const Trace& trace() const { return trace_; }
  const Coordinator& coordinator() const { return coordinator_; }

  bool finished() const {
    for (const auto& v : vehicles_)
      if (!v.spawned || !v.despawned) return false;
    return true;
  }

  void step() {
    const double t = time();
    spawn_due(t);
    process_crossings(t);
    advance_vehicles(t);
    ++tick_;
  }

  Trace run() {
    while (!finished() && time() < scenario_.duration - 1e-12) step();
    trace_.queue = coordinator_.queue();
    return trace_;
  }

 private:
  struct VehicleRuntime {
    const VehicleSpec* spec{};
    const RoadSpec* road{};
    int index{};
    bool spawned{false};
    bool despawned{false};
    VehicleState state;
    ReferenceState ref;
    std::size_t state_index{0};
    std::size_t ref_index{0};
    double route_s{};
    double prev_route_s{};
    Zone zone{Zone::Outside};
    ActuatorState actuator;
    ControlInput last_applied;
    std::optional<MergePlan> plan;
    std::optional<QueueEntry> entry;
  };

  Zone zone_of(const VehicleRuntime& v, double s) const {
    const auto& g = scenario_.geometry;
    if (s < v.road->control_entry_s(g)) return Zone::Outside;
    if (s < v.road->merge_entry_s) return Zone::Control;
    if (s < v.road->merge_exit_s(g)) return Zone::Merging;
    return Zone::Past;
  }

  void emit(long tick, double t, const std::string& type, int vehicle,
            std::string payload = {}) {
    trace_.events.push_back({tick, t, type, vehicle, std::move(payload)});
  }

  void spawn_due(double t) {
    for (const std::size_t i : order_) {
      auto& v = vehicles_[i];
      if (v.spawned || v.spec->spawn_time > t + 1e-12) continue;
      const auto& route = v.road->route;
      // Resolve the spawn segment from the arc length.
      std::size_t seg = 0;
      while (seg + 1 < route.segments.size() &&
             v.spec->spawn_s >= route.prefix[seg + 1])
        ++seg;
      const double local_s = v.spec->spawn_s - route.prefix[seg];
      const Vec2 pos = route.segments[seg].point_at(local_s);
      const Vec2 tan = route.segments[seg].tangent_at(local_s);
      const double heading = std::atan2(tan.y, tan.x);
      v.ref = {pos.x, pos.y, heading, v.spec->entry_speed, 0.0};
      const Vec2 left{-tan.y, tan.x};
      v.state = {pos.x + tan.x * v.spec->forward_offset + left.x * v.spec->lateral_offset,
                 pos.y + tan.y * v.spec->forward_offset + left.y * v.spec->lateral_offset,
                 wrap_angle(heading + v.spec->heading_offset)};
      v.state_index = v.ref_index = seg;
      v.route_s = v.prev_route_s = v.spec->spawn_s;
      v.zone = zone_of(v, v.route_s);
      v.actuator.kp = v.spec->kp;
      v.actuator.sat_multiplier = v.spec->sat_multiplier;
      v.last_applied = {0.0, 0.0};
      v.spawned = true;
      for (const auto& other : vehicles_) {
        if (!other.spawned || other.despawned || other.index == v.index) continue;
        if (other.spec->road == v.spec->road &&
            std::abs(other.route_s - v.route_s) < scenario_.geometry.standstill_gap)
          throw ScenarioError("vehicle '" + v.spec->id + "' spawns within the standstill gap of '" +
                              other.spec->id + "'");
      }
      emit(tick_, t, "spawn", v.index,
           "s=" + fmt_g12(v.route_s) + " speed=" + fmt_g12(v.spec->entry_speed));
    }
  }

  // Boundary crossings between the previous tick's position and the current
  // one, with the crossing instant interpolated inside the tick.
  void process_crossings(double t) {
    std::vector<Coordinator::Arrival> batch;
    for (const std::size_t i : order_) {
      auto& v = vehicles_[i];
      if (!v.spawned || v.despawned) continue;
      const double s0 = v.prev_route_s;
      const double s1 = v.route_s;
      const auto cross_time = [&](double boundary) {
        if (s1 <= s0) return t;
        return (t - scenario_.dt) +
               scenario_.dt * clamp((boundary - s0) / (s1 - s0), 0.0, 1.0);
      };
      const auto& g = scenario_.geometry;
      const double ctrl_s = v.road->control_entry_s(g);
      const double merge_s = v.road->merge_entry_s;
      const double exit_s = v.road->merge_exit_s(g);
      const Zone nz = zone_of(v, s1);
      if (v.zone == Zone::Outside && nz >= Zone::Control) {
        const double tc = cross_time(ctrl_s);
        emit(tick_, tc, "control_entry", v.index, "s=" + fmt_g12(ctrl_s));
        if (scenario_.mode == ControlMode::Optimal)
          batch.push_back({v.index, v.spec->road, tc, v.ref.v});
      }
      if (v.zone <= Zone::Control && nz >= Zone::Merging)
        emit(tick_, cross_time(merge_s), "merge_entry", v.index,
             "s=" + fmt_g12(merge_s));
      if (v.zone <= Zone::Merging && nz >= Zone::Past)
        emit(tick_, cross_time(exit_s), "merge_exit", v.index,
             "s=" + fmt_g12(exit_s));
      v.zone = nz;
      if (s1 >= v.road->despawn_s) {
        emit(tick_, cross_time(v.road->despawn_s), "despawn", v.index);
        v.despawned = true;
      }
    }
    if (!batch.empty()) process_arrivals(batch);
  }

  void process_arrivals(std::vector<Coordinator::Arrival>& batch) {
    std::sort(batch.begin(), batch.end(),
              [this](const Coordinator::Arrival& a, const Coordinator::Arrival& b) {
                if (a.t0 != b.t0) return a.t0 < b.t0;
                const auto& va = *vehicles_[a.vehicle].spec;
                const auto& vb = *vehicles_[b.vehicle].spec;
                return va.road != vb.road ? va.road < vb.road : va.id < vb.id;
              });
    // Average speed over the control-zone population, arrivals included.
    double sum = 0.0;
    int n = 0;
    for (const auto& v : vehicles_) {
      if (v.spawned && !v.despawned && v.zone == Zone::Control) {
        sum += v.ref.v;
        ++n;
      }
    }
    const double v_ave = n > 0 ? sum / n : 0.0;

    std::size_t lo = 0;
    while (lo < batch.size()) {
      std::size_t hi = lo + 1;
      while (hi < batch.size() && batch[hi].t0 == batch[lo].t0) ++hi;
      std::vector<Coordinator::Arrival> group(batch.begin() + lo, batch.begin() + hi);
      const auto outcomes = coordinator_.process_simultaneous(
          group, v_ave, scenario_.geometry, scenario_.first_merge_duration);
      for (const auto& oc : outcomes) assign_plan(oc, v_ave);
      lo = hi;
    }
  }

  void assign_plan(const Coordinator::Outcome& oc, double v_ave) {
    auto& v = vehicles_[static_cast<std::size_t>(oc.entry.vehicle)];
    v.entry = oc.entry;
    std::ostringstream payload;
    payload << "t0=" << fmt_g12(oc.entry.arrival_time)
            << " v0=" << fmt_g12(oc.entry.arrival_speed)
            << " tm=" << fmt_g12(oc.entry.merge_time)
            << " tf=" << fmt_g12(oc.entry.exit_time) << " pos=" << oc.position
            << " v_ave=" << fmt_g12(v_ave)
            << (oc.reordered ? " reordered=1" : "");
    emit(tick_, oc.entry.arrival_time, "merge_time_assigned", v.index, payload.str());
    const MergePlan plan = solve_unconstrained(
        oc.entry.arrival_time, oc.entry.merge_time, oc.entry.arrival_speed,
        scenario_.geometry);
    const auto violations = validate_plan(plan, scenario_.geometry);
    if (!violations.empty()) {
      std::ostringstream msg;
      msg << "merge plan for vehicle '" << v.spec->id << "' violates its bounds:";
      for (const auto& viol : violations)
        msg << "\n  - " << to_string(viol.kind) << " at t=" << fmt_g12(viol.time)
            << " (value " << fmt_g12(viol.value) << ", bound "
            << fmt_g12(viol.bound) << ")";
      throw ScenarioError(msg.str());
    }
    v.plan = plan;
  }

  // Reference speed for this tick.  Plan-driven vehicles sample the plan at
  // the tick midpoint, which keeps the accumulated arc length within O(dt^2)
  // of the plan position.
  double command_speed(const VehicleRuntime& v, double t) const {
    const auto& g = scenario_.geometry;
    if (scenario_.mode == ControlMode::Optimal) {
      switch (v.zone) {
        case Zone::Outside:
          return v.spec->entry_speed;
        case Zone::Control:
          if (v.plan) {
            const double ts = std::min(t + 0.5 * scenario_.dt, v.plan->t_merge);
            return std::max(eval_plan(*v.plan, ts).v, scenario_.min_plan_speed);
          }
          return v.spec->entry_speed;
        case Zone::Merging:
        case Zone::Past:
          return g.v_merge;
      }
      return v.spec->entry_speed;
    }
    // baseline
    if (v.spec->road == 1 || v.zone >= Zone::Merging) return v.spec->entry_speed;
    YieldInput in;
    in.road = v.spec->road;
    in.cruise_speed = v.spec->entry_speed;
    in.distance_to_merge = v.road->merge_entry_s - v.route_s;
    in.gap_ahead = std::numeric_limits<double>::infinity();
    for (const auto& other : vehicles_) {
      if (!other.spawned || other.despawned || other.index == v.index) continue;
      if (other.spec->road == v.spec->road && other.route_s > v.route_s)
        in.gap_ahead = std::min(in.gap_ahead, other.route_s - v.route_s);
    }
    in.merge_zone_blocked = false;
    for (const auto& other : vehicles_) {
      if (!other.spawned || other.despawned || other.spec->road != 1) continue;
      if (other.zone == Zone::Merging) {
        in.merge_zone_blocked = true;
        break;
      }
      const double dist = other.road->merge_entry_s - other.route_s;
      if (dist >= 0.0 &&
          dist <= scenario_.yield.clearance_time * other.spec->entry_speed) {
        in.merge_zone_blocked = true;
        break;
      }
    }
    return baseline_yield_command(in, g, scenario_.yield);
  }

  void advance_vehicles(double t) {
    const double dt = scenario_.dt;
    for (const std::size_t i : order_) {
      auto& v = vehicles_[i];
      if (!v.spawned || v.despawned) continue;

      TraceRow row;
      row.tick = tick_;
      row.time = t;
      row.vehicle = v.index;
      row.road = v.spec->road;
      row.x = v.state.x;
      row.y = v.state.y;
      row.theta = v.state.theta;
      row.route_s = v.route_s;
      row.zone = v.zone;
      row.ref_x = v.ref.x;
      row.ref_y = v.ref.y;

      const double speed_cmd = command_speed(v, t);
      const auto vr = virtual_robot_step(v.ref, v.road->route, v.ref_index,
                                         speed_cmd, dt);
      if (!vr)
        throw SimError("reference for vehicle '" + v.spec->id +
                       "' left the road at t=" + fmt_g12(t));
      v.ref = vr->ref;
      v.ref_index = vr->active_index;

      ControlInput cmd = tracking_control(v.state, v.ref, scenario_.gains);
      const double v_cap = scenario_.drive.v_sat * v.spec->sat_multiplier;
      cmd.v = clamp(cmd.v, -v_cap, v_cap);

      ControlInput applied;
      if (v.spec->fidelity == Fidelity::Ideal) {
        applied = cmd;
        v.state = unicycle_step(v.state, applied, dt);
      } else {
        // 2 kHz duty/encoder loop sub-stepped inside the world tick.
        const double sub_dt = 1.0 / 2000.0;
        const int n_sub = std::max(1, static_cast<int>(std::lround(dt / sub_dt)));
        const double h = dt / n_sub;
        double v_acc = 0.0, w_acc = 0.0;
        for (int k = 0; k < n_sub; ++k) {
          const WheelSpeeds ws = low_level_step(cmd, v.actuator, scenario_.drive, h);
          const ControlInput sub = wheel_speeds_to_input(ws, scenario_.drive);
          v.state = unicycle_step(v.state, sub, h);
          v_acc += sub.v;
          w_acc += sub.omega;
        }
        applied = {v_acc / n_sub, w_acc / n_sub};
      }
      v.last_applied = applied;

      v.state_index = advance_active_index({v.state.x, v.state.y},
                                           v.road->route, v.state_index);
      const auto rp = route_position({v.state.x, v.state.y}, v.road->route,
                                     v.state_index);
      if (!rp)
        throw SimError("vehicle '" + v.spec->id + "' left the road at t=" +
                       fmt_g12(t + dt));
      v.prev_route_s = v.route_s;
      v.route_s = rp->cumulative;

      row.v_cmd = cmd.v;
      row.omega_cmd = cmd.omega;
      row.v_applied = applied.v;
      row.omega_applied = applied.omega;
      trace_.rows.push_back(row);
    }
  }

  Scenario scenario_;
  Coordinator coordinator_;
  std::vector<VehicleRuntime> vehicles_;
  std::vector<std::size_t> order_;  // vehicle indices, road label then id
  Trace trace_;
  long tick_{0};
};

// ---------------------------------------------------------------------------
// Safety audits
// ---------------------------------------------------------------------------

// Post-hoc audits over a finished trace:
//   - rear-end: delta(v_ave) spacing for same-road pairs while the follower
//     is inside the control zone (optimal mode only; the baseline has no
//     coordination contract to audit)
//   - lateral: no two vehicles from different roads inside the merging zone
//     at the same tick
//   - disc overlap: pairwise center distance below two vehicle radii
// Contiguous violations of one kind by one pair collapse into a single event.
inline std::vector<SimEvent> detect_collisions(const Trace& trace,
                                               const Scenario& scenario) {
  std::vector<SimEvent> out;
  // (type, pair) -> last offending tick, to collapse contiguous violations
  std::map<std::tuple<std::string, int, int>, long> episode;
  const auto flag = [&](long tick, double t, const std::string& type, int a,
                        int b, const std::string& payload) {
    const auto key = std::make_tuple(type, std::min(a, b), std::max(a, b));
    const auto it = episode.find(key);
    const bool fresh = it == episode.end() || it->second + 1 < tick;
    episode[key] = tick;
    if (fresh) out.push_back({tick, t, type, a, payload});
  };

  std::vector<AuditTick> audit;
  std::size_t lo = 0;
  while (lo < trace.rows.size()) {
    std::size_t hi = lo + 1;
    while (hi < trace.rows.size() && trace.rows[hi].tick == trace.rows[lo].tick)
      ++hi;

    const double t = trace.rows[lo].time;
    for (std::size_t i = lo; i < hi; ++i) {
      for (std::size_t k = i + 1; k < hi; ++k) {
        const auto& a = trace.rows[i];
        const auto& b = trace.rows[k];
        const double dist = std::hypot(a.x - b.x, a.y - b.y);
        if (dist < 2.0 * scenario.vehicle_radius)
          flag(a.tick, t, "disc_overlap", a.vehicle, b.vehicle,
               "other=" + trace.vehicle_ids[b.vehicle] + " dist=" + fmt_g12(dist));
        if (a.zone == Zone::Merging && b.zone == Zone::Merging && a.road != b.road)
          flag(a.tick, t, "lateral_conflict", a.vehicle, b.vehicle,
               "other=" + trace.vehicle_ids[b.vehicle]);
      }
    }

    if (trace.mode == ControlMode::Optimal) {
      AuditTick at;
      at.time = t;
      for (std::size_t i = lo; i < hi; ++i) {
        const auto& r = trace.rows[i];
        if (r.zone == Zone::Outside) continue;
        at.samples.push_back({r.vehicle, r.road, r.route_s, r.v_applied,
                              r.zone == Zone::Control});
      }
      if (!at.samples.empty()) audit.push_back(std::move(at));
    }
    lo = hi;
  }

  if (trace.mode == ControlMode::Optimal) {
    std::pair<int, int> last{-1, -1};
    double last_t = -1e300;
    for (const auto& viol :
         rear_end_check(audit, scenario.geometry)) {
      const std::pair<int, int> key{viol.follower, viol.leader};
      const bool fresh = key != last || viol.time > last_t + 1.5 * trace.dt;
      last = key;
      last_t = viol.time;
      if (fresh)
        out.push_back({static_cast<long>(viol.time / trace.dt), viol.time,
                       "rear_end_violation", viol.follower,
                       "leader=" + trace.vehicle_ids[viol.leader] +
                           " gap=" + fmt_g12(viol.gap) +
                           " required=" + fmt_g12(viol.required)});
    }
  }
  return out;
}

}  // namespace mergesim
