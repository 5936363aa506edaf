#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mergesim/geometry.hpp"

namespace mergesim {

// ---------------------------------------------------------------------------
// Merge geometry
// ---------------------------------------------------------------------------

// Static description of the merge: a control zone of length L on each road
// feeding a shared merging zone of length S, with the admissible speed and
// acceleration envelope and the speed-dependent rear-end gap
// delta(v) = standstill_gap + time_headway * v.
struct MergeGeometry {
  double control_zone_length{3.0};  // L, m
  double merging_zone_length{0.4};  // S, m
  double v_min{0.1};                // m/s
  double v_max{0.4};
  double u_min{-0.3};               // m/s^2
  double u_max{0.3};
  double v_merge{0.3};              // prescribed merging-zone speed, m/s
  double standstill_gap{0.15};      // delta0, m
  double time_headway{0.5};         // h, s

  double safe_gap(double v) const { return standstill_gap + time_headway * v; }

  std::vector<std::string> validate() const {
    std::vector<std::string> issues;
    if (!(merging_zone_length > 0.0))
      issues.push_back("merging_zone_length must be positive");
    if (!(merging_zone_length < control_zone_length))
      issues.push_back("merging_zone_length must be smaller than control_zone_length");
    if (!(v_min >= 0.0)) issues.push_back("v_min must be non-negative");
    if (!(v_min < v_max)) issues.push_back("v_min must be below v_max");
    if (!(v_merge > v_min && v_merge <= v_max))
      issues.push_back("v_merge must lie in (v_min, v_max]");
    if (!(u_min < 0.0 && u_max > 0.0))
      issues.push_back("acceleration bounds must straddle zero");
    if (!(standstill_gap >= 0.0) || !(time_headway >= 0.0))
      issues.push_back("gap parameters must be non-negative");
    if (!(safe_gap(v_max) < merging_zone_length))
      issues.push_back("safe gap at v_max must stay below merging_zone_length");
    return issues;
  }
};

// ---------------------------------------------------------------------------
// Queue
// ---------------------------------------------------------------------------

// Relation of a newly arrived vehicle to the most recent queue entry.
enum class PredecessorTag { None, SameLane, Conflicting };

struct QueueEntry {
  int vehicle{-1};
  int road{0};             // 1 = main, 2 = secondary
  double arrival_time{};   // control-zone entry, t0
  double arrival_speed{};  // v0
  double merge_time{};     // merging-zone entry, t_m
  double exit_time{};      // merging-zone exit, t_f = t_m + S / v_merge
};

// Snapshot a newly arrived vehicle reads about its queue predecessor.
struct InfoSet {
  double position{};  // control-zone position of the predecessor, m
  double speed{};     // m/s
  PredecessorTag tag{PredecessorTag::None};  // relative to the reader's road
  double merge_time{};
};

inline PredecessorTag classify_predecessor(const std::vector<QueueEntry>& queue,
                                           int road) {
  if (queue.empty()) return PredecessorTag::None;
  return queue.back().road == road ? PredecessorTag::SameLane
                                   : PredecessorTag::Conflicting;
}

// Merging-zone entry time for a vehicle arriving at t0 with speed v0 whose
// predecessor merges at prev_merge_time:
//   t_m = max( min(prev + gap / v_merge, t0 + L / v_min),
//              t0 + L / v0,  t0 + L / v_max )
// The gap is delta(v_ave) behind a same-lane predecessor and the full zone
// length S behind a conflicting one.  The middle term keeps the earliest
// feasible crossing (no acceleration), the last keeps the zone speed limit
// honest, and the v_min ceiling (treated as +inf when v_min = 0) caps how
// long a vehicle can be asked to dawdle.
inline double compute_merge_time(double prev_merge_time, PredecessorTag tag,
                                 double t0, double v0, const MergeGeometry& g,
                                 double v_ave) {
  require(v0 > 0.0, "compute_merge_time: arrival speed must be positive");
  const double cruise = t0 + g.control_zone_length / v0;
  if (tag == PredecessorTag::None) return cruise;
  const double gap = tag == PredecessorTag::SameLane ? g.safe_gap(v_ave)
                                                     : g.merging_zone_length;
  const double follow = prev_merge_time + gap / g.v_merge;
  const double ceiling = g.v_min > 0.0
                             ? t0 + g.control_zone_length / g.v_min
                             : std::numeric_limits<double>::infinity();
  const double floor = t0 + g.control_zone_length / g.v_max;
  return std::max({std::min(follow, ceiling), cruise, floor});
}

// Inserts preserving non-decreasing merge times; ties go after existing
// equal entries.  Returns the insertion position.
inline std::size_t insert_into_queue(std::vector<QueueEntry>& queue,
                                     const QueueEntry& entry) {
  const auto it = std::upper_bound(
      queue.begin(), queue.end(), entry,
      [](const QueueEntry& a, const QueueEntry& b) {
        return a.merge_time < b.merge_time;
      });
  const std::size_t pos = static_cast<std::size_t>(it - queue.begin());
  queue.insert(it, entry);
  return pos;
}

// ---------------------------------------------------------------------------
// Energy-optimal plan
// ---------------------------------------------------------------------------

// Minimum-effort (integral of u^2) trajectory through the control zone:
// linear acceleration, quadratic speed, cubic position in absolute time t,
//   u = a t + b,  v = a t^2 / 2 + b t + c,  p = a t^3 / 6 + b t^2 / 2 + c t + d,
// pinned by p(t_start) = 0, p(t_merge) = distance, v(t_start) = v_start,
// v(t_merge) = v_merge_out.
struct MergePlan {
  double a{};
  double b{};
  double c{};
  double d{};
  double t_start{};
  double t_merge{};
  double v_start{};
  double v_merge_out{};
  double distance{};
};

struct PlanSample {
  double p{};
  double v{};
  double u{};
};

// Solves the two-point boundary problem in time shifted to tau = t - t0 (the
// 4x4 system is triangular there) and converts the coefficients back to
// absolute time.
inline MergePlan solve_unconstrained(double t0, double t_merge, double v0,
                                     const MergeGeometry& g) {
  require(std::isfinite(t0) && std::isfinite(t_merge),
          "solve_unconstrained: non-finite boundary time");
  require(t_merge > t0 + 1e-12, "solve_unconstrained: t_merge must exceed t0");
  require(v0 > 0.0, "solve_unconstrained: v0 must be positive");
  const double L = g.control_zone_length;
  const double T = t_merge - t0;
  const double A = L - v0 * T;            // position defect of plain cruising
  const double B = g.v_merge - v0;        // speed change to absorb
  const double a = (6.0 * B * T - 12.0 * A) / (T * T * T);
  const double b_loc = (6.0 * A * T - 2.0 * B * T * T) / (T * T * T);
  MergePlan plan;
  plan.a = a;
  plan.b = b_loc - a * t0;
  plan.c = v0 - b_loc * t0 + 0.5 * a * t0 * t0;
  plan.d = -v0 * t0 + 0.5 * b_loc * t0 * t0 - a * t0 * t0 * t0 / 6.0;
  plan.t_start = t0;
  plan.t_merge = t_merge;
  plan.v_start = v0;
  plan.v_merge_out = g.v_merge;
  plan.distance = L;
  return plan;
}

inline PlanSample eval_plan(const MergePlan& plan, double t) {
  require(t >= plan.t_start - 1e-9 && t <= plan.t_merge + 1e-9,
          "eval_plan: time outside the plan window");
  t = clamp(t, plan.t_start, plan.t_merge);
  return {((plan.a / 6.0 * t + 0.5 * plan.b) * t + plan.c) * t + plan.d,
          (0.5 * plan.a * t + plan.b) * t + plan.c,
          plan.a * t + plan.b};
}

struct PlanViolation {
  enum class Kind { SpeedLow, SpeedHigh, AccelLow, AccelHigh };
  Kind kind{};
  double time{};
  double value{};
  double bound{};
};

inline const char* to_string(PlanViolation::Kind k) {
  switch (k) {
    case PlanViolation::Kind::SpeedLow: return "speed below v_min";
    case PlanViolation::Kind::SpeedHigh: return "speed above v_max";
    case PlanViolation::Kind::AccelLow: return "acceleration below u_min";
    case PlanViolation::Kind::AccelHigh: return "acceleration above u_max";
  }
  return "?";
}

// Checks the plan against the admissible envelope.  The speed is quadratic,
// so besides the endpoints only its vertex at t = -b/a can be extremal; the
// acceleration is linear, so its extremes sit at the endpoints.  Violations
// are returned as data, not thrown.
inline std::vector<PlanViolation> validate_plan(const MergePlan& plan,
                                                const MergeGeometry& g) {
  std::vector<PlanViolation> out;
  auto check_speed = [&](double t) {
    const double v = eval_plan(plan, t).v;
    if (v < g.v_min)
      out.push_back({PlanViolation::Kind::SpeedLow, t, v, g.v_min});
    if (v > g.v_max)
      out.push_back({PlanViolation::Kind::SpeedHigh, t, v, g.v_max});
  };
  auto check_accel = [&](double t) {
    const double u = eval_plan(plan, t).u;
    if (u < g.u_min)
      out.push_back({PlanViolation::Kind::AccelLow, t, u, g.u_min});
    if (u > g.u_max)
      out.push_back({PlanViolation::Kind::AccelHigh, t, u, g.u_max});
  };
  check_speed(plan.t_start);
  check_speed(plan.t_merge);
  if (plan.a != 0.0) {
    const double t_vertex = -plan.b / plan.a;
    if (t_vertex > plan.t_start && t_vertex < plan.t_merge) check_speed(t_vertex);
  }
  check_accel(plan.t_start);
  check_accel(plan.t_merge);
  return out;
}

struct Interval {
  double begin{};
  double end{};
};

// Time the vehicle occupies the merging zone under the prescribed speed.
inline Interval occupancy_interval(const QueueEntry& e, const MergeGeometry& g) {
  return {e.merge_time, e.merge_time + g.merging_zone_length / g.v_merge};
}

// ---------------------------------------------------------------------------
// Rear-end audit
// ---------------------------------------------------------------------------

// One vehicle observed at one audit instant.  `position` is route arc length
// measured from the control-zone entry (so same-road values are directly
// comparable); `in_control_zone` marks vehicles between the control-zone and
// merging-zone boundaries, which both defines the audit window of a follower
// and the population used for the average speed.
struct ControlZoneSample {
  int vehicle{-1};
  int road{0};
  double position{};
  double speed{};
  bool in_control_zone{true};
};

struct AuditTick {
  double time{};
  std::vector<ControlZoneSample> samples;
};

struct RearEndViolation {
  double time{};
  int follower{-1};
  int leader{-1};
  double gap{};
  double required{};
};

// Verifies p_leader - p_follower >= delta(v_ave) for every same-road pair
// whose follower is still inside the control zone.  v_ave is the mean speed
// of the control-zone population at that instant.
inline std::vector<RearEndViolation> rear_end_check(
    const std::vector<AuditTick>& ticks, const MergeGeometry& g) {
  std::vector<RearEndViolation> out;
  std::vector<const ControlZoneSample*> road_samples;
  for (const auto& tick : ticks) {
    double sum = 0.0;
    int n = 0;
    for (const auto& s : tick.samples) {
      if (s.in_control_zone) {
        sum += s.speed;
        ++n;
      }
    }
    if (n == 0) continue;
    const double required = g.safe_gap(sum / n);
    for (int road = 1; road <= 2; ++road) {
      road_samples.clear();
      for (const auto& s : tick.samples)
        if (s.road == road) road_samples.push_back(&s);
      std::sort(road_samples.begin(), road_samples.end(),
                [](const ControlZoneSample* a, const ControlZoneSample* b) {
                  return a->position < b->position;
                });
      for (std::size_t i = 0; i + 1 < road_samples.size(); ++i) {
        const auto* follower = road_samples[i];
        const auto* leader = road_samples[i + 1];
        if (!follower->in_control_zone) continue;
        const double gap = leader->position - follower->position;
        if (gap < required - 1e-9)
          out.push_back({tick.time, follower->vehicle, leader->vehicle, gap,
                         required});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Baseline yield policy
// ---------------------------------------------------------------------------

struct YieldParams {
  double clearance_time{1.5};  // s a main vehicle may be away and still block
  double brake_decel{0.3};     // m/s^2 used for the stopping profiles
  double stop_margin{0.05};    // m short of the merging-zone entry
};

struct YieldInput {
  int road{1};                  // 1 = main (priority), 2 = secondary
  double distance_to_merge{};   // merging-zone entry minus own position, m
  double cruise_speed{};
  double gap_ahead{std::numeric_limits<double>::infinity()};  // same road, m
  bool merge_zone_blocked{false};
};

// Uncoordinated reference speed.  Main-road vehicles cruise.  A secondary
// vehicle rides a sqrt(2*a*d) stopping profile toward the stop line while the
// zone is blocked and always respects a standstill gap to its own queue
// predecessor, which is what makes a stopped queue pack at delta0.
inline double baseline_yield_command(const YieldInput& in,
                                     const MergeGeometry& g,
                                     const YieldParams& p) {
  require(in.cruise_speed >= 0.0, "baseline_yield_command: negative cruise");
  if (in.road == 1) return in.cruise_speed;
  double cmd = in.cruise_speed;
  if (in.merge_zone_blocked && in.distance_to_merge > 0.0) {
    const double d_stop = in.distance_to_merge - p.stop_margin;
    cmd = std::min(cmd, std::sqrt(2.0 * p.brake_decel * std::max(0.0, d_stop)));
  }
  if (std::isfinite(in.gap_ahead)) {
    const double slack = in.gap_ahead - g.standstill_gap;
    cmd = std::min(cmd, std::sqrt(2.0 * p.brake_decel * std::max(0.0, slack)));
  }
  return cmd;
}

// ---------------------------------------------------------------------------
// Coordinator
// ---------------------------------------------------------------------------

// Passive first-in-first-out coordinator.  Vehicles announce themselves on
// control-zone entry; each reads only the most recent queue entry, computes
// its own merge time, and is inserted in merge-time order.  The seeded RNG
// breaks ties between literally simultaneous arrivals.
class Coordinator {
 public:
  explicit Coordinator(std::uint64_t seed) : rng_(seed) {}

  struct Arrival {
    int vehicle{-1};
    int road{0};
    double t0{};
    double v0{};
  };

  struct Outcome {
    QueueEntry entry;
    std::size_t position{};
    PredecessorTag tag{PredecessorTag::None};
    bool reordered{false};  // inserted before an existing entry
  };

  // `first_merge_duration`, when set, overrides the t0 + L/v0 default for a
  // vehicle that arrives to an empty queue.
  Outcome process_arrival(const Arrival& a, double v_ave, const MergeGeometry& g,
                          std::optional<double> first_merge_duration = {}) {
    const PredecessorTag tag = classify_predecessor(entries_, a.road);
    double t_m;
    if (tag == PredecessorTag::None) {
      t_m = first_merge_duration ? a.t0 + *first_merge_duration
                                 : a.t0 + g.control_zone_length / a.v0;
    } else {
      t_m = compute_merge_time(entries_.back().merge_time, tag, a.t0, a.v0, g,
                               v_ave);
    }
    QueueEntry entry{a.vehicle, a.road, a.t0, a.v0, t_m,
                     t_m + g.merging_zone_length / g.v_merge};
    const std::size_t pos = insert_into_queue(entries_, entry);
    return {entry, pos, tag, pos + 1 < entries_.size()};
  }

  // Arrivals sharing one instant have no defined order; shuffle them with the
  // seeded generator, then process sequentially.  The portable Fisher-Yates
  // keeps replays identical for a given seed.
  std::vector<Outcome> process_simultaneous(
      std::vector<Arrival> batch, double v_ave, const MergeGeometry& g,
      std::optional<double> first_merge_duration = {}) {
    for (std::size_t i = batch.size(); i > 1; --i)
      std::swap(batch[i - 1], batch[rng_() % i]);
    std::vector<Outcome> out;
    out.reserve(batch.size());
    for (const auto& a : batch)
      out.push_back(process_arrival(a, v_ave, g, first_merge_duration));
    return out;
  }

  const std::vector<QueueEntry>& queue() const { return entries_; }

  std::optional<InfoSet> predecessor_info(int road, double position,
                                          double speed) const {
    if (entries_.empty()) return std::nullopt;
    return InfoSet{position, speed, classify_predecessor(entries_, road),
                   entries_.back().merge_time};
  }

 private:
  std::vector<QueueEntry> entries_;
  std::mt19937_64 rng_;
};

}  // namespace mergesim
