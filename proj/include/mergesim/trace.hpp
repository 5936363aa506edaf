#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mergesim/coordination.hpp"

namespace mergesim {

enum class ControlMode { Optimal, Baseline };

inline const char* to_string(ControlMode m) {
  return m == ControlMode::Optimal ? "optimal" : "baseline";
}

enum class Zone { Outside, Control, Merging, Past };

inline const char* to_string(Zone z) {
  switch (z) {
    case Zone::Outside: return "outside";
    case Zone::Control: return "control";
    case Zone::Merging: return "merging";
    case Zone::Past: return "past";
  }
  return "?";
}

// One vehicle at one tick.  Pose and route_s are sampled at `time`; the
// command/applied inputs are the ones acting over the following tick.  The
// reference pose is kept for analysis but is not part of the export schema.
struct TraceRow {
  long tick{};
  double time{};
  int vehicle{-1};  // index into Trace::vehicle_ids
  int road{};
  double x{};
  double y{};
  double theta{};
  double v_cmd{};
  double omega_cmd{};
  double v_applied{};
  double omega_applied{};
  double route_s{};
  Zone zone{Zone::Outside};
  double ref_x{};
  double ref_y{};
};

struct SimEvent {
  long tick{};
  double time{};  // interpolated within the tick where applicable
  std::string type;
  int vehicle{-1};  // -1 for events not tied to one vehicle
  std::string payload;
};

struct Trace {
  std::string scenario_name;
  ControlMode mode{ControlMode::Optimal};
  std::uint64_t seed{};
  double dt{};
  MergeGeometry geometry;
  std::vector<std::string> vehicle_ids;
  std::vector<int> vehicle_roads;
  std::vector<TraceRow> rows;     // tick-major order
  std::vector<SimEvent> events;
  std::vector<QueueEntry> queue;  // final coordination queue (optimal mode)
};

}  // namespace mergesim
