#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mergesim/coordination.hpp"
#include "mergesim/errors.hpp"
#include "mergesim/road.hpp"
#include "mergesim/tracking.hpp"
#include "mergesim/trace.hpp"

namespace mergesim {

enum class Fidelity { Ideal, Actuated };

struct VehicleSpec {
  std::string id;
  int road{1};
  double spawn_time{};
  double spawn_s{};       // route arc length at spawn
  double entry_speed{};
  Fidelity fidelity{Fidelity::Ideal};
  double kp{1.5e-4};
  double sat_multiplier{1.0};
  // Initial pose offsets relative to the reference (testing hooks).
  double forward_offset{};
  double lateral_offset{};
  double heading_offset{};
};

struct RoadSpec {
  int label{1};  // 1 = main, 2 = secondary
  std::string name;
  Route route;
  double merge_entry_s{};  // arc length of the merging-zone entry
  double despawn_s{};

  double control_entry_s(const MergeGeometry& g) const {
    return merge_entry_s - g.control_zone_length;
  }
  double merge_exit_s(const MergeGeometry& g) const {
    return merge_entry_s + g.merging_zone_length;
  }
};

struct Scenario {
  std::string name;
  std::uint64_t seed{};
  double dt{0.01};
  double duration{60.0};
  ControlMode mode{ControlMode::Optimal};
  MergeGeometry geometry;
  TrackingGains gains;
  double min_plan_speed{0.02};  // floor for plan-driven reference speeds
  YieldParams yield;
  std::optional<double> first_merge_duration;
  double vehicle_radius{0.065};
  DriveGeometry drive;
  std::vector<RoadSpec> roads;
  std::vector<VehicleSpec> vehicles;

  const RoadSpec& road(int label) const {
    for (const auto& r : roads)
      if (r.label == label) return r;
    throw ScenarioError("unknown road label " + std::to_string(label));
  }
};

namespace detail {

using nlohmann::json;

inline const json& member(const json& j, const std::string& key,
                          const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) throw ScenarioError(where + ": missing field '" + key + "'");
  return *it;
}

template <typename T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return member(j, key, where).get<T>();
  } catch (const json::exception& e) {
    throw ScenarioError(where + "." + key + ": " + e.what());
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, const std::string& where,
         T fallback) {
  if (j.find(key) == j.end()) return fallback;
  return get<T>(j, key, where);
}

inline Vec2 get_vec2(const json& j, const std::string& key,
                     const std::string& where) {
  const auto& v = member(j, key, where);
  if (!v.is_array() || v.size() != 2)
    throw ScenarioError(where + "." + key + ": expected [x, y]");
  return {v[0].get<double>(), v[1].get<double>()};
}

inline RoadSegment parse_segment(const json& j, const std::string& where) {
  const auto kind = get<std::string>(j, "kind", where);
  if (kind == "line") {
    LineSegment seg;
    seg.origin = get_vec2(j, "origin", where);
    seg.direction = get_vec2(j, "direction", where);
    seg.length = get<double>(j, "length", where);
    seg.width = get<double>(j, "width", where);
    seg.gain = get<double>(j, "p", where);
    return {seg};
  }
  if (kind == "arc") {
    ArcSegment seg;
    seg.center = get_vec2(j, "center", where);
    seg.radius = get<double>(j, "radius", where);
    seg.cw = get<int>(j, "cw", where);
    seg.start_angle = get<double>(j, "start_angle", where);
    seg.end_angle = get<double>(j, "end_angle", where);
    seg.width = get<double>(j, "width", where);
    seg.gain = get<double>(j, "p", where);
    return {seg};
  }
  throw ScenarioError(where + ".kind: expected 'line' or 'arc', got '" + kind + "'");
}

}  // namespace detail

inline Scenario load_scenario(const std::string& text) {
  using detail::get;
  using detail::get_or;
  namespace nj = nlohmann;
  nj::json j;
  try {
    j = nj::json::parse(text);
  } catch (const nj::json::exception& e) {
    throw ScenarioError(std::string("scenario parse error: ") + e.what());
  }

  Scenario sc;
  sc.name = get<std::string>(j, "name", "scenario");
  sc.seed = get<std::uint64_t>(j, "seed", "scenario");
  sc.dt = get_or(j, "dt", "scenario", 0.01);
  sc.duration = get<double>(j, "duration", "scenario");
  const auto mode = get<std::string>(j, "mode", "scenario");
  if (mode == "optimal")
    sc.mode = ControlMode::Optimal;
  else if (mode == "baseline")
    sc.mode = ControlMode::Baseline;
  else
    throw ScenarioError("scenario.mode: expected 'optimal' or 'baseline', got '" +
                        mode + "'");

  const auto& g = detail::member(j, "geometry", "scenario");
  sc.geometry.control_zone_length = get<double>(g, "control_zone_length", "geometry");
  sc.geometry.merging_zone_length = get<double>(g, "merging_zone_length", "geometry");
  sc.geometry.v_min = get<double>(g, "v_min", "geometry");
  sc.geometry.v_max = get<double>(g, "v_max", "geometry");
  sc.geometry.u_min = get<double>(g, "u_min", "geometry");
  sc.geometry.u_max = get<double>(g, "u_max", "geometry");
  sc.geometry.v_merge = get<double>(g, "v_merge", "geometry");
  sc.geometry.standstill_gap = get<double>(g, "standstill_gap", "geometry");
  sc.geometry.time_headway = get<double>(g, "time_headway", "geometry");

  if (j.contains("tracking")) {
    const auto& t = j["tracking"];
    sc.gains.zeta = get_or(t, "zeta", "tracking", 0.8);
    sc.gains.b = get_or(t, "b", "tracking", 70.0);
    sc.min_plan_speed = get_or(t, "min_plan_speed", "tracking", 0.02);
  }
  if (j.contains("baseline")) {
    const auto& b = j["baseline"];
    sc.yield.clearance_time = get_or(b, "clearance_time", "baseline", 1.5);
    sc.yield.brake_decel = get_or(b, "brake_decel", "baseline", 0.3);
    sc.yield.stop_margin = get_or(b, "stop_margin", "baseline", 0.05);
  }
  if (j.contains("first_merge_duration") && !j["first_merge_duration"].is_null())
    sc.first_merge_duration = j["first_merge_duration"].get<double>();
  sc.vehicle_radius = get_or(j, "vehicle_radius", "scenario", 0.065);

  const auto& roads = detail::member(j, "roads", "scenario");
  for (std::size_t r = 0; r < roads.size(); ++r) {
    const std::string where = "roads[" + std::to_string(r) + "]";
    const auto& jr = roads[r];
    RoadSpec spec;
    spec.label = get<int>(jr, "label", where);
    spec.name = get_or<std::string>(jr, "name", where, "road" + std::to_string(spec.label));
    spec.merge_entry_s = get<double>(jr, "merge_entry_s", where);
    spec.despawn_s = get<double>(jr, "despawn_s", where);
    const auto& segs = detail::member(jr, "segments", where);
    for (std::size_t k = 0; k < segs.size(); ++k)
      spec.route.segments.push_back(
          detail::parse_segment(segs[k], where + ".segments[" + std::to_string(k) + "]"));
    spec.route.loop = get_or(jr, "loop", where, false);
    spec.route.finalize();
    sc.roads.push_back(std::move(spec));
  }

  const auto& vehicles = detail::member(j, "vehicles", "scenario");
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    const std::string where = "vehicles[" + std::to_string(i) + "]";
    const auto& jv = vehicles[i];
    VehicleSpec v;
    v.id = get<std::string>(jv, "id", where);
    v.road = get<int>(jv, "road", where);
    v.spawn_time = get<double>(jv, "spawn_time", where);
    v.spawn_s = get_or(jv, "spawn_s", where, 0.0);
    v.entry_speed = get<double>(jv, "entry_speed", where);
    const auto fid = get_or<std::string>(jv, "fidelity", where, "ideal");
    if (fid == "ideal")
      v.fidelity = Fidelity::Ideal;
    else if (fid == "actuated")
      v.fidelity = Fidelity::Actuated;
    else
      throw ScenarioError(where + ".fidelity: expected 'ideal' or 'actuated'");
    v.kp = get_or(jv, "kp", where, 1.5e-4);
    v.sat_multiplier = get_or(jv, "sat_multiplier", where, 1.0);
    v.forward_offset = get_or(jv, "forward_offset", where, 0.0);
    v.lateral_offset = get_or(jv, "lateral_offset", where, 0.0);
    v.heading_offset = get_or(jv, "heading_offset", where, 0.0);
    sc.vehicles.push_back(std::move(v));
  }

  // -- validation -----------------------------------------------------------
  std::vector<std::string> issues;
  if (!(sc.dt > 0.0)) issues.push_back("dt must be positive");
  if (!(sc.duration > 0.0)) issues.push_back("duration must be positive");
  for (const auto& msg : sc.geometry.validate()) issues.push_back("geometry: " + msg);

  if (sc.roads.size() != 2) {
    issues.push_back("exactly two roads (labels 1 and 2) are required");
  } else {
    const bool labels_ok = (sc.roads[0].label == 1 && sc.roads[1].label == 2) ||
                           (sc.roads[0].label == 2 && sc.roads[1].label == 1);
    if (!labels_ok) issues.push_back("road labels must be exactly {1, 2}");
  }
  for (const auto& r : sc.roads) {
    const std::string where = "road '" + r.name + "'";
    for (const auto& msg : r.route.validate()) issues.push_back(where + ": " + msg);
    if (r.route.segments.empty()) continue;
    if (r.merge_entry_s < sc.geometry.control_zone_length)
      issues.push_back(where + ": control zone starts before the route does");
    if (r.merge_exit_s(sc.geometry) > r.route.total_length())
      issues.push_back(where + ": merging zone extends past the route end");
    if (r.despawn_s > r.route.total_length())
      issues.push_back(where + ": despawn_s past the route end");
    if (r.despawn_s < r.merge_exit_s(sc.geometry))
      issues.push_back(where + ": despawn_s must lie beyond the merging zone");
  }

  for (std::size_t i = 0; i < sc.vehicles.size(); ++i) {
    const auto& v = sc.vehicles[i];
    const std::string where = "vehicle '" + v.id + "'";
    if (v.road != 1 && v.road != 2) issues.push_back(where + ": road must be 1 or 2");
    if (!(v.entry_speed > 0.0)) issues.push_back(where + ": entry_speed must be positive");
    if (v.entry_speed > sc.geometry.v_max)
      issues.push_back(where + ": entry_speed above v_max");
    if (v.spawn_s < 0.0) issues.push_back(where + ": spawn_s must be non-negative");
    if (sc.roads.size() == 2 && (v.road == 1 || v.road == 2)) {
      const auto& r = sc.roads[0].label == v.road ? sc.roads[0] : sc.roads[1];
      if (v.spawn_s >= r.control_entry_s(sc.geometry))
        issues.push_back(where + ": spawn_s must lie before the control zone");
    }
    for (std::size_t k = 0; k < i; ++k) {
      const auto& o = sc.vehicles[k];
      if (o.id == v.id) issues.push_back("duplicate vehicle id '" + v.id + "'");
      if (o.road == v.road) {
        if (v.spawn_time < o.spawn_time)
          issues.push_back(where + ": spawn times must be non-decreasing per road");
        if (v.spawn_time == o.spawn_time &&
            std::abs(v.spawn_s - o.spawn_s) < sc.geometry.standstill_gap)
          issues.push_back(where + ": spawn gap to '" + o.id +
                           "' below the standstill gap");
      }
    }
  }

  if (!issues.empty()) {
    std::ostringstream msg;
    msg << "scenario '" << sc.name << "' invalid:";
    for (const auto& s : issues) msg << "\n  - " << s;
    throw ScenarioError(msg.str());
  }
  return sc;
}

inline Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_scenario(ss.str());
}

}  // namespace mergesim
