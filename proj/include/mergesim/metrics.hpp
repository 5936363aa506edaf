#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mergesim/engine.hpp"
#include "mergesim/errors.hpp"
#include "mergesim/trace.hpp"

namespace mergesim {

struct StopThresholds {
  double speed{0.005};      // |v| below this counts as stopped, m/s
  double min_duration{0.2}; // s a stop must last to be an event
};

struct VehicleMetrics {
  std::string id;
  int road{};
  double control_entry_time{std::numeric_limits<double>::quiet_NaN()};
  double merge_entry_time{std::numeric_limits<double>::quiet_NaN()};
  double merge_exit_time{std::numeric_limits<double>::quiet_NaN()};
  double control_zone_time{std::numeric_limits<double>::quiet_NaN()};
  int stop_count{0};
  double stopped_time{0.0};
  double effort{0.0};    // integral of u^2 dt, m^2/s^3
  double traction{0.0};  // integral of max(0, u*v) dt, m^2/s^2
  bool completed{false};
};

struct MetricsReport {
  std::string scenario;
  ControlMode mode{ControlMode::Optimal};
  std::uint64_t seed{};
  double control_zone_length{};
  double merging_zone_length{};
  double v_merge{};
  double makespan{std::numeric_limits<double>::quiet_NaN()};
  bool complete{false};
  double total_effort{0.0};
  double total_traction{0.0};
  int total_stops{0};
  std::vector<VehicleMetrics> vehicles;
};

// ---------------------------------------------------------------------------
// Travel metrics
// ---------------------------------------------------------------------------

// Zone timings and stop events.  Zone times come from the interpolated
// crossing events; a stop is a contiguous run of |v_applied| < threshold at
// least min_duration long.  Makespan spans the first control-zone entry to
// the last merging-zone exit.
inline MetricsReport travel_metrics(const Trace& trace,
                                    const StopThresholds& thresholds = {}) {
  MetricsReport report;
  report.scenario = trace.scenario_name;
  report.mode = trace.mode;
  report.seed = trace.seed;
  report.control_zone_length = trace.geometry.control_zone_length;
  report.merging_zone_length = trace.geometry.merging_zone_length;
  report.v_merge = trace.geometry.v_merge;
  report.vehicles.resize(trace.vehicle_ids.size());
  for (std::size_t i = 0; i < trace.vehicle_ids.size(); ++i) {
    report.vehicles[i].id = trace.vehicle_ids[i];
    report.vehicles[i].road = trace.vehicle_roads[i];
  }
  if (trace.rows.empty()) return report;

  bool any_zone_event = false;
  for (const auto& ev : trace.events) {
    if (ev.vehicle < 0 ||
        ev.vehicle >= static_cast<int>(report.vehicles.size()))
      continue;
    auto& vm = report.vehicles[static_cast<std::size_t>(ev.vehicle)];
    if (ev.type == "control_entry") {
      vm.control_entry_time = ev.time;
      any_zone_event = true;
    } else if (ev.type == "merge_entry") {
      vm.merge_entry_time = ev.time;
      any_zone_event = true;
    } else if (ev.type == "merge_exit") {
      vm.merge_exit_time = ev.time;
      any_zone_event = true;
    }
  }
  if (!any_zone_event)
    throw ScenarioError("trace has rows but no zone events; cannot compute travel metrics");

  double first_entry = std::numeric_limits<double>::infinity();
  double last_exit = -std::numeric_limits<double>::infinity();
  report.complete = true;
  for (auto& vm : report.vehicles) {
    if (!std::isnan(vm.control_entry_time) && !std::isnan(vm.merge_entry_time))
      vm.control_zone_time = vm.merge_entry_time - vm.control_entry_time;
    vm.completed = !std::isnan(vm.merge_exit_time);
    report.complete = report.complete && vm.completed;
    if (!std::isnan(vm.control_entry_time))
      first_entry = std::min(first_entry, vm.control_entry_time);
    if (vm.completed) last_exit = std::max(last_exit, vm.merge_exit_time);
  }
  if (std::isfinite(first_entry) && std::isfinite(last_exit))
    report.makespan = last_exit - first_entry;

  // Stop events from the applied-speed rows.
  struct StopScan {
    double start{};
    bool stopped{false};
  };
  std::vector<StopScan> scans(report.vehicles.size());
  std::vector<double> last_time(report.vehicles.size(),
                                std::numeric_limits<double>::quiet_NaN());
  const auto close_stop = [&](std::size_t v, double end) {
    auto& vm = report.vehicles[v];
    const double len = end - scans[v].start;
    if (len >= thresholds.min_duration) {
      ++vm.stop_count;
      vm.stopped_time += len;
    }
    scans[v].stopped = false;
  };
  for (const auto& row : trace.rows) {
    const auto v = static_cast<std::size_t>(row.vehicle);
    const bool slow = std::abs(row.v_applied) < thresholds.speed;
    if (slow && !scans[v].stopped) {
      scans[v].stopped = true;
      scans[v].start = row.time;
    } else if (!slow && scans[v].stopped) {
      close_stop(v, row.time);
    }
    last_time[v] = row.time;
  }
  for (std::size_t v = 0; v < scans.size(); ++v)
    if (scans[v].stopped) close_stop(v, last_time[v] + trace.dt);

  for (const auto& vm : report.vehicles) report.total_stops += vm.stop_count;
  return report;
}

// ---------------------------------------------------------------------------
// Effort metrics
// ---------------------------------------------------------------------------

struct EffortMetrics {
  int vehicle{};
  double effort{0.0};
  double traction{0.0};
};

// Acceleration is reconstructed as the forward difference of the applied
// speed, so it is piecewise constant between samples; v varies linearly
// there, which makes the max(0, u*v) integral a trapezoid per interval.
inline std::vector<EffortMetrics> effort_metrics(const Trace& trace) {
  std::vector<EffortMetrics> out(trace.vehicle_ids.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i].vehicle = static_cast<int>(i);
  std::vector<std::optional<std::pair<double, double>>> prev(
      trace.vehicle_ids.size());  // (time, v_applied)
  for (const auto& row : trace.rows) {
    const auto v = static_cast<std::size_t>(row.vehicle);
    if (prev[v]) {
      const double dt = row.time - prev[v]->first;
      if (dt > 0.0) {
        const double u = (row.v_applied - prev[v]->second) / dt;
        out[v].effort += u * u * dt;
        const double mean_v = 0.5 * (row.v_applied + prev[v]->second);
        out[v].traction += std::max(0.0, u * mean_v) * dt;
      }
    }
    prev[v] = {row.time, row.v_applied};
  }
  return out;
}

// Full report: travel metrics plus per-vehicle effort and traction.
inline MetricsReport build_report(const Trace& trace,
                                  const StopThresholds& thresholds = {}) {
  MetricsReport report = travel_metrics(trace, thresholds);
  for (const auto& e : effort_metrics(trace)) {
    auto& vm = report.vehicles[static_cast<std::size_t>(e.vehicle)];
    vm.effort = e.effort;
    vm.traction = e.traction;
    report.total_effort += e.effort;
    report.total_traction += e.traction;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

enum class ExportFormat { Csv, Jsonl };

struct ExportPaths {
  std::string trace_path;
  std::string events_path;
};

inline ExportPaths export_trace(const Trace& trace, ExportFormat format,
                                const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const bool csv = format == ExportFormat::Csv;
  ExportPaths paths{
      (fs::path(out_dir) / (csv ? "trace.csv" : "trace.jsonl")).string(),
      (fs::path(out_dir) / (csv ? "events.csv" : "events.jsonl")).string()};

  std::ofstream tf(paths.trace_path, std::ios::binary);
  if (!tf) throw SimError("cannot write " + paths.trace_path);
  if (csv) {
    tf << "tick,time_s,vehicle_id,road,x_m,y_m,theta_rad,v_cmd,omega_cmd,"
          "v_applied,route_s_m,zone\n";
    for (const auto& r : trace.rows) {
      tf << r.tick << ',' << fmt_g12(r.time) << ','
         << trace.vehicle_ids[r.vehicle] << ',' << r.road << ','
         << fmt_g12(r.x) << ',' << fmt_g12(r.y) << ',' << fmt_g12(r.theta)
         << ',' << fmt_g12(r.v_cmd) << ',' << fmt_g12(r.omega_cmd) << ','
         << fmt_g12(r.v_applied) << ',' << fmt_g12(r.route_s) << ','
         << to_string(r.zone) << '\n';
    }
  } else {
    for (const auto& r : trace.rows) {
      nlohmann::json j{{"tick", r.tick},
                       {"time_s", r.time},
                       {"vehicle_id", trace.vehicle_ids[r.vehicle]},
                       {"road", r.road},
                       {"x_m", r.x},
                       {"y_m", r.y},
                       {"theta_rad", r.theta},
                       {"v_cmd", r.v_cmd},
                       {"omega_cmd", r.omega_cmd},
                       {"v_applied", r.v_applied},
                       {"route_s_m", r.route_s},
                       {"zone", to_string(r.zone)}};
      tf << j.dump() << '\n';
    }
  }

  std::ofstream ef(paths.events_path, std::ios::binary);
  if (!ef) throw SimError("cannot write " + paths.events_path);
  if (csv) {
    ef << "tick,type,vehicle_id,payload\n";
    for (const auto& e : trace.events) {
      const std::string id = e.vehicle >= 0 ? trace.vehicle_ids[e.vehicle] : "-";
      ef << e.tick << ',' << e.type << ',' << id << ',' << e.payload << '\n';
    }
  } else {
    for (const auto& e : trace.events) {
      nlohmann::json j{{"tick", e.tick},
                       {"time_s", e.time},
                       {"type", e.type},
                       {"vehicle_id",
                        e.vehicle >= 0 ? trace.vehicle_ids[e.vehicle] : "-"},
                       {"payload", e.payload}};
      ef << j.dump() << '\n';
    }
  }
  return paths;
}

// ---------------------------------------------------------------------------
// Report serialization and comparison
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json vehicles = nlohmann::json::array();
  for (const auto& v : r.vehicles) {
    vehicles.push_back({{"id", v.id},
                        {"road", v.road},
                        {"control_entry_time", v.control_entry_time},
                        {"merge_entry_time", v.merge_entry_time},
                        {"merge_exit_time", v.merge_exit_time},
                        {"control_zone_time", v.control_zone_time},
                        {"stop_count", v.stop_count},
                        {"stopped_time", v.stopped_time},
                        {"effort", v.effort},
                        {"traction", v.traction},
                        {"completed", v.completed}});
  }
  return {{"scenario", r.scenario},
          {"mode", to_string(r.mode)},
          {"seed", r.seed},
          {"geometry",
           {{"control_zone_length", r.control_zone_length},
            {"merging_zone_length", r.merging_zone_length},
            {"v_merge", r.v_merge}}},
          {"makespan", r.makespan},
          {"complete", r.complete},
          {"total_effort", r.total_effort},
          {"total_traction", r.total_traction},
          {"total_stops", r.total_stops},
          {"vehicles", vehicles}};
}

inline MetricsReport report_from_json(const nlohmann::json& j) {
  // Times of events that never happened serialize as null; read them back as
  // NaN.
  const auto as_double = [](const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN()
                       : v.get<double>();
  };
  MetricsReport r;
  try {
    r.scenario = j.at("scenario").get<std::string>();
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "optimal")
      r.mode = ControlMode::Optimal;
    else if (mode == "baseline")
      r.mode = ControlMode::Baseline;
    else
      throw ScenarioError("report mode must be 'optimal' or 'baseline'");
    r.seed = j.at("seed").get<std::uint64_t>();
    const auto& g = j.at("geometry");
    r.control_zone_length = g.at("control_zone_length").get<double>();
    r.merging_zone_length = g.at("merging_zone_length").get<double>();
    r.v_merge = g.at("v_merge").get<double>();
    r.makespan = as_double(j.at("makespan"));
    r.complete = j.at("complete").get<bool>();
    r.total_effort = j.at("total_effort").get<double>();
    r.total_traction = j.at("total_traction").get<double>();
    r.total_stops = j.at("total_stops").get<int>();
    for (const auto& jv : j.at("vehicles")) {
      VehicleMetrics v;
      v.id = jv.at("id").get<std::string>();
      v.road = jv.at("road").get<int>();
      v.control_entry_time = as_double(jv.at("control_entry_time"));
      v.merge_entry_time = as_double(jv.at("merge_entry_time"));
      v.merge_exit_time = as_double(jv.at("merge_exit_time"));
      v.control_zone_time = as_double(jv.at("control_zone_time"));
      v.stop_count = jv.at("stop_count").get<int>();
      v.stopped_time = jv.at("stopped_time").get<double>();
      v.effort = jv.at("effort").get<double>();
      v.traction = jv.at("traction").get<double>();
      v.completed = jv.at("completed").get<bool>();
      r.vehicles.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("malformed metrics report: ") + e.what());
  }
  return r;
}

inline void write_report(const MetricsReport& r, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw SimError("cannot write " + path);
  // NaN is not representable in JSON; emit null instead.
  nlohmann::json j = to_json(r);
  if (std::isnan(r.makespan)) j["makespan"] = nullptr;
  f << j.dump(2) << '\n';
}

inline MetricsReport read_report(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ScenarioError("cannot open report: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("malformed metrics report: ") + e.what());
  }
  return report_from_json(j);
}

struct SavingsEntry {
  double baseline{};
  double optimal{};
  double savings{std::numeric_limits<double>::quiet_NaN()};  // fraction
  bool applicable{false};
};

struct Comparison {
  std::string scenario;
  SavingsEntry makespan;
  SavingsEntry effort;
  SavingsEntry traction;
  int baseline_stops{};
  int optimal_stops{};
};

// Relative improvement of the optimal run over the baseline run of the same
// scenario: (baseline - optimal) / baseline per metric.  A non-positive
// baseline leaves the entry marked not applicable.
inline Comparison compare(const MetricsReport& baseline,
                          const MetricsReport& optimal) {
  if (baseline.mode != ControlMode::Baseline ||
      optimal.mode != ControlMode::Optimal)
    throw ScenarioError("compare expects a baseline report and an optimal report");
  if (baseline.scenario != optimal.scenario ||
      baseline.control_zone_length != optimal.control_zone_length ||
      baseline.merging_zone_length != optimal.merging_zone_length ||
      baseline.v_merge != optimal.v_merge)
    throw ScenarioError("compare: reports describe different scenarios");
  Comparison c;
  c.scenario = baseline.scenario;
  const auto entry = [](double base, double opt) {
    SavingsEntry e{base, opt, std::numeric_limits<double>::quiet_NaN(), false};
    if (base > 0.0 && std::isfinite(base) && std::isfinite(opt)) {
      e.savings = (base - opt) / base;
      e.applicable = true;
    }
    return e;
  };
  c.makespan = entry(baseline.makespan, optimal.makespan);
  c.effort = entry(baseline.total_effort, optimal.total_effort);
  c.traction = entry(baseline.total_traction, optimal.total_traction);
  c.baseline_stops = baseline.total_stops;
  c.optimal_stops = optimal.total_stops;
  return c;
}

inline nlohmann::json to_json(const Comparison& c) {
  const auto entry = [](const SavingsEntry& e) {
    nlohmann::json j{{"baseline", e.baseline},
                     {"optimal", e.optimal},
                     {"applicable", e.applicable}};
    if (e.applicable)
      j["savings"] = e.savings;
    else
      j["savings"] = nullptr;
    return j;
  };
  return {{"scenario", c.scenario},
          {"makespan", entry(c.makespan)},
          {"effort", entry(c.effort)},
          {"traction", entry(c.traction)},
          {"baseline_stops", c.baseline_stops},
          {"optimal_stops", c.optimal_stops}};
}

}  // namespace mergesim
