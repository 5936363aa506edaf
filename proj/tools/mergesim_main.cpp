// Command-line front end: runs scenarios, compares metric reports, and lints
// scenario files.
//
// Exit codes: 0 success, 2 scenario error, 3 safety violation detected.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mergesim/engine.hpp"
#include "mergesim/metrics.hpp"
#include "mergesim/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitScenarioError = 2;
constexpr int kExitSafetyViolation = 3;

struct RunOptions {
  std::string scenario_path;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::string format = "csv";
};

void print_report(const mergesim::MetricsReport& report) {
  std::printf("scenario       %s [%s], seed %llu\n", report.scenario.c_str(),
              mergesim::to_string(report.mode),
              static_cast<unsigned long long>(report.seed));
  if (std::isnan(report.makespan))
    std::printf("makespan       n/a\n");
  else
    std::printf("makespan       %.3f s%s\n", report.makespan,
                report.complete ? "" : " (incomplete run)");
  std::printf("total effort   %.6f m^2/s^3\n", report.total_effort);
  std::printf("total traction %.6f m^2/s^2\n", report.total_traction);
  std::printf("stop events    %d\n", report.total_stops);
  std::printf("%-8s %-4s %10s %10s %10s %6s %10s\n", "vehicle", "road",
              "ctrl_in", "merge_in", "merge_out", "stops", "effort");
  for (const auto& v : report.vehicles) {
    const auto cell = [](double t) {
      return std::isnan(t) ? std::string("-") : mergesim::fmt_g12(t);
    };
    std::printf("%-8s %-4d %10s %10s %10s %6d %10.6f\n", v.id.c_str(), v.road,
                cell(v.control_entry_time).c_str(),
                cell(v.merge_entry_time).c_str(),
                cell(v.merge_exit_time).c_str(), v.stop_count, v.effort);
  }
}

int cmd_run(const RunOptions& opt) {
  mergesim::Scenario scenario = mergesim::load_scenario_file(opt.scenario_path);
  if (opt.mode) {
    if (*opt.mode == "optimal")
      scenario.mode = mergesim::ControlMode::Optimal;
    else if (*opt.mode == "baseline")
      scenario.mode = mergesim::ControlMode::Baseline;
    else
      throw mergesim::ScenarioError("--mode must be 'optimal' or 'baseline'");
  }
  if (opt.seed) scenario.seed = *opt.seed;

  mergesim::World world(scenario);
  mergesim::Trace trace = world.run();
  const auto violations = mergesim::detect_collisions(trace, scenario);
  for (const auto& ev : violations) trace.events.push_back(ev);

  const auto format = opt.format == "jsonl" ? mergesim::ExportFormat::Jsonl
                                            : mergesim::ExportFormat::Csv;
  const auto paths = mergesim::export_trace(trace, format, opt.out_dir);
  const auto report = mergesim::build_report(trace);
  const auto report_path =
      (std::filesystem::path(opt.out_dir) / "report.json").string();
  mergesim::write_report(report, report_path);

  print_report(report);
  std::printf("trace          %s\n", paths.trace_path.c_str());
  std::printf("events         %s\n", paths.events_path.c_str());
  std::printf("report         %s\n", report_path.c_str());

  if (!violations.empty()) {
    std::fprintf(stderr, "safety violations detected:\n");
    for (const auto& ev : violations) {
      const std::string id =
          ev.vehicle >= 0 ? trace.vehicle_ids[ev.vehicle] : "-";
      std::fprintf(stderr, "  t=%.3f %s vehicle=%s %s\n", ev.time,
                   ev.type.c_str(), id.c_str(), ev.payload.c_str());
    }
    return kExitSafetyViolation;
  }
  return kExitOk;
}

int cmd_compare(const std::string& baseline_path,
                const std::string& optimal_path, const std::string& out_dir) {
  const auto baseline = mergesim::read_report(baseline_path);
  const auto optimal = mergesim::read_report(optimal_path);
  const auto cmp = mergesim::compare(baseline, optimal);

  const auto line = [](const char* name, const mergesim::SavingsEntry& e) {
    if (e.applicable)
      std::printf("%-9s baseline %10.4f  optimal %10.4f  savings %6.1f%%\n",
                  name, e.baseline, e.optimal, 100.0 * e.savings);
    else
      std::printf("%-9s baseline %10.4f  optimal %10.4f  savings    n/a\n",
                  name, e.baseline, e.optimal);
  };
  std::printf("scenario  %s\n", cmp.scenario.c_str());
  line("makespan", cmp.makespan);
  line("effort", cmp.effort);
  line("traction", cmp.traction);
  std::printf("stops     baseline %10d  optimal %10d\n", cmp.baseline_stops,
              cmp.optimal_stops);

  std::filesystem::create_directories(out_dir);
  const auto out_path =
      (std::filesystem::path(out_dir) / "comparison.json").string();
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw mergesim::SimError("cannot write " + out_path);
  out << mergesim::to_json(cmp).dump(2) << '\n';
  std::printf("comparison %s\n", out_path.c_str());
  return kExitOk;
}

int cmd_validate(const std::string& scenario_path) {
  const auto scenario = mergesim::load_scenario_file(scenario_path);
  std::printf("scenario '%s' is valid: %zu vehicles, %zu roads, mode %s, dt %g s\n",
              scenario.name.c_str(), scenario.vehicles.size(),
              scenario.roads.size(), mergesim::to_string(scenario.mode),
              scenario.dt);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coordinated-merging microsimulator"};
  app.require_subcommand(1);

  RunOptions run_opt;
  auto* run = app.add_subcommand("run", "simulate a scenario");
  run->add_option("--scenario", run_opt.scenario_path, "scenario JSON file")
      ->required();
  std::string mode_flag, format_flag = "csv";
  std::uint64_t seed_flag = 0;
  bool mode_set = false, seed_set = false;
  run->add_option("--mode", mode_flag, "optimal|baseline (overrides the file)")
      ->each([&](const std::string&) { mode_set = true; });
  run->add_option("--seed", seed_flag, "RNG seed (overrides the file)")
      ->each([&](const std::string&) { seed_set = true; });
  run->add_option("--out-dir", run_opt.out_dir, "output directory");
  run->add_option("--format", format_flag, "csv|jsonl")
      ->check(CLI::IsMember({"csv", "jsonl"}));

  std::string baseline_path, optimal_path, compare_out = ".";
  auto* cmp = app.add_subcommand("compare", "compare two metric reports");
  cmp->add_option("baseline", baseline_path, "baseline report.json")->required();
  cmp->add_option("optimal", optimal_path, "optimal report.json")->required();
  cmp->add_option("--out-dir", compare_out, "output directory");

  std::string validate_path;
  auto* val = app.add_subcommand("validate", "check a scenario file");
  val->add_option("--scenario", validate_path, "scenario JSON file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (mode_set) run_opt.mode = mode_flag;
      if (seed_set) run_opt.seed = seed_flag;
      run_opt.format = format_flag;
      return cmd_run(run_opt);
    }
    if (cmp->parsed()) return cmd_compare(baseline_path, optimal_path, compare_out);
    if (val->parsed()) return cmd_validate(validate_path);
  } catch (const mergesim::ScenarioError& e) {
    std::fprintf(stderr, "scenario error: %s\n", e.what());
    return kExitScenarioError;
  } catch (const mergesim::SimError& e) {
    std::fprintf(stderr, "simulation error: %s\n", e.what());
    return kExitScenarioError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitScenarioError;
  }
  return kExitOk;
}
