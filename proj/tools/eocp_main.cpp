// Copyright 2026 The eocp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Batch driver: run the NMPC / full-horizon / open-loop pipelines over a
// drive cycle, validate parameter files, and project fractional mode traces
// onto bang-bang schedules. All data outputs are deterministic; the only
// timestamp lives in the run_meta.json sidecar.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "eocp/cycles.hpp"
#include "eocp/embedding.hpp"
#include "eocp/json_io.hpp"
#include "eocp/log.hpp"
#include "eocp/nmpc.hpp"

namespace fs = std::filesystem;
using namespace eocp;

namespace {

SpeedUnit parse_unit(const std::string& s) {
  if (s == "mph") return SpeedUnit::Mph;
  if (s == "kph") return SpeedUnit::Kph;
  if (s == "mps") return SpeedUnit::Mps;
  throw CLI::ValidationError("--speed-unit", "must be one of mph, mps, kph");
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << contents;
}

void write_solver_log(const fs::path& path, const std::vector<StepDiagnostics>& steps) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "window_t_start_s,iter,objective,kkt,step_norm,merit_penalty\n";
  char buf[256];
  for (const auto& d : steps) {
    for (const auto& r : d.trace) {
      std::snprintf(buf, sizeof(buf), "%.10g,%d,%.10g,%.10g,%.10g,%.10g\n", d.t_start, r.iter,
                    r.objective, r.kkt, r.step_norm, r.merit_penalty);
      os << buf;
    }
  }
}

void write_meta(const fs::path& path, const std::string& command_line) {
  json meta;
  const auto now = std::chrono::system_clock::now();
  meta["wall_time_unix_s"] =
      std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  meta["command"] = command_line;
  write_file(path, meta.dump(2) + "\n");
}

/// Per-interval controls recovered from a trajectory CSV. The logged u_ice
/// and u_fr are the v-blend of the two mode controls; applying the blend to
/// both modes reproduces the same embedded dynamics because the model is
/// affine in the controls and those channels share coefficients.
struct ReplayControls {
  Mesh mesh;
  std::vector<ControlVector> u0, u1;
  std::vector<double> v;
  StepTrace v_trace;
  ControlTrace u0_trace, u1_trace;
};

ReplayControls controls_from_log(const TrajectoryLog& log, double partition, double duration) {
  ReplayControls rc;
  const int n = static_cast<int>(std::floor(duration / partition + 1e-9));
  if (n < 1) throw std::runtime_error("trajectory too short for one partition");
  rc.mesh = Mesh{log.points.front().t_s, n, partition};
  rc.v_trace = StepTrace{rc.mesh.t0, partition, {}};
  rc.u0_trace = ControlTrace{rc.mesh.t0, partition, {}};
  rc.u1_trace = ControlTrace{rc.mesh.t0, partition, {}};
  std::size_t row = 0;
  for (int j = 0; j < n; ++j) {
    const double t = rc.mesh.t(j);
    while (row + 1 < log.points.size() && log.points[row].t_s < t - 1e-9) ++row;
    const TrajectoryPoint& p = log.points[row];
    rc.u0.push_back({p.u_ice, p.u_fr, p.u_em});
    rc.u1.push_back({p.u_ice, p.u_fr, p.u_gen});
    rc.v.push_back(p.mode_v);
    rc.v_trace.values.push_back(p.mode_v);
    rc.u0_trace.values.push_back(rc.u0.back());
    rc.u1_trace.values.push_back(rc.u1.back());
  }
  return rc;
}

int cmd_run(const std::string& cycle_path, const std::string& unit_str,
            const std::string& params_path, const std::string& mode, const std::string& out_dir,
            double window, double partition, double tmin, double tfinal,
            const std::string& controls_path, bool dump_nlp_flag,
            const std::string& command_line) {
  if (!fs::exists(params_path)) {
    std::cerr << "error: params file not found: " << params_path << "\n";
    return 1;
  }
  if (!fs::exists(cycle_path)) {
    std::cerr << "error: cycle file not found: " << cycle_path << "\n";
    return 1;
  }
  ParamsFile pf = load_params_file(params_path);
  const auto violations = validate(pf.vehicle);
  const auto wviolations = validate(pf.weights);
  if (!violations.empty() || !wviolations.empty()) {
    for (const auto& v : violations) std::cerr << "error: params: " << v << "\n";
    for (const auto& v : wviolations) std::cerr << "error: params: " << v << "\n";
    return 1;
  }
  const DriveCycle cycle = load_cycle_csv(fs::path(cycle_path), parse_unit(unit_str));

  fs::create_directories(out_dir);
  const fs::path out(out_dir);

  NmpcConfig cfg;
  cfg.window_length_s = window;
  cfg.partition_s = partition;
  cfg.apply_length_s = partition;
  cfg.t_final_s = tfinal > 0.0 ? tfinal : cycle.duration();
  cfg.c_bat_nom = pf.weights.c_bat_nom;
  cfg.t_min_s = tmin;
  cfg.solver.log_iterations = true;

  const VehicleState x0{0.0, pf.weights.soc_nom, cycle.v_des_at(0.0)};

  TrajectoryLog log;
  ModeSchedule schedule;
  std::vector<StepDiagnostics> steps;
  int solver_failures = 0;

  if (mode == "nmpc") {
    log_msg(LogLevel::Info, "running nmpc over " + std::to_string(cfg.t_final_s) + " s");
    NmpcRunResult run = run_nmpc(cycle, x0, cfg, pf.weights, pf.vehicle);
    log = std::move(run.log);
    schedule = run.schedule;
    steps = std::move(run.steps);
    solver_failures = log.solver_failures;
    if (dump_nlp_flag) {
      const OcpWindow w0 = make_window(cycle, 0.0, cfg.window_partitions(), cfg.partition_s);
      NlpProblem P = build_nlp(w0, x0, pf.weights, pf.vehicle,
                               sliding_soc_weight(w0.mesh.t_end(), cfg));
      write_file(out / "nlp_debug.json", dump_nlp(P).dump(2) + "\n");
    }
  } else if (mode == "full") {
    log_msg(LogLevel::Info, "running full-horizon solve");
    FullHorizonResult run = run_full_horizon(cycle, x0, cfg, pf.weights, pf.vehicle);
    log = std::move(run.log);
    schedule = run.schedule;
    solver_failures = run.solver_failures;
    if (dump_nlp_flag) {
      const int n = static_cast<int>(std::lround(cfg.t_final_s / cfg.partition_s));
      const OcpWindow w0 = make_window(cycle, 0.0, n, cfg.partition_s);
      NlpProblem P = build_nlp(w0, x0, pf.weights, pf.vehicle, cfg.c_bat_nom);
      write_file(out / "nlp_debug.json", dump_nlp(P).dump(2) + "\n");
    }
  } else if (mode == "simulate") {
    log_msg(LogLevel::Info, "open-loop simulation");
    const double dur = std::min(cfg.t_final_s, cycle.duration());
    if (controls_path.empty()) {
      const int n = static_cast<int>(std::floor(dur / partition + 1e-9));
      std::vector<ControlVector> zeros(static_cast<std::size_t>(n));
      std::vector<double> vs(static_cast<std::size_t>(n), 0.0);
      log = simulate_controls(cycle, x0, Mesh{0.0, n, partition}, zeros, zeros, vs, pf.weights,
                              pf.vehicle);
    } else {
      std::ifstream is(controls_path);
      if (!is) {
        std::cerr << "error: controls file not found: " << controls_path << "\n";
        return 1;
      }
      const TrajectoryLog src = read_trajectory_csv(is);
      const ReplayControls rc = controls_from_log(src, partition, dur);
      log = simulate_controls(cycle, x0, rc.mesh, rc.u0, rc.u1, rc.v, pf.weights, pf.vehicle);
      schedule = project_modes(rc.v_trace, rc.u0_trace, rc.u1_trace, tmin);
    }
    solver_failures = 0;
  } else {
    std::cerr << "error: unknown mode " << mode << "\n";
    return 1;
  }

  {
    std::ofstream os(out / "trajectory.csv", std::ios::binary);
    write_trajectory_csv(log, os);
  }
  if (schedule.t_end > schedule.t_start) {
    std::ofstream os(out / "mode_schedule.csv", std::ios::binary);
    write_schedule_csv(schedule, os);
  }
  write_solver_log(out / "solver_log.csv", steps);
  const RunSummary summary =
      summarize(log, pf.vehicle, fuel_volume_l(log, pf.vehicle), fuel_economy_mpg(log, pf.vehicle));
  write_file(out / "summary.json", to_json(summary).dump(2) + "\n");
  write_meta(out / "run_meta.json", command_line);

  if (log.aborted) {
    std::cerr << "error: run aborted mid-cycle (integration failure); partial log written\n";
    return 2;
  }
  if (solver_failures > 0) {
    log_msg(LogLevel::Error, std::to_string(solver_failures) + " window(s) not solved to optimality");
    return 2;
  }
  return 0;
}

int cmd_validate_params(const std::string& params_path) {
  if (!fs::exists(params_path)) {
    std::cerr << "error: params file not found: " << params_path << "\n";
    return 1;
  }
  try {
    ParamsFile pf = load_params_file(params_path);
    auto v = validate(pf.vehicle);
    const auto wv = validate(pf.weights);
    v.insert(v.end(), wv.begin(), wv.end());
    if (v.empty()) {
      std::cout << "params ok: " << params_path << "\n";
      return 0;
    }
    for (const auto& msg : v) std::cout << "violation: " << msg << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_project(const std::string& trajectory_path, double tmin, double partition,
                const std::string& out_dir) {
  std::ifstream is(trajectory_path);
  if (!is) {
    std::cerr << "error: trajectory file not found: " << trajectory_path << "\n";
    return 1;
  }
  const TrajectoryLog src = read_trajectory_csv(is);
  if (src.points.size() < 2) {
    std::cerr << "error: trajectory has no usable rows\n";
    return 1;
  }
  const double duration = src.points.back().t_s - src.points.front().t_s;
  const ReplayControls rc = controls_from_log(src, partition, duration);

  fs::create_directories(out_dir);
  const ModeSchedule projected = project_modes(rc.v_trace, rc.u0_trace, rc.u1_trace, tmin);
  const ModeSchedule pwm = pwm_schedule(rc.v_trace, tmin);
  {
    std::ofstream os(fs::path(out_dir) / "mode_schedule_projected.csv", std::ios::binary);
    write_schedule_csv(projected, os);
  }
  {
    std::ofstream os(fs::path(out_dir) / "mode_schedule_pwm.csv", std::ios::binary);
    write_schedule_csv(pwm, os);
  }
  std::cout << "projected switches: " << projected.switch_count()
            << ", pwm switches: " << pwm.switch_count() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Embedded-optimal-control power management for a parallel hybrid vehicle"};
  app.require_subcommand(1);

  std::string cycle_path, params_path = "data/default_params.json", out_dir = "out";
  std::string unit_str = "mps", mode = "nmpc", controls_path;
  double window = 4.0, partition = 1.0, tmin = 1.0, tfinal = 0.0;
  bool dump_nlp_flag = false;

  auto* run = app.add_subcommand("run", "Run a scenario over a drive cycle");
  run->add_option("--cycle", cycle_path, "Drive cycle CSV (t_s,speed[,grade_deg])")->required();
  run->add_option("--speed-unit", unit_str, "Cycle speed unit: mph, mps, kph");
  run->add_option("--params", params_path, "Parameter file (JSON)");
  run->add_option("--mode", mode, "Pipeline: nmpc, full, simulate");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--window", window, "Predictive window length [s]");
  run->add_option("--partition", partition, "Collocation partition [s]");
  run->add_option("--tmin", tmin, "Minimum switching period [s]");
  run->add_option("--tfinal", tfinal, "Final time [s]; defaults to the cycle duration");
  run->add_option("--controls", controls_path, "Trajectory CSV to replay (simulate mode)");
  run->add_flag("--dump-nlp", dump_nlp_flag, "Write nlp_debug.json for the first window");

  std::string vp_path;
  auto* vp = app.add_subcommand("validate-params", "Check a parameter file");
  vp->add_option("--params", vp_path, "Parameter file (JSON)")->required();

  std::string proj_traj, proj_out = "out";
  double proj_tmin = 1.0, proj_partition = 1.0;
  auto* proj = app.add_subcommand("project", "Project a fractional mode trace to bang-bang");
  proj->add_option("--trajectory", proj_traj, "Trajectory CSV with fractional mode_v")->required();
  proj->add_option("--tmin", proj_tmin, "Minimum switching period [s]");
  proj->add_option("--partition", proj_partition, "Grid step of the trace [s]");
  proj->add_option("--out", proj_out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  std::string command_line;
  for (int i = 0; i < argc; ++i) {
    if (i) command_line += ' ';
    command_line += argv[i];
  }

  try {
    if (run->parsed()) {
      return cmd_run(cycle_path, unit_str, params_path, mode, out_dir, window, partition, tmin,
                     tfinal, controls_path, dump_nlp_flag, command_line);
    }
    if (vp->parsed()) return cmd_validate_params(vp_path);
    if (proj->parsed()) return cmd_project(proj_traj, proj_tmin, proj_partition, proj_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
