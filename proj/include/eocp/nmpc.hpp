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

#ifndef EOCP_NMPC_HPP_
#define EOCP_NMPC_HPP_

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "eocp/cycles.hpp"
#include "eocp/embedding.hpp"
#include "eocp/solver.hpp"
#include "eocp/trajectory.hpp"
#include "eocp/transcription.hpp"

namespace eocp {

/// Receding-horizon configuration. The window must be an integer number of
/// partitions and the control is applied over exactly one partition.
struct NmpcConfig {
  double window_length_s = 4.0;
  double partition_s = 1.0;
  double apply_length_s = 1.0;
  double t_final_s = 0.0;
  double c_bat_nom = 1e5;
  double t_min_s = 1.0;          ///< minimum switching period for mode recovery
  double plant_substep_s = 0.05;
  /// Window-solver settings. The relaxed mode variable makes (v, u) exchanges
  /// near-invariant, so the stationarity plateau of a window NLP sits around
  /// 1e-5; a 1e-4 tolerance is tight for supervisory power splits and avoids
  /// flagging those plateaus as failures.
  SolverConfig solver{.kkt_tol = 1e-4, .max_iter = 400};

  int window_partitions() const {
    const double k = window_length_s / partition_s;
    const int ki = static_cast<int>(std::lround(k));
    if (ki < 1 || std::abs(k - ki) > 1e-9) {
      throw std::invalid_argument("NmpcConfig: window must be an integer number of partitions");
    }
    return ki;
  }

  void check() const {
    (void)window_partitions();
    if (std::abs(apply_length_s - partition_s) > 1e-12) {
      throw std::invalid_argument("NmpcConfig: apply_length must equal the partition");
    }
    if (!(t_final_s > 0.0)) throw std::invalid_argument("NmpcConfig: t_final must be > 0");
  }
};

/// Terminal SOC weight sliding linearly with the window end time:
/// C_bat(t) = (t / t_final) * c_bat_nom.
inline double sliding_soc_weight(double t_window_end, const NmpcConfig& cfg) {
  if (!(cfg.t_final_s > 0.0)) throw std::invalid_argument("sliding_soc_weight: t_final <= 0");
  return (t_window_end / cfg.t_final_s) * cfg.c_bat_nom;
}

struct StepDiagnostics {
  double t_start = 0.0;
  double window_end = 0.0;
  double c_bat = 0.0;
  SolveStatus status = SolveStatus::Optimal;
  bool accepted = true;  ///< window-acceptance policy (see accept_window_solve)
  double objective = 0.0;
  double kkt = 0.0;
  int iterations = 0;
  std::vector<IterationRecord> trace;  ///< filled when solver.log_iterations is set
};

/// Driver-level acceptance of a window solve. The absolute KKT tolerance is
/// mis-scaled for windows whose cost is large (the stationarity plateau of
/// the degenerate mode exchange grows with the cost), so a solve is accepted
/// when it is feasible and stationary relative to its own magnitude; only
/// genuinely rough solves count as failures.
inline bool accept_window_solve(const NlpProblem& P, const SolverResult& res, double kkt_tol) {
  if (res.status == SolveStatus::Optimal) return true;
  if (res.status == SolveStatus::Infeasible) return false;
  Eigen::VectorXd c;
  P.nlp.equalities(res.z, c, nullptr);
  if (c.lpNorm<Eigen::Infinity>() > 1e-6) return false;
  return res.kkt <= 10.0 * kkt_tol * (1.0 + std::abs(res.objective));
}

struct NmpcStepResult {
  ControlVector u0;
  ControlVector u1;
  double v = 0.0;
  VehicleState next_state;
  TrajectorySegment segment;
  StepDiagnostics diag;
  Eigen::VectorXd solution;  ///< full window solution (warm start for the next step)
  int window_intervals = 0;
};

namespace detail {

inline void append_segment(TrajectoryLog& log, const TrajectorySegment& seg,
                           const DriveCycle& cycle, const ControlVector& u0,
                           const ControlVector& u1, double v, const CostWeights& w,
                           const VehicleParams& prm) {
  for (std::size_t i = 0; i < seg.samples.size(); ++i) {
    const SegmentSample& s = seg.samples[i];
    if (!log.points.empty() && i == 0 &&
        std::abs(log.points.back().t_s - s.t_s) < 1e-12) {
      continue;  // segment start duplicates the previous segment end
    }
    TrajectoryPoint p;
    p.t_s = s.t_s;
    p.v_des_mps = cycle.v_des_at(s.t_s);
    p.v_mps = s.state.v_mps;
    p.p_ice_kw = s.state.p_ice_kw;
    p.soc = s.state.soc;
    p.mode_v = v;
    p.u_ice = (1.0 - v) * u0.ice + v * u1.ice;
    p.u_fr = (1.0 - v) * u0.fr + v * u1.fr;
    p.u_em = u0.mode;
    p.u_gen = u1.mode;
    p.p_ed_out_kw = s.flows.p_ed_out_kw;
    p.p_bat_kw = s.flows.p_bat_kw;
    p.p_fr_kw = s.flows.p_fr_kw;
    p.p_fuel_kw = s.flows.p_fuel_kw;
    p.grade_rad = cycle.grade_at(s.t_s);
    p.stage_cost = embedded_stage_cost(s.state, u0, u1, v, p.v_des_mps, prm, w);
    log.points.push_back(p);
  }
  log.clamp_events += seg.clamp_events;
}

/// Binary mode of one applied interval per the projection rule with constant
/// controls: mode 0 when ||(1-v) u0|| >= ||v u1||.
inline int project_step_mode(const ControlVector& u0, const ControlVector& u1, double v) {
  return ((1.0 - v) * u0.vec()).norm() >= (v * u1.vec()).norm() ? 0 : 1;
}

}  // namespace detail

/// One receding-horizon step at time t_j: build the windowed NLP (grade
/// frozen at the window start, terminal weight from the sliding rule), solve
/// it, and apply the first-interval controls to the plant for one partition.
/// On solver non-convergence the best iterate is applied and flagged in the
/// diagnostics.
inline NmpcStepResult nmpc_step(const VehicleState& x, double t_j, const DriveCycle& cycle,
                                const NmpcConfig& cfg, const CostWeights& weights,
                                const VehicleParams& prm,
                                const std::optional<Eigen::VectorXd>& warm = {}) {
  cfg.check();
  const double horizon_left = std::min(cfg.t_final_s, cycle.duration()) - t_j;
  if (!(horizon_left > 1e-9)) throw std::invalid_argument("nmpc_step: window beyond the horizon");
  const int n_full = cfg.window_partitions();
  const int n = std::max(1, std::min(n_full, static_cast<int>(std::floor(horizon_left / cfg.partition_s + 1e-9))));

  const OcpWindow window = make_window(cycle, t_j, n, cfg.partition_s);
  NmpcStepResult out;
  out.window_intervals = n;
  out.diag.t_start = t_j;
  out.diag.window_end = window.mesh.t_end();
  out.diag.c_bat = sliding_soc_weight(window.mesh.t_end(), cfg);

  NlpProblem P = build_nlp(window, x, weights, prm, out.diag.c_bat);
  Eigen::VectorXd z0 = P.warm_start;
  const bool warm_used = warm && warm->size() == z0.size();
  if (warm_used) z0 = *warm;
  SolverResult res = solve(P.nlp, cfg.solver, z0);
  if (res.status != SolveStatus::Optimal && warm_used) {
    // a shifted warm start can drop the solve into a bad basin; retry cold
    SolverResult retry = solve(P.nlp, cfg.solver, P.warm_start);
    if (retry.status == SolveStatus::Optimal || retry.objective < res.objective) {
      res = std::move(retry);
    }
  }

  out.diag.status = res.status;
  out.diag.accepted = accept_window_solve(P, res, cfg.solver.kkt_tol);
  out.diag.objective = res.objective;
  out.diag.kkt = res.kkt;
  out.diag.iterations = res.iterations;
  out.diag.trace = res.trace;
  out.solution = res.z;

  out.u0 = ControlVector::from_vec(P.u0_at(res.z, 1));
  out.u1 = ControlVector::from_vec(P.u1_at(res.z, 1));
  out.v = P.v_at(res.z, 1);

  const double apply = std::min(cfg.apply_length_s, horizon_left);
  IntegrationResult ir = integrate_plant(x, out.u0, out.u1, ModeSignal::constant(out.v), t_j,
                                         apply, cycle.grade_fn(), prm, cfg.plant_substep_s);
  out.next_state = ir.end_state;
  out.segment = std::move(ir.segment);
  return out;
}

struct NmpcRunResult {
  TrajectoryLog log;
  std::vector<StepDiagnostics> steps;
  ModeSchedule schedule;          ///< per-step projected binary modes
  double closed_loop_cost = 0.0;  ///< PI of the logged trajectory with C_bat = c_bat_nom
};

/// Full receding-horizon run with shift-and-duplicate warm starting.
/// Aborts with a partial log if plant integration fails.
inline NmpcRunResult run_nmpc(const DriveCycle& cycle, const VehicleState& x0,
                              const NmpcConfig& cfg, const CostWeights& weights,
                              const VehicleParams& prm) {
  cfg.check();
  const double t_final = std::min(cfg.t_final_s, cycle.duration());
  if (!(t_final >= cfg.partition_s)) {
    throw std::invalid_argument("run_nmpc: horizon shorter than one partition");
  }

  NmpcRunResult run;
  VehicleState x = x0;
  std::optional<Eigen::VectorXd> warm;
  int prev_mode = -1;
  std::vector<detail::ModePiece> mode_pieces;

  for (double t_j = 0.0; t_j < t_final - 1e-9; t_j += cfg.apply_length_s) {
    NmpcStepResult step;
    try {
      step = nmpc_step(x, t_j, cycle, cfg, weights, prm, warm);
    } catch (const std::runtime_error&) {
      run.log.aborted = true;
      break;
    }
    if (!step.diag.accepted) ++run.log.solver_failures;
    run.steps.push_back(step.diag);

    detail::append_segment(run.log, step.segment, cycle, step.u0, step.u1, step.v, weights, prm);
    const int mode = detail::project_step_mode(step.u0, step.u1, step.v);
    if (prev_mode >= 0 && mode != prev_mode) ++run.log.mode_switches;
    prev_mode = mode;
    mode_pieces.push_back({t_j, std::min(t_j + cfg.apply_length_s, t_final), mode});

    // shift the window solution one partition for the next warm start (the
    // last interval is duplicated; a size mismatch near the horizon end makes
    // nmpc_step fall back to its own warm start)
    const DecisionLayout L{3, 3, step.window_intervals};
    Eigen::VectorXd shifted = step.solution;
    if (step.window_intervals > 1) {
      for (int j = 0; j < step.window_intervals; ++j) {
        shifted.segment(L.x_index(j), 3) = step.solution.segment(L.x_index(j + 1), 3);
      }
      for (int j = 1; j < step.window_intervals; ++j) {
        shifted.segment(L.u0_index(j), 3) = step.solution.segment(L.u0_index(j + 1), 3);
        shifted.segment(L.u1_index(j), 3) = step.solution.segment(L.u1_index(j + 1), 3);
        shifted(L.v_index(j)) = step.solution(L.v_index(j + 1));
      }
      shifted.segment(L.x_index(0), 3) = step.next_state.vec();
    }
    warm = shifted;
    x = step.next_state;
  }

  if (!mode_pieces.empty()) {
    run.schedule = detail::pieces_to_schedule(std::move(mode_pieces), cfg.apply_length_s);
  }
  run.closed_loop_cost = trajectory_cost(run.log, weights, cfg.c_bat_nom);
  return run;
}

// ---------------------------------------------------------------------------
// Full-horizon solve and bang-bang recovery
// ---------------------------------------------------------------------------

struct ResolveResult {
  Eigen::VectorXd solution;
  double objective = 0.0;
  SolveStatus status = SolveStatus::Optimal;
  bool accepted = true;
  std::vector<ControlVector> u0;  ///< per interval
  std::vector<ControlVector> u1;
  std::vector<int> modes;
};

/// Re-solves the window with v pinned to the schedule's binary modes
/// ("resolve the optimization with v fixed at the desired mode"). The
/// schedule must cover the window horizon.
inline ResolveResult resolve_controls_for_schedule(const ModeSchedule& schedule,
                                                   const OcpWindow& window,
                                                   const VehicleState& x0,
                                                   const CostWeights& weights,
                                                   const VehicleParams& prm, double c_bat_terminal,
                                                   const SolverConfig& scfg,
                                                   const std::optional<Eigen::VectorXd>& warm = {}) {
  const Mesh& mesh = window.mesh;
  if (schedule.t_start > mesh.t0 + 1e-9 || schedule.t_end < mesh.t_end() - 1e-9) {
    throw std::invalid_argument("resolve_controls_for_schedule: schedule does not cover horizon");
  }
  std::vector<int> modes(static_cast<std::size_t>(mesh.n_intervals));
  for (int j = 1; j <= mesh.n_intervals; ++j) {
    modes[static_cast<std::size_t>(j - 1)] = schedule.mode_at(mesh.t(j - 1) + 0.5 * mesh.h);
  }

  NlpProblem P = build_nlp(window, x0, weights, prm, c_bat_terminal, modes);
  Eigen::VectorXd z0 = P.warm_start;
  if (warm && warm->size() == z0.size()) {
    z0 = *warm;
    for (int j = 1; j <= mesh.n_intervals; ++j) {
      z0(P.layout.v_index(j)) = static_cast<double>(modes[static_cast<std::size_t>(j - 1)]);
    }
  }
  const SolverResult res = solve(P.nlp, scfg, z0);

  ResolveResult out;
  out.solution = res.z;
  out.objective = res.objective;
  out.status = res.status;
  out.accepted = accept_window_solve(P, res, scfg.kkt_tol);
  out.modes = modes;
  for (int j = 1; j <= mesh.n_intervals; ++j) {
    out.u0.push_back(ControlVector::from_vec(P.u0_at(res.z, j)));
    out.u1.push_back(ControlVector::from_vec(P.u1_at(res.z, j)));
  }
  return out;
}

struct FullHorizonResult {
  Mesh mesh;
  Eigen::VectorXd embedded_solution;
  double embedded_objective = 0.0;
  SolveStatus embedded_status = SolveStatus::Optimal;
  ModeSchedule schedule;
  ResolveResult resolved;
  TrajectoryLog log;            ///< switched trajectory through the plant
  TrajectoryLog embedded_log;   ///< relaxed trajectory through the plant
  double switched_rollout_cost = 0.0;
  double embedded_rollout_cost = 0.0;
  StepTrace v_trace;
  ControlTrace u0_trace;
  ControlTrace u1_trace;
  int solver_failures = 0;
};

namespace detail {

inline TrajectoryLog rollout_intervals(const DriveCycle& cycle, const VehicleState& x0,
                                       const Mesh& mesh, const std::vector<ControlVector>& u0s,
                                       const std::vector<ControlVector>& u1s,
                                       const std::vector<double>& vs, const CostWeights& weights,
                                       const VehicleParams& prm, double substep) {
  TrajectoryLog log;
  VehicleState x = x0;
  int prev_mode = -1;
  for (int j = 1; j <= mesh.n_intervals; ++j) {
    const std::size_t i = static_cast<std::size_t>(j - 1);
    IntegrationResult ir = integrate_plant(x, u0s[i], u1s[i], ModeSignal::constant(vs[i]),
                                           mesh.t(j - 1), mesh.h, cycle.grade_fn(), prm, substep);
    append_segment(log, ir.segment, cycle, u0s[i], u1s[i], vs[i], weights, prm);
    const int mode = vs[i] >= 0.5 ? 1 : 0;
    if (prev_mode >= 0 && mode != prev_mode) ++log.mode_switches;
    prev_mode = mode;
    x = ir.end_state;
  }
  return log;
}

}  // namespace detail

/// Solves the EOCP over the whole cycle (constant terminal weight), projects
/// the fractional mode trace to a bang-bang schedule, re-optimizes the
/// continuous controls for that schedule, and simulates the switched system.
/// Guarded to 600 intervals.
inline FullHorizonResult run_full_horizon(const DriveCycle& cycle, const VehicleState& x0,
                                          const NmpcConfig& cfg, const CostWeights& weights,
                                          const VehicleParams& prm) {
  const double t_final = std::min(cfg.t_final_s, cycle.duration());
  const int N = static_cast<int>(std::lround(t_final / cfg.partition_s));
  if (N < 1) throw std::invalid_argument("run_full_horizon: horizon shorter than one partition");
  if (N > 600) throw std::invalid_argument("run_full_horizon: more than 600 intervals");

  FullHorizonResult out;
  const OcpWindow window = make_window(cycle, 0.0, N, cfg.partition_s);
  out.mesh = window.mesh;

  NlpProblem P = build_nlp(window, x0, weights, prm, cfg.c_bat_nom);
  Eigen::VectorXd z0 = P.warm_start;
  if (N > cfg.window_partitions()) {
    // bootstrap the long-horizon solve from a receding-horizon pass; the
    // closed-loop trajectory is a near-feasible, near-optimal initializer
    try {
      const NmpcRunResult boot = run_nmpc(cycle, x0, cfg, weights, prm);
      if (!boot.log.aborted && !boot.log.points.empty()) {
        auto row_at = [&](double t) {
          const auto& pts = boot.log.points;
          std::size_t k = 0;
          while (k + 1 < pts.size() && pts[k].t_s < t - 1e-9) ++k;
          return pts[k];
        };
        for (int j = 0; j <= N; ++j) {
          const TrajectoryPoint p = row_at(window.mesh.t(j));
          z0.segment(P.layout.x_index(j), 3) =
              Eigen::Vector3d{p.p_ice_kw, p.soc, p.v_mps};
        }
        for (int j = 1; j <= N; ++j) {
          const TrajectoryPoint p = row_at(window.mesh.t(j - 1));
          z0.segment(P.layout.u0_index(j), 3) = Eigen::Vector3d{p.u_ice, p.u_fr, p.u_em};
          z0.segment(P.layout.u1_index(j), 3) = Eigen::Vector3d{p.u_ice, p.u_fr, p.u_gen};
          z0(P.layout.v_index(j)) = p.mode_v;
        }
        z0 = z0.cwiseMax(P.nlp.lower).cwiseMin(P.nlp.upper);
      }
    } catch (const std::exception&) {
      // keep the default warm start
    }
  }
  const SolverResult res = solve(P.nlp, cfg.solver, z0);
  out.embedded_solution = res.z;
  out.embedded_objective = res.objective;
  out.embedded_status = res.status;
  if (!accept_window_solve(P, res, cfg.solver.kkt_tol)) ++out.solver_failures;

  out.v_trace = StepTrace{0.0, cfg.partition_s, {}};
  out.u0_trace = ControlTrace{0.0, cfg.partition_s, {}};
  out.u1_trace = ControlTrace{0.0, cfg.partition_s, {}};
  std::vector<double> v_frac;
  std::vector<ControlVector> u0s, u1s;
  for (int j = 1; j <= N; ++j) {
    out.v_trace.values.push_back(P.v_at(res.z, j));
    out.u0_trace.values.push_back(ControlVector::from_vec(P.u0_at(res.z, j)));
    out.u1_trace.values.push_back(ControlVector::from_vec(P.u1_at(res.z, j)));
    v_frac.push_back(P.v_at(res.z, j));
    u0s.push_back(out.u0_trace.values.back());
    u1s.push_back(out.u1_trace.values.back());
  }

  out.schedule = project_modes(out.v_trace, out.u0_trace, out.u1_trace, cfg.t_min_s);
  out.resolved = resolve_controls_for_schedule(out.schedule, window, x0, weights, prm,
                                               cfg.c_bat_nom, cfg.solver, res.z);
  if (!out.resolved.accepted) ++out.solver_failures;

  // The resolved (binary-mode) point is feasible for the relaxed problem, so
  // re-polishing the embedded solve from it can only improve the embedded
  // objective; this keeps the relaxation bound meaningful even when the
  // first solve parks on the degenerate (v, u) plateau.
  const SolverResult polished = solve(P.nlp, cfg.solver, out.resolved.solution);
  if (polished.objective < out.embedded_objective) {
    out.embedded_solution = polished.z;
    out.embedded_objective = polished.objective;
    if (polished.status == SolveStatus::Optimal) out.embedded_status = polished.status;
    for (int j = 1; j <= N; ++j) {
      const std::size_t i = static_cast<std::size_t>(j - 1);
      v_frac[i] = P.v_at(polished.z, j);
      u0s[i] = ControlVector::from_vec(P.u0_at(polished.z, j));
      u1s[i] = ControlVector::from_vec(P.u1_at(polished.z, j));
    }
  }

  std::vector<double> v_bin;
  for (int m : out.resolved.modes) v_bin.push_back(static_cast<double>(m));
  out.log = detail::rollout_intervals(cycle, x0, window.mesh, out.resolved.u0, out.resolved.u1,
                                      v_bin, weights, prm, cfg.plant_substep_s);
  out.log.solver_failures = out.solver_failures;
  out.embedded_log = detail::rollout_intervals(cycle, x0, window.mesh, u0s, u1s, v_frac, weights,
                                               prm, cfg.plant_substep_s);
  out.switched_rollout_cost = trajectory_cost(out.log, weights, cfg.c_bat_nom);
  out.embedded_rollout_cost = trajectory_cost(out.embedded_log, weights, cfg.c_bat_nom);
  return out;
}

/// Open-loop replay: applies per-interval controls (fractional v allowed)
/// through the plant along a cycle.
inline TrajectoryLog simulate_controls(const DriveCycle& cycle, const VehicleState& x0,
                                       const Mesh& mesh, const std::vector<ControlVector>& u0s,
                                       const std::vector<ControlVector>& u1s,
                                       const std::vector<double>& vs, const CostWeights& weights,
                                       const VehicleParams& prm, double substep = 0.05) {
  if (u0s.size() != static_cast<std::size_t>(mesh.n_intervals) || u1s.size() != u0s.size() ||
      vs.size() != u0s.size()) {
    throw std::invalid_argument("simulate_controls: one control set per interval required");
  }
  return detail::rollout_intervals(cycle, x0, mesh, u0s, u1s, vs, weights, prm, substep);
}

}  // namespace eocp

#endif  // EOCP_NMPC_HPP_
