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

#ifndef EOCP_TRAJECTORY_HPP_
#define EOCP_TRAJECTORY_HPP_

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "eocp/cost.hpp"
#include "eocp/model.hpp"
#include "eocp/params.hpp"

namespace eocp {

/// One logged instant of a closed- or open-loop run. u_ice/u_fr are the
/// v-blended effective commands (the embedded dynamics are affine in the
/// controls, so the blend is exactly what the plant sees); u_em and u_gen are
/// the per-mode electric-drive commands.
struct TrajectoryPoint {
  double t_s = 0.0;
  double v_des_mps = 0.0;
  double v_mps = 0.0;
  double p_ice_kw = 0.0;
  double soc = 0.0;
  double mode_v = 0.0;  ///< applied (possibly fractional) mode signal
  double u_ice = 0.0;
  double u_fr = 0.0;
  double u_em = 0.0;
  double u_gen = 0.0;
  double p_ed_out_kw = 0.0;
  double p_bat_kw = 0.0;
  double p_fr_kw = 0.0;
  double p_fuel_kw = 0.0;
  double grade_rad = 0.0;
  double stage_cost = 0.0;
};

struct TrajectoryLog {
  std::vector<TrajectoryPoint> points;
  int mode_switches = 0;
  int solver_failures = 0;
  int clamp_events = 0;
  bool aborted = false;

  double duration() const { return points.empty() ? 0.0 : points.back().t_s - points.front().t_s; }
};

inline constexpr const char* kTrajectoryHeader =
    "t_s,v_des_mps,v_mps,p_ice_kw,soc,mode_v,u_ice,u_fr,u_em,u_gen,"
    "p_ed_out_kw,p_bat_kw,p_fr_kw,p_fuel_kw,grade_deg,stage_cost";

inline void write_trajectory_csv(const TrajectoryLog& log, std::ostream& os) {
  os << kTrajectoryHeader << '\n';
  char buf[512];
  for (const auto& p : log.points) {
    std::snprintf(buf, sizeof(buf),
                  "%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,"
                  "%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                  p.t_s, p.v_des_mps, p.v_mps, p.p_ice_kw, p.soc, p.mode_v, p.u_ice, p.u_fr,
                  p.u_em, p.u_gen, p.p_ed_out_kw, p.p_bat_kw, p.p_fr_kw, p.p_fuel_kw,
                  p.grade_rad * 180.0 / std::numbers::pi, p.stage_cost);
    os << buf;
  }
}

/// Reads a trajectory CSV back (used by the project and simulate commands).
/// Only the columns present in kTrajectoryHeader are understood.
inline TrajectoryLog read_trajectory_csv(std::istream& is) {
  TrajectoryLog log;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("trajectory csv: empty file");
  if (line.rfind("t_s,", 0) != 0) throw std::runtime_error("trajectory csv: bad header");
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error("trajectory csv: bad value at line " + std::to_string(lineno));
      }
    }
    if (vals.size() != 16) {
      throw std::runtime_error("trajectory csv: expected 16 columns at line " +
                               std::to_string(lineno));
    }
    TrajectoryPoint p;
    p.t_s = vals[0];
    p.v_des_mps = vals[1];
    p.v_mps = vals[2];
    p.p_ice_kw = vals[3];
    p.soc = vals[4];
    p.mode_v = vals[5];
    p.u_ice = vals[6];
    p.u_fr = vals[7];
    p.u_em = vals[8];
    p.u_gen = vals[9];
    p.p_ed_out_kw = vals[10];
    p.p_bat_kw = vals[11];
    p.p_fr_kw = vals[12];
    p.p_fuel_kw = vals[13];
    p.grade_rad = vals[14] * std::numbers::pi / 180.0;
    p.stage_cost = vals[15];
    log.points.push_back(p);
  }
  return log;
}

/// Scalar summary of a run, serialized to summary.json by the CLI.
struct RunSummary {
  double rms_tracking_mps = 0.0;
  double final_soc = 0.0;
  double fuel_volume_l = 0.0;
  double mpg = 0.0;
  int mode_switches = 0;
  int solver_failures = 0;
};

/// Time integral of a per-point quantity by the trapezoidal rule.
template <class F>
inline double integrate_log(const TrajectoryLog& log, F&& value) {
  double acc = 0.0;
  for (std::size_t i = 1; i < log.points.size(); ++i) {
    const double dt = log.points[i].t_s - log.points[i - 1].t_s;
    acc += 0.5 * dt * (value(log.points[i]) + value(log.points[i - 1]));
  }
  return acc;
}

/// Continuous-time performance index of a logged run: trapezoidal stage-cost
/// integral plus the terminal SOC penalty.
inline double trajectory_cost(const TrajectoryLog& log, const CostWeights& w,
                              double c_bat_terminal) {
  if (log.points.empty()) return 0.0;
  const double stage = integrate_log(log, [](const TrajectoryPoint& p) { return p.stage_cost; });
  return stage + terminal_cost(log.points.back().soc, c_bat_terminal, w);
}

inline RunSummary summarize(const TrajectoryLog& log, const VehicleParams& prm,
                            double fuel_volume_l, double mpg) {
  RunSummary s;
  (void)prm;
  if (log.points.empty()) return s;
  const double dur = log.duration();
  if (dur > 0.0) {
    const double mse = integrate_log(log, [](const TrajectoryPoint& p) {
                         const double e = p.v_mps - p.v_des_mps;
                         return e * e;
                       }) /
                       dur;
    s.rms_tracking_mps = std::sqrt(std::max(0.0, mse));
  }
  s.final_soc = log.points.back().soc;
  s.fuel_volume_l = fuel_volume_l;
  s.mpg = mpg;
  s.mode_switches = log.mode_switches;
  s.solver_failures = log.solver_failures;
  return s;
}

}  // namespace eocp

#endif  // EOCP_TRAJECTORY_HPP_
