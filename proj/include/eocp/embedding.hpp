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

#ifndef EOCP_EMBEDDING_HPP_
#define EOCP_EMBEDDING_HPP_

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "eocp/model.hpp"

namespace eocp {

/// Controls of the embedded (mode-relaxed) system: one control vector per
/// mode plus the relaxed mode signal v in [0, 1].
struct EmbeddedControl {
  ControlVector u0;
  ControlVector u1;
  double v = 0.0;
};

/// Embedded vector field f_E = (1-v) f_0(x, u0) + v f_1(x, u1).
/// At v = 0 or v = 1 the untouched single-mode field is returned, so the
/// endpoints are bit-exact.
inline StateRate embedded_dynamics(const VehicleState& x, const EmbeddedControl& ec,
                                   double grade_rad, const VehicleParams& prm,
                                   SgnMode sgn = SgnMode::Exact) {
  return StateRate::from_vec(
      detail::embedded_rate(x, ec.u0, ec.u1, ec.v, grade_rad, prm, sgn, nullptr));
}

/// Uniformly sampled piecewise-constant trace: values[i] holds on
/// [t0 + i*dt, t0 + (i+1)*dt).
struct StepTrace {
  double t0 = 0.0;
  double dt = 1.0;
  std::vector<double> values;

  double t_end() const { return t0 + dt * static_cast<double>(values.size()); }

  /// Length-weighted average over [a, b] (clipped to the trace support).
  double average(double a, double b) const {
    a = std::max(a, t0);
    b = std::min(b, t_end());
    if (!(b > a)) throw std::invalid_argument("StepTrace::average: empty window");
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double ca = t0 + dt * static_cast<double>(i);
      const double cb = ca + dt;
      const double overlap = std::min(b, cb) - std::max(a, ca);
      if (overlap > 0.0) acc += overlap * values[i];
    }
    return acc / (b - a);
  }
};

/// Per-mode control trace on the same grid convention as StepTrace.
struct ControlTrace {
  double t0 = 0.0;
  double dt = 1.0;
  std::vector<ControlVector> values;

  double t_end() const { return t0 + dt * static_cast<double>(values.size()); }
};

/// Binary mode schedule over [t_start, t_end]: starts in initial_mode and
/// toggles at each switch time.
struct ModeSchedule {
  double t_start = 0.0;
  double t_end = 0.0;
  int initial_mode = 0;
  double t_min = 1.0;
  std::vector<double> switch_times;  ///< strictly increasing, inside the horizon

  int mode_at(double t) const {
    int m = initial_mode;
    for (double s : switch_times) {
      if (t >= s) m = 1 - m;
      else break;
    }
    return m;
  }

  int switch_count() const { return static_cast<int>(switch_times.size()); }

  /// Fraction of [a, b] spent in mode 1.
  double duty(double a, double b) const {
    if (!(b > a)) return 0.0;
    double acc = 0.0;
    double t = a;
    int m = mode_at(a);
    for (double s : switch_times) {
      if (s <= a) continue;
      if (s >= b) break;
      if (m == 1) acc += s - t;
      t = s;
      m = 1 - m;
    }
    if (m == 1) acc += b - t;
    return acc / (b - a);
  }

  ModeSignal signal() const {
    std::vector<double> vals;
    vals.reserve(switch_times.size() + 1);
    int m = initial_mode;
    vals.push_back(static_cast<double>(m));
    for (std::size_t i = 0; i < switch_times.size(); ++i) {
      m = 1 - m;
      vals.push_back(static_cast<double>(m));
    }
    return ModeSignal(switch_times, vals);
  }
};

/// Writes a schedule as CSV rows (switch_time_s, mode); the first row carries
/// the horizon start and the initial mode.
inline void write_schedule_csv(const ModeSchedule& s, std::ostream& os) {
  os << "switch_time_s,mode\n";
  char buf[64];
  auto row = [&](double t, int m) {
    std::snprintf(buf, sizeof(buf), "%.10g,%d\n", t, m);
    os << buf;
  };
  int m = s.initial_mode;
  row(s.t_start, m);
  for (double t : s.switch_times) {
    m = 1 - m;
    row(t, m);
  }
}

namespace detail {

struct ModePiece {
  double t_begin;
  double t_end;
  int mode;
};

inline ModeSchedule pieces_to_schedule(std::vector<ModePiece> pieces, double t_min) {
  // merge zero-length and consecutive same-mode pieces
  ModeSchedule out;
  std::vector<ModePiece> merged;
  for (const auto& p : pieces) {
    if (!(p.t_end > p.t_begin)) continue;
    if (!merged.empty() && merged.back().mode == p.mode) {
      merged.back().t_end = p.t_end;
    } else {
      merged.push_back(p);
    }
  }
  if (merged.empty()) throw std::invalid_argument("mode schedule: no pieces");
  out.t_start = merged.front().t_begin;
  out.t_end = merged.back().t_end;
  out.initial_mode = merged.front().mode;
  out.t_min = t_min;
  for (std::size_t i = 1; i < merged.size(); ++i) out.switch_times.push_back(merged[i].t_begin);
  return out;
}

}  // namespace detail

/// Duty-cycle (PWM) realization of a fractional mode trace. Each window of
/// length max(t_min, sample step) is split so the window average of the
/// binary signal equals the windowed average of v exactly; each window begins
/// in the mode the previous one ended in, which minimizes switching. Note
/// that duty preservation means two switches can straddle a window junction
/// closer than t_min apart.
inline ModeSchedule pwm_schedule(const StepTrace& v_trace, double t_min) {
  const double t1 = v_trace.t0;
  const double t2 = v_trace.t_end();
  if (!(t2 - t1 >= t_min) || v_trace.values.empty()) {
    throw std::invalid_argument("pwm_schedule: trace shorter than t_min");
  }
  const double len = std::max(t_min, v_trace.dt);
  std::vector<detail::ModePiece> pieces;
  int current_mode = 0;  // first window uses the mode-0-first order
  double a = t1;
  while (a < t2 - 1e-12) {
    double b = a + len;
    if (t2 - b < len - 1e-12) b = t2;  // final partial window merges backward
    const double vbar = v_trace.average(a, b);
    if (current_mode == 0) {
      const double tp = b - vbar * (b - a);
      pieces.push_back({a, tp, 0});
      pieces.push_back({tp, b, 1});
      if (vbar > 0.0) current_mode = 1;
    } else {
      const double tp = a + vbar * (b - a);
      pieces.push_back({a, tp, 1});
      pieces.push_back({tp, b, 0});
      if (vbar < 1.0) current_mode = 0;
    }
    a = b;
  }
  return detail::pieces_to_schedule(std::move(pieces), t_min);
}

/// Projection of a fractional mode trace onto {0, 1} per t_min window:
/// mode 0 when ||avg((1-v) u0)||_2 >= ||avg(v u1)||_2, mode 1 otherwise.
/// Averages are componentwise over the window. The window grid is anchored
/// at the horizon start; a final partial window merges into its predecessor.
inline ModeSchedule project_modes(const StepTrace& v_trace, const ControlTrace& u0_trace,
                                  const ControlTrace& u1_trace, double t_min) {
  if (v_trace.values.empty()) throw std::invalid_argument("project_modes: empty trace");
  if (u0_trace.values.size() != v_trace.values.size() ||
      u1_trace.values.size() != v_trace.values.size() || u0_trace.t0 != v_trace.t0 ||
      u1_trace.t0 != v_trace.t0 || u0_trace.dt != v_trace.dt || u1_trace.dt != v_trace.dt) {
    throw std::invalid_argument("project_modes: traces must share one grid");
  }
  if (t_min < v_trace.dt) {
    throw std::invalid_argument("project_modes: t_min must be >= the grid step");
  }
  const double t1 = v_trace.t0;
  const double t2 = v_trace.t_end();
  if (!(t2 - t1 > 0.0)) throw std::invalid_argument("project_modes: empty window");

  auto window_mode = [&](double a, double b) {
    Eigen::Vector3d acc0 = Eigen::Vector3d::Zero();
    Eigen::Vector3d acc1 = Eigen::Vector3d::Zero();
    double total = 0.0;
    for (std::size_t i = 0; i < v_trace.values.size(); ++i) {
      const double ca = t1 + v_trace.dt * static_cast<double>(i);
      const double cb = ca + v_trace.dt;
      const double overlap = std::min(b, cb) - std::max(a, ca);
      if (overlap <= 0.0) continue;
      const double v = v_trace.values[i];
      acc0 += overlap * (1.0 - v) * u0_trace.values[i].vec();
      acc1 += overlap * v * u1_trace.values[i].vec();
      total += overlap;
    }
    if (total <= 0.0) throw std::invalid_argument("project_modes: empty window");
    return (acc0 / total).norm() >= (acc1 / total).norm() ? 0 : 1;
  };

  std::vector<detail::ModePiece> pieces;
  double a = t1;
  while (a < t2 - 1e-12) {
    double b = a + t_min;
    if (t2 - b < t_min - 1e-12) b = t2;  // merge the final partial window
    pieces.push_back({a, b, window_mode(a, b)});
    a = b;
  }
  return detail::pieces_to_schedule(std::move(pieces), t_min);
}

}  // namespace eocp

#endif  // EOCP_EMBEDDING_HPP_
