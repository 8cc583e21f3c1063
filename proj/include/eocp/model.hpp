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

#ifndef EOCP_MODEL_HPP_
#define EOCP_MODEL_HPP_

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "eocp/params.hpp"

namespace eocp {

/// Continuous plant state: engine power, battery state of charge, speed.
struct VehicleState {
  double p_ice_kw = 0.0;
  double soc = 0.0;
  double v_mps = 0.0;

  Eigen::Vector3d vec() const { return {p_ice_kw, soc, v_mps}; }
  static VehicleState from_vec(const Eigen::Vector3d& x) { return {x[0], x[1], x[2]}; }
};

/// Normalized controls of one mode: engine, friction brake, and the
/// electric-drive modulation (motor command in mode 0, generator command in
/// mode 1). All components live in [0, 1].
struct ControlVector {
  double ice = 0.0;
  double fr = 0.0;
  double mode = 0.0;

  Eigen::Vector3d vec() const { return {ice, fr, mode}; }
  static ControlVector from_vec(const Eigen::Vector3d& u) { return {u[0], u[1], u[2]}; }
};

/// Algebraic power flows implied by a (state, control, mode) triple.
/// Sign conventions: mode 0 has p_bat = p_ed_in >= 0 (pack discharging into
/// the drive), mode 1 has p_bat = -p_ed_out <= 0 (generator output charging
/// the pack).
struct PowerFlows {
  double p_cvt_out_kw = 0.0;
  double p_cdd_wh_kw = 0.0;
  double p_ed_out_kw = 0.0;
  double p_ed_in_kw = 0.0;
  double p_bat_kw = 0.0;
  double p_fr_kw = 0.0;
  double p_fuel_kw = 0.0;
  double omega_ice_rad_s = 0.0;
  double omega_ed_rad_s = 0.0;
};

/// Time rate of the plant state.
struct StateRate {
  double p_ice_kw_s = 0.0;
  double soc_per_s = 0.0;
  double v_mps2 = 0.0;

  Eigen::Vector3d vec() const { return {p_ice_kw_s, soc_per_s, v_mps2}; }
  static StateRate from_vec(const Eigen::Vector3d& f) { return {f[0], f[1], f[2]}; }
};

/// Which sign convention the resistance terms use. The optimizer-facing
/// model replaces sgn(V) with V/(|V|+eps); the plant integrator keeps the
/// exact sign function.
enum class SgnMode { Exact, Smooth };

/// Speed-curve modulation from the engine power level:
/// p = clamp(P_ICE / P_ICE^max(omega_min(V)), 0, 1).
inline double power_modulation(double p_ice_kw, double v_mps, const VehicleParams& prm) {
  const double p_ref = prm.p_ice_max_map(prm.omega_min_map(v_mps));
  if (p_ref <= 0.0) return 0.0;
  return std::clamp(p_ice_kw / p_ref, 0.0, 1.0);
}

/// CVT-selected engine speed: blend of the speed envelope at modulation p.
inline double engine_speed(double v_mps, double p, const VehicleParams& prm) {
  return (1.0 - p) * prm.omega_min_map(v_mps) + p * prm.omega_max_map(v_mps);
}

/// Engagement gate: 0 below the threshold band, 1 above, linear ramp inside.
inline double eng_gate(double omega, const VehicleParams& prm) {
  const double half = 0.5 * prm.eng_ramp_band_rad_s;
  if (half <= 0.0) return omega >= prm.eng_threshold_rad_s ? 1.0 : 0.0;
  const double lo = prm.eng_threshold_rad_s - half;
  if (omega <= lo) return 0.0;
  if (omega >= prm.eng_threshold_rad_s + half) return 1.0;
  return (omega - lo) / (2.0 * half);
}

/// First-order engine power response: dP/dt in kW/s.
inline double ice_dynamics(const VehicleState& x, double u_ice, const VehicleParams& prm) {
  const double p = power_modulation(x.p_ice_kw, x.v_mps, prm);
  const double omega = engine_speed(x.v_mps, p, prm);
  const double p_max = prm.p_ice_max_map(omega) * eng_gate(omega, prm);
  return (-x.p_ice_kw + p_max * u_ice) / prm.tau_ice_s;
}

/// SOC rate for a given battery power and mode (1/s). Throws std::domain_error
/// when the logarithm argument d2 + d1*SOC is not positive.
inline double soc_dynamics(const VehicleState& x, double p_bat_kw, int mode,
                           const VehicleParams& prm) {
  const BatteryCoeffs& d = prm.battery[static_cast<std::size_t>(mode)];
  const double arg = d.d2 + d.d1 * x.soc;
  if (arg <= 0.0) {
    throw std::domain_error("soc_dynamics: d2 + d1*SOC must be positive");
  }
  const double p_nom = prm.p_bat_nom_kw[static_cast<std::size_t>(mode)];
  const double w = prm.w_bat_max_kj;
  const double bracket = std::log(arg) + 2.0 * d.d3 * p_nom + d.d4;
  return d.d3 * p_nom * p_nom / w - bracket * p_bat_kw / w;
}

/// Longitudinal acceleration from wheel power, friction braking, and grade.
inline double vehicle_dynamics(const VehicleState& x, double p_cdd_wh_kw, double p_fr_kw,
                               double grade_rad, const VehicleParams& prm,
                               SgnMode sgn = SgnMode::Exact) {
  const double v = x.v_mps;
  double sign;
  if (sgn == SgnMode::Exact) {
    sign = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
  } else {
    sign = v / (std::abs(v) + prm.eps_v_mps);
  }
  const double resist = (prm.k_v1 / prm.m_c_kg * v * v + prm.k_v2 * std::cos(grade_rad)) * sign;
  const double gravity = prm.g_mps2 * std::sin(grade_rad);
  const double drive = 1000.0 / (prm.m_c_kg * (v + prm.eps_v_mps)) * (p_cdd_wh_kw - p_fr_kw);
  return -resist - gravity + drive;
}

/// Friction braking power P_FR^max(V)*u_fr, in kW.
inline double friction_power(double v_mps, double u_fr, const VehicleParams& prm) {
  return prm.p_fr_max_map(v_mps) * u_fr;
}

struct EdPower {
  double out_kw = 0.0;
  double in_kw = 0.0;
};

/// Electric-drive input/output powers at the current rotor speed.
inline EdPower ed_power(double v_mps, double u_mode, int mode, const VehicleParams& prm) {
  const double omega_ed = prm.beta_rad_per_m * v_mps;
  const double in_kw = prm.p_ed_in_max_map(omega_ed) * u_mode;
  const double out_kw = prm.eta_ed_map[static_cast<std::size_t>(mode)](omega_ed) * in_kw;
  return {out_kw, in_kw};
}

/// All algebraic power flows for one mode. Mode 0 sums CVT and ED power at
/// the coupling device; mode 1 diverts driveline power into the generator.
inline PowerFlows drivetrain_flows(const VehicleState& x, const ControlVector& u, int mode,
                                   const VehicleParams& prm) {
  PowerFlows f;
  const double p = power_modulation(x.p_ice_kw, x.v_mps, prm);
  f.omega_ice_rad_s = engine_speed(x.v_mps, p, prm);
  f.omega_ed_rad_s = prm.beta_rad_per_m * x.v_mps;
  f.p_cvt_out_kw = prm.eta_cvt * x.p_ice_kw;
  const EdPower ed = ed_power(x.v_mps, u.mode, mode, prm);
  f.p_ed_in_kw = ed.in_kw;
  f.p_ed_out_kw = ed.out_kw;
  if (mode == 0) {
    f.p_cdd_wh_kw = prm.eta_cdd1 * f.p_cvt_out_kw + prm.eta_cdd2 * f.p_ed_out_kw;
    f.p_bat_kw = f.p_ed_in_kw;
  } else {
    // p_ed_in is the mechanical power the generator demands from the coupling
    // device; wheel power is whatever remains (can be negative).
    f.p_cdd_wh_kw = f.p_cvt_out_kw - f.p_ed_in_kw / prm.eta_cdd2;
    f.p_bat_kw = -f.p_ed_out_kw;
  }
  f.p_fr_kw = friction_power(x.v_mps, u.fr, prm);
  const double eta = std::max(prm.eta_ice_map(x.p_ice_kw, x.v_mps), prm.eta_ice_floor);
  f.p_fuel_kw = x.p_ice_kw / eta;
  return f;
}

struct ModeEval {
  StateRate rate;
  PowerFlows flows;
};

/// Mode-dependent vector field f_v(x, u) together with the power flows used
/// to assemble it.
inline ModeEval mode_dynamics(const VehicleState& x, const ControlVector& u, int mode,
                              double grade_rad, const VehicleParams& prm,
                              SgnMode sgn = SgnMode::Exact) {
  ModeEval e;
  e.flows = drivetrain_flows(x, u, mode, prm);
  e.rate.p_ice_kw_s = ice_dynamics(x, u.ice, prm);
  e.rate.soc_per_s = soc_dynamics(x, e.flows.p_bat_kw, mode, prm);
  e.rate.v_mps2 = vehicle_dynamics(x, e.flows.p_cdd_wh_kw, e.flows.p_fr_kw, grade_rad, prm, sgn);
  return e;
}

/// Jacobians of f_v with respect to state and controls (3x3 each).
/// Piecewise-linear tables contribute their right-sided slopes, so the
/// result is the a.e. derivative with a deterministic convention at kinks.
struct ModeJacobian {
  Eigen::Matrix3d dfdx = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d dfdu = Eigen::Matrix3d::Zero();
};

inline ModeJacobian mode_dynamics_jacobian(const VehicleState& x, const ControlVector& u,
                                           int mode, double grade_rad, const VehicleParams& prm,
                                           SgnMode sgn = SgnMode::Smooth) {
  ModeJacobian J;
  const std::size_t m = static_cast<std::size_t>(mode);
  const double v = x.v_mps;

  // --- engine channel -------------------------------------------------
  double s_wmin, s_wmax;
  const double wmin = prm.omega_min_map.eval(v, s_wmin);
  const double wmax = prm.omega_max_map.eval(v, s_wmax);
  double s_pref;
  const double p_ref = prm.p_ice_max_map.eval(wmin, s_pref);
  double p_mod = 0.0, dp_dP = 0.0, dp_dV = 0.0;
  if (p_ref > 0.0) {
    const double raw = x.p_ice_kw / p_ref;
    p_mod = std::clamp(raw, 0.0, 1.0);
    if (raw >= 0.0 && raw < 1.0) {  // right derivative at the clamp edges
      dp_dP = 1.0 / p_ref;
      dp_dV = -x.p_ice_kw / (p_ref * p_ref) * s_pref * s_wmin;
    }
  }
  const double omega = (1.0 - p_mod) * wmin + p_mod * wmax;
  const double dw_dP = (wmax - wmin) * dp_dP;
  const double dw_dV = (1.0 - p_mod) * s_wmin + p_mod * s_wmax + (wmax - wmin) * dp_dV;

  double s_pmax;
  const double p_max = prm.p_ice_max_map.eval(omega, s_pmax);
  const double gate = eng_gate(omega, prm);
  double dgate_domega = 0.0;
  {
    const double half = 0.5 * prm.eng_ramp_band_rad_s;
    if (half > 0.0 && omega >= prm.eng_threshold_rad_s - half &&
        omega < prm.eng_threshold_rad_s + half) {
      dgate_domega = 1.0 / (2.0 * half);
    }
  }
  const double cap = p_max * gate;                       // available engine power
  const double dcap_domega = s_pmax * gate + p_max * dgate_domega;
  J.dfdx(0, 0) = (-1.0 + u.ice * dcap_domega * dw_dP) / prm.tau_ice_s;
  J.dfdx(0, 2) = u.ice * dcap_domega * dw_dV / prm.tau_ice_s;
  J.dfdu(0, 0) = cap / prm.tau_ice_s;

  // --- electric drive -------------------------------------------------
  const double omega_ed = prm.beta_rad_per_m * v;
  double s_pin;
  const double pin_max = prm.p_ed_in_max_map.eval(omega_ed, s_pin);
  double s_eta_ed;
  const double eta_ed = prm.eta_ed_map[m].eval(omega_ed, s_eta_ed);
  const double p_ed_in = pin_max * u.mode;
  const double p_ed_out = eta_ed * p_ed_in;
  const double dpin_dV = prm.beta_rad_per_m * s_pin * u.mode;
  const double dpout_dV = prm.beta_rad_per_m * (s_eta_ed * pin_max + eta_ed * s_pin) * u.mode;

  // --- battery channel ------------------------------------------------
  const BatteryCoeffs& d = prm.battery[m];
  const double arg = d.d2 + d.d1 * x.soc;
  const double p_nom = prm.p_bat_nom_kw[m];
  const double w = prm.w_bat_max_kj;
  const double bracket = std::log(arg) + 2.0 * d.d3 * p_nom + d.d4;
  const double p_bat = mode == 0 ? p_ed_in : -p_ed_out;
  const double dpbat_dV = mode == 0 ? dpin_dV : -dpout_dV;
  const double dpbat_dc = mode == 0 ? pin_max : -eta_ed * pin_max;
  J.dfdx(1, 1) = -(d.d1 / arg) * p_bat / w;
  J.dfdx(1, 2) = -bracket * dpbat_dV / w;
  J.dfdu(1, 2) = -bracket * dpbat_dc / w;

  // --- wheel power ----------------------------------------------------
  double dpwh_dP, dpwh_dV, dpwh_dc;
  if (mode == 0) {
    dpwh_dP = prm.eta_cdd1 * prm.eta_cvt;
    dpwh_dV = prm.eta_cdd2 * dpout_dV;
    dpwh_dc = prm.eta_cdd2 * eta_ed * pin_max;
  } else {
    dpwh_dP = prm.eta_cvt;
    dpwh_dV = -dpin_dV / prm.eta_cdd2;
    dpwh_dc = -pin_max / prm.eta_cdd2;
  }
  const double p_cvt = prm.eta_cvt * x.p_ice_kw;
  const double p_wh = mode == 0 ? prm.eta_cdd1 * p_cvt + prm.eta_cdd2 * p_ed_out
                                : p_cvt - p_ed_in / prm.eta_cdd2;

  // --- friction -------------------------------------------------------
  double s_pfr;
  const double pfr_max = prm.p_fr_max_map.eval(v, s_pfr);
  const double p_fr = pfr_max * u.fr;
  const double dpfr_dV = s_pfr * u.fr;

  // --- velocity channel -------------------------------------------------
  double sign, dsign_dV;
  if (sgn == SgnMode::Exact) {
    sign = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    dsign_dV = 0.0;
  } else {
    const double den = std::abs(v) + prm.eps_v_mps;
    sign = v / den;
    dsign_dV = prm.eps_v_mps / (den * den);
  }
  const double resist_mag = prm.k_v1 / prm.m_c_kg * v * v + prm.k_v2 * std::cos(grade_rad);
  const double inv_mv = 1000.0 / (prm.m_c_kg * (v + prm.eps_v_mps));
  J.dfdx(2, 0) = inv_mv * dpwh_dP;
  J.dfdx(2, 2) = -(2.0 * prm.k_v1 / prm.m_c_kg * v) * sign - resist_mag * dsign_dV -
                 inv_mv / (v + prm.eps_v_mps) * (p_wh - p_fr) + inv_mv * (dpwh_dV - dpfr_dV);
  J.dfdu(2, 1) = -inv_mv * pfr_max;
  J.dfdu(2, 2) = inv_mv * dpwh_dc;

  return J;
}

// ---------------------------------------------------------------------------
// Plant integration
// ---------------------------------------------------------------------------

/// Piecewise-constant mode signal v(t) with values in [0, 1]. Binary values
/// describe the switched plant; fractional values drive the embedded plant.
class ModeSignal {
 public:
  ModeSignal() : times_{}, values_{0.0} {}
  explicit ModeSignal(double constant) : times_{}, values_{constant} {}

  /// values[i] holds on [times[i-1], times[i]) with times strictly increasing;
  /// values.front() holds before times.front(), values.back() after the last.
  ModeSignal(std::vector<double> switch_times, std::vector<double> values)
      : times_(std::move(switch_times)), values_(std::move(values)) {
    if (values_.size() != times_.size() + 1) {
      throw std::invalid_argument("ModeSignal: need one more value than switch time");
    }
    for (std::size_t i = 1; i < times_.size(); ++i) {
      if (!(times_[i] > times_[i - 1])) {
        throw std::invalid_argument("ModeSignal: switch times must increase");
      }
    }
  }

  static ModeSignal constant(double v) { return ModeSignal(v); }

  double at(double t) const {
    std::size_t i = 0;
    while (i < times_.size() && t >= times_[i]) ++i;
    return values_[i];
  }

  /// Switch times falling strictly inside (t0, t1).
  std::vector<double> cuts(double t0, double t1) const {
    std::vector<double> c;
    for (double t : times_) {
      if (t > t0 && t < t1) c.push_back(t);
    }
    return c;
  }

 private:
  std::vector<double> times_;
  std::vector<double> values_;
};

struct SegmentSample {
  double t_s = 0.0;
  VehicleState state;
  PowerFlows flows;    ///< v-blended flows
  double v_mode = 0.0; ///< mode signal value at t_s
};

struct TrajectorySegment {
  std::vector<SegmentSample> samples;  ///< includes both endpoints
  int clamp_events = 0;
};

struct IntegrationResult {
  VehicleState end_state;
  TrajectorySegment segment;
};

namespace detail {

inline Eigen::Vector3d embedded_rate(const VehicleState& x, const ControlVector& u0,
                                     const ControlVector& u1, double v, double grade_rad,
                                     const VehicleParams& prm, SgnMode sgn, PowerFlows* flows) {
  if (v <= 0.0) {
    const ModeEval e = mode_dynamics(x, u0, 0, grade_rad, prm, sgn);
    if (flows) *flows = e.flows;
    return e.rate.vec();
  }
  if (v >= 1.0) {
    const ModeEval e = mode_dynamics(x, u1, 1, grade_rad, prm, sgn);
    if (flows) *flows = e.flows;
    return e.rate.vec();
  }
  const ModeEval e0 = mode_dynamics(x, u0, 0, grade_rad, prm, sgn);
  const ModeEval e1 = mode_dynamics(x, u1, 1, grade_rad, prm, sgn);
  if (flows) {
    auto mix = [v](double a, double b) { return (1.0 - v) * a + v * b; };
    flows->p_cvt_out_kw = mix(e0.flows.p_cvt_out_kw, e1.flows.p_cvt_out_kw);
    flows->p_cdd_wh_kw = mix(e0.flows.p_cdd_wh_kw, e1.flows.p_cdd_wh_kw);
    flows->p_ed_out_kw = mix(e0.flows.p_ed_out_kw, e1.flows.p_ed_out_kw);
    flows->p_ed_in_kw = mix(e0.flows.p_ed_in_kw, e1.flows.p_ed_in_kw);
    flows->p_bat_kw = mix(e0.flows.p_bat_kw, e1.flows.p_bat_kw);
    flows->p_fr_kw = mix(e0.flows.p_fr_kw, e1.flows.p_fr_kw);
    flows->p_fuel_kw = mix(e0.flows.p_fuel_kw, e1.flows.p_fuel_kw);
    flows->omega_ice_rad_s = e0.flows.omega_ice_rad_s;
    flows->omega_ed_rad_s = e0.flows.omega_ed_rad_s;
  }
  return (1.0 - v) * e0.rate.vec() + v * e1.rate.vec();
}

}  // namespace detail

/// Fixed-step RK4 integration of the plant over [t_start, t_start+duration]
/// under constant per-mode controls and a piecewise-constant mode signal.
/// Substeps never exceed max_substep and are split at mode switches. The
/// state is clamped to its invariant box after every substep; clamps are
/// counted in the returned segment. Non-finite states abort with
/// std::runtime_error.
inline IntegrationResult integrate_plant(const VehicleState& x0, const ControlVector& u0,
                                         const ControlVector& u1, const ModeSignal& mode_signal,
                                         double t_start, double duration,
                                         const std::function<double(double)>& grade_fn,
                                         const VehicleParams& prm, double max_substep = 0.05) {
  if (!(duration > 0.0)) {
    throw std::invalid_argument("integrate_plant: duration must be > 0");
  }
  IntegrationResult out;
  TrajectorySegment& seg = out.segment;

  const double p_max = prm.p_ice_box_max_kw();
  const double v_max = prm.v_box_max_mps();
  auto clamp_state = [&](VehicleState& x) {
    const VehicleState before = x;
    x.p_ice_kw = std::clamp(x.p_ice_kw, 0.0, p_max);
    x.soc = std::clamp(x.soc, 0.0, 1.0);
    x.v_mps = std::clamp(x.v_mps, 0.0, v_max);
    if (x.p_ice_kw != before.p_ice_kw || x.soc != before.soc || x.v_mps != before.v_mps) {
      ++seg.clamp_events;
    }
  };

  VehicleState x = x0;
  clamp_state(x);

  // sub-segment boundaries: mode switches, then uniform substeps within
  std::vector<double> bounds{t_start};
  for (double c : mode_signal.cuts(t_start, t_start + duration)) bounds.push_back(c);
  bounds.push_back(t_start + duration);

  auto log_sample = [&](double t, const VehicleState& xs) {
    const double v = mode_signal.at(t);
    SegmentSample s;
    s.t_s = t;
    s.state = xs;
    s.v_mode = v;
    detail::embedded_rate(xs, u0, u1, v, grade_fn(t), prm, SgnMode::Exact, &s.flows);
    seg.samples.push_back(s);
  };
  log_sample(t_start, x);

  for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
    const double ta = bounds[b];
    const double tb = bounds[b + 1];
    const double v = mode_signal.at(0.5 * (ta + tb));
    const int n = std::max(1, static_cast<int>(std::ceil((tb - ta) / max_substep - 1e-12)));
    const double h = (tb - ta) / n;
    for (int k = 0; k < n; ++k) {
      const double t = ta + k * h;
      const Eigen::Vector3d xv = x.vec();
      auto f = [&](double tt, const Eigen::Vector3d& s) {
        return detail::embedded_rate(VehicleState::from_vec(s), u0, u1, v, grade_fn(tt), prm,
                                     SgnMode::Exact, nullptr);
      };
      const Eigen::Vector3d k1 = f(t, xv);
      const Eigen::Vector3d k2 = f(t + 0.5 * h, xv + 0.5 * h * k1);
      const Eigen::Vector3d k3 = f(t + 0.5 * h, xv + 0.5 * h * k2);
      const Eigen::Vector3d k4 = f(t + h, xv + h * k3);
      const Eigen::Vector3d xn = xv + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!xn.allFinite()) {
        throw std::runtime_error("integrate_plant: non-finite state at t=" + std::to_string(t + h));
      }
      x = VehicleState::from_vec(xn);
      clamp_state(x);
      log_sample(t + h, x);
    }
  }
  out.end_state = x;
  return out;
}

}  // namespace eocp

#endif  // EOCP_MODEL_HPP_
