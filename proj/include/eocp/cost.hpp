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

#ifndef EOCP_COST_HPP_
#define EOCP_COST_HPP_

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "eocp/model.hpp"
#include "eocp/params.hpp"

namespace eocp {

/// Stage integrand, identical in both modes:
///   C_V (V - V_des)^2 + C_ICE (P_ICE / eta_ICE)^2 + C_FR P_FR^2.
/// The flows argument supplies p_fuel (= P_ICE/eta with the configured floor)
/// and p_fr consistent with (state, controls, mode).
inline double stage_cost(const VehicleState& x, const ControlVector& /*u*/, int /*mode*/,
                         double v_des, const PowerFlows& flows, const CostWeights& w) {
  const double ev = x.v_mps - v_des;
  return w.c_v * ev * ev + w.c_ice * flows.p_fuel_kw * flows.p_fuel_kw +
         w.c_fr * flows.p_fr_kw * flows.p_fr_kw;
}

/// Stage integrand with gradients wrt state and controls, recomputing the
/// flows it needs from params. Used by the transcription.
struct StageCostEval {
  double value = 0.0;
  Eigen::Vector3d dx = Eigen::Vector3d::Zero();
  Eigen::Vector3d du = Eigen::Vector3d::Zero();
};

inline StageCostEval stage_cost_with_grad(const VehicleState& x, const ControlVector& u,
                                          double v_des, const CostWeights& w,
                                          const VehicleParams& prm) {
  StageCostEval e;
  const double ev = x.v_mps - v_des;

  double deta_dP, deta_dV;
  double eta = prm.eta_ice_map.eval(x.p_ice_kw, x.v_mps, deta_dP, deta_dV);
  if (eta < prm.eta_ice_floor) {
    eta = prm.eta_ice_floor;
    deta_dP = deta_dV = 0.0;
  }
  const double p_fuel = x.p_ice_kw / eta;

  double s_pfr;
  const double pfr_max = prm.p_fr_max_map.eval(x.v_mps, s_pfr);
  const double p_fr = pfr_max * u.fr;

  e.value = w.c_v * ev * ev + w.c_ice * p_fuel * p_fuel + w.c_fr * p_fr * p_fr;
  e.dx[0] = 2.0 * w.c_ice * p_fuel * (eta - x.p_ice_kw * deta_dP) / (eta * eta);
  e.dx[2] = 2.0 * w.c_v * ev + 2.0 * w.c_ice * p_fuel * (-x.p_ice_kw * deta_dV / (eta * eta)) +
            2.0 * w.c_fr * p_fr * s_pfr * u.fr;
  e.du[1] = 2.0 * w.c_fr * p_fr * pfr_max;
  return e;
}

/// Embedded integrand L_E = (1-v) L_0(x, u0) + v L_1(x, u1).
inline double embedded_stage_cost(const VehicleState& x, const ControlVector& u0,
                                  const ControlVector& u1, double v_embed, double v_des,
                                  const VehicleParams& prm, const CostWeights& w) {
  if (v_embed <= 0.0) {
    return stage_cost(x, u0, 0, v_des, drivetrain_flows(x, u0, 0, prm), w);
  }
  if (v_embed >= 1.0) {
    return stage_cost(x, u1, 1, v_des, drivetrain_flows(x, u1, 1, prm), w);
  }
  const double l0 = stage_cost(x, u0, 0, v_des, drivetrain_flows(x, u0, 0, prm), w);
  const double l1 = stage_cost(x, u1, 1, v_des, drivetrain_flows(x, u1, 1, prm), w);
  return (1.0 - v_embed) * l0 + v_embed * l1;
}

/// Terminal penalty pushing the final SOC toward the nominal level.
inline double terminal_cost(double soc_final, double c_bat, const CostWeights& w) {
  const double d = soc_final - w.soc_nom;
  return c_bat * d * d;
}

/// Soft SOC operating band: zero inside [soc_min, soc_max], quadratic
/// escalation outside with weight 10*c_bat_nom.
inline double soc_band_penalty(double soc, const CostWeights& w, double* dpenalty_dsoc = nullptr) {
  const double k = 10.0 * w.c_bat_nom;
  double value = 0.0, grad = 0.0;
  if (soc < w.soc_min) {
    const double d = w.soc_min - soc;
    value = k * d * d;
    grad = -2.0 * k * d;
  } else if (soc > w.soc_max) {
    const double d = soc - w.soc_max;
    value = k * d * d;
    grad = 2.0 * k * d;
  }
  if (dpenalty_dsoc) *dpenalty_dsoc = grad;
  return value;
}

}  // namespace eocp

#endif  // EOCP_COST_HPP_
