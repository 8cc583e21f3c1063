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

#ifndef EOCP_PARAMS_HPP_
#define EOCP_PARAMS_HPP_

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "eocp/maps.hpp"

namespace eocp {

inline constexpr int kParamsVersion = 1;

/// Battery state-of-charge model coefficients for one electric-drive mode.
/// The SOC rate is
///   d3/W * P_nom^2 - [ln(d2 + d1*SOC) + 2*d3*P_nom + d4] * P_bat / W.
struct BatteryCoeffs {
  double d1 = 0.0;
  double d2 = 1.0;
  double d3 = 0.0;  // 1/kW
  double d4 = 0.0;
};

/// Every physical constant and lookup table of the powertrain model.
///
/// The structure of the model is fixed; the numbers are not. All values here
/// are plant-specific calibration data and are meant to be loaded from a
/// parameter file (see json_io.hpp). default_params() supplies a documented,
/// internally consistent calibration for a ~1700 kg parallel hybrid with a
/// 1.9 L engine, a 30 kW induction electric drive, and a 4.68 kWh lead-acid
/// pack.
struct VehicleParams {
  // Engine
  double tau_ice_s = 0.5;                 ///< engine power delivery lag
  PiecewiseLinear p_ice_max_map;          ///< omega_ICE [rad/s] -> max power [kW]
  double eng_threshold_rad_s = 83.7758;   ///< engagement speed (~800 rpm)
  double eng_ramp_band_rad_s = 2.0;       ///< width of the engagement ramp
  PiecewiseLinear omega_min_map;          ///< V [m/s] -> min engine speed [rad/s]
  PiecewiseLinear omega_max_map;          ///< V [m/s] -> max engine speed [rad/s]

  // Battery
  double w_bat_max_kj = 16848.0;          ///< rated pack energy
  std::array<BatteryCoeffs, 2> battery{}; ///< per-mode SOC model coefficients
  std::array<double, 2> p_bat_nom_kw{10.0, -10.0};  ///< per-mode nominal power

  // Chassis
  double m_c_kg = 1700.0;
  double k_v1 = 0.4;      ///< aero drag coefficient [kg/m]
  double k_v2 = 0.08;     ///< rolling resistance [m/s^2]
  double g_mps2 = 9.81;
  double eps_v_mps = 0.1; ///< velocity regularization
  PiecewiseLinear p_fr_max_map;  ///< V [m/s] -> max friction braking [kW]

  // Electric drive
  double beta_rad_per_m = 30.0;             ///< omega_ED = beta * V
  std::array<PiecewiseLinear, 2> eta_ed_map; ///< per-mode omega_ED -> efficiency
  PiecewiseLinear p_ed_in_max_map;           ///< omega_ED -> max input power [kW]

  // Driveline
  double eta_cvt = 0.90;
  double eta_cdd1 = 0.97;
  double eta_cdd2 = 0.97;

  // Fuel
  double fuel_energy_density_mj_per_l = 36.0;
  BilinearMap eta_ice_map;       ///< (P_ICE [kW], V [m/s]) -> efficiency
  double eta_ice_floor = 0.05;   ///< floor applied in the fuel-power term

  /// Upper bound of the engine-power invariant set (table maximum).
  double p_ice_box_max_kw() const { return p_ice_max_map.max_value(); }
  /// Upper bound used for the velocity box (end of the speed-envelope domain).
  double v_box_max_mps() const { return omega_min_map.domain_max(); }
};

/// Performance-index weights and the SOC operating band.
struct CostWeights {
  double c_v = 10.0;         ///< velocity tracking weight [(m/s)^-2]
  double c_ice = 1e-3;       ///< fuel-power weight [kW^-2]
  double c_fr = 1e-4;        ///< friction braking weight [kW^-2]
  double c_bat_nom = 1e5;    ///< terminal SOC deviation weight
  double soc_nom = 0.6;
  double soc_min = 0.4;
  double soc_max = 0.8;
};

/// Default calibration. The battery d-coefficients make the SOC-law bracket
/// equal 1.08 when discharging and 0.92 when charging at SOC 0.6 and 10 kW,
/// i.e. a round-trip efficiency of ~0.85 at the nominal operating point.
inline VehicleParams default_params() {
  VehicleParams p;
  p.tau_ice_s = 0.5;
  p.eng_threshold_rad_s = 800.0 * 2.0 * std::numbers::pi / 60.0;  // 800 rpm
  p.eng_ramp_band_rad_s = 2.0;
  p.p_ice_max_map = PiecewiseLinear({60.0, 83.7758, 120.0, 200.0, 300.0, 450.0},
                                    {18.0, 25.0, 45.0, 70.0, 85.0, 90.0});
  p.omega_min_map = PiecewiseLinear({0.0, 5.0, 15.0, 30.0, 60.0},
                                    {60.0, 90.0, 120.0, 160.0, 220.0});
  p.omega_max_map = PiecewiseLinear({0.0, 5.0, 15.0, 30.0, 60.0},
                                    {160.0, 220.0, 300.0, 380.0, 450.0});

  p.w_bat_max_kj = 16848.0;  // 30 x 12 V x 13 Ah
  // Bracket targets: ln(d2 + d1*0.6) + 2*d3*P_nom + d4 = 1.08 (mode 0) / 0.92 (mode 1).
  p.battery[0] = BatteryCoeffs{-0.2, 1.4, 1e-3, 1.08 - std::log(1.28) - 0.02};
  p.battery[1] = BatteryCoeffs{-0.2, 1.1, 1e-3, 0.92 - std::log(0.98) + 0.02};
  p.p_bat_nom_kw = {10.0, -10.0};

  p.m_c_kg = 1700.0;
  p.k_v1 = 0.4;
  p.k_v2 = 0.08;
  p.g_mps2 = 9.81;
  p.eps_v_mps = 0.1;
  p.p_fr_max_map = PiecewiseLinear({0.0, 5.0, 10.0, 20.0, 30.0, 60.0},
                                   {10.0, 40.0, 70.0, 130.0, 190.0, 350.0});

  p.beta_rad_per_m = 30.0;
  p.eta_ed_map[0] = PiecewiseLinear({0.0, 150.0, 400.0, 900.0, 1800.0},
                                    {0.70, 0.85, 0.91, 0.88, 0.80});
  p.eta_ed_map[1] = PiecewiseLinear({0.0, 150.0, 400.0, 900.0, 1800.0},
                                    {0.68, 0.84, 0.91, 0.87, 0.78});
  p.p_ed_in_max_map = PiecewiseLinear({0.0, 100.0, 300.0, 1800.0},
                                      {12.0, 20.0, 30.0, 30.0});

  p.eta_cvt = 0.90;
  p.eta_cdd1 = 0.97;
  p.eta_cdd2 = 0.97;

  p.fuel_energy_density_mj_per_l = 36.0;
  p.eta_ice_map = BilinearMap(
      {0.0, 10.0, 25.0, 40.0, 60.0, 90.0},  // P_ICE [kW]
      {0.0, 10.0, 20.0, 30.0, 60.0},        // V [m/s]
      {{0.10, 0.10, 0.10, 0.10, 0.10},
       {0.22, 0.24, 0.25, 0.24, 0.22},
       {0.30, 0.33, 0.35, 0.34, 0.31},
       {0.34, 0.38, 0.40, 0.39, 0.36},
       {0.32, 0.36, 0.38, 0.37, 0.34},
       {0.28, 0.32, 0.34, 0.33, 0.31}});
  p.eta_ice_floor = 0.05;
  return p;
}

inline CostWeights default_weights() { return CostWeights{}; }

namespace detail {
inline void check_map(const PiecewiseLinear& m, const std::string& name, bool positive,
                      std::vector<std::string>& out) {
  if (m.empty()) {
    out.push_back(name + ": table missing");
    return;
  }
  if (positive && m.min_value() < 0.0) out.push_back(name + ": negative table value");
}
}  // namespace detail

/// Validates every VehicleParams invariant; returns one message per violation.
inline std::vector<std::string> validate(const VehicleParams& p) {
  std::vector<std::string> v;
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok) v.push_back(msg);
  };
  check(p.tau_ice_s > 0.0, "tau_ice_s: must be > 0");
  check(p.w_bat_max_kj > 0.0, "w_bat_max_kj: must be > 0");
  check(p.m_c_kg > 0.0, "m_c_kg: must be > 0");
  check(p.eps_v_mps > 0.0, "eps_v_mps: must be > 0");
  check(p.beta_rad_per_m > 0.0, "beta_rad_per_m: must be > 0");
  check(p.eng_ramp_band_rad_s >= 0.0, "eng_ramp_band_rad_s: must be >= 0");
  check(p.eta_cvt > 0.0 && p.eta_cvt <= 1.0, "eta_cvt: must be in (0,1]");
  check(p.eta_cdd1 > 0.0 && p.eta_cdd1 <= 1.0, "eta_cdd1: must be in (0,1]");
  check(p.eta_cdd2 > 0.0 && p.eta_cdd2 <= 1.0, "eta_cdd2: must be in (0,1]");
  check(p.fuel_energy_density_mj_per_l > 0.0, "fuel_energy_density_mj_per_l: must be > 0");

  detail::check_map(p.p_ice_max_map, "p_ice_max_map", true, v);
  detail::check_map(p.omega_min_map, "omega_min_map", true, v);
  detail::check_map(p.omega_max_map, "omega_max_map", true, v);
  detail::check_map(p.p_fr_max_map, "p_fr_max_map", true, v);
  detail::check_map(p.p_ed_in_max_map, "p_ed_in_max_map", true, v);

  for (int m = 0; m < 2; ++m) {
    const auto& eta = p.eta_ed_map[m];
    const std::string name = "eta_ed_map[" + std::to_string(m) + "]";
    if (eta.empty()) {
      v.push_back(name + ": table missing");
    } else if (eta.min_value() <= 0.0 || eta.max_value() > 1.0) {
      v.push_back(name + ": efficiencies must be in (0,1]");
    }
  }
  if (p.eta_ice_map.empty()) {
    v.push_back("eta_ice_map: table missing");
  } else if (p.eta_ice_map.min_value() <= 0.0 || p.eta_ice_map.max_value() > 1.0) {
    v.push_back("eta_ice_map: efficiencies must be in (0,1]");
  }

  if (!p.omega_min_map.empty() && !p.omega_max_map.empty()) {
    // compare on the union of both tables' breakpoints
    std::vector<double> qs = p.omega_min_map.breakpoints();
    qs.insert(qs.end(), p.omega_max_map.breakpoints().begin(), p.omega_max_map.breakpoints().end());
    for (double q : qs) {
      if (p.omega_min_map(q) > p.omega_max_map(q)) {
        v.push_back("omega_min_map/omega_max_map: min exceeds max at V=" + std::to_string(q));
        break;
      }
    }
  }
  for (int m = 0; m < 2; ++m) {
    // logarithm domain over the whole SOC range
    const auto& d = p.battery[m];
    if (d.d2 + d.d1 * 0.0 <= 0.0 || d.d2 + d.d1 * 1.0 <= 0.0) {
      v.push_back("battery[" + std::to_string(m) + "]: d2 + d1*SOC must stay positive on [0,1]");
    }
  }
  return v;
}

inline std::vector<std::string> validate(const CostWeights& w) {
  std::vector<std::string> v;
  if (w.c_v < 0 || w.c_ice < 0 || w.c_fr < 0 || w.c_bat_nom < 0) {
    v.push_back("weights: all weights must be >= 0");
  }
  if (!(0.0 < w.soc_min && w.soc_min < w.soc_nom && w.soc_nom < w.soc_max && w.soc_max < 1.0)) {
    v.push_back("weights: need 0 < soc_min < soc_nom < soc_max < 1");
  }
  return v;
}

}  // namespace eocp

#endif  // EOCP_PARAMS_HPP_
