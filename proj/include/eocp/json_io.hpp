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

#ifndef EOCP_JSON_IO_HPP_
#define EOCP_JSON_IO_HPP_

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "eocp/params.hpp"
#include "eocp/trajectory.hpp"
#include "eocp/transcription.hpp"

namespace eocp {

using nlohmann::json;

namespace detail {

inline json map_to_json(const PiecewiseLinear& m) {
  json arr = json::array();
  for (std::size_t i = 0; i < m.breakpoints().size(); ++i) {
    arr.push_back({m.breakpoints()[i], m.values()[i]});
  }
  return arr;
}

inline PiecewiseLinear map_from_json(const json& arr, const std::string& name) {
  std::vector<double> x, y;
  for (const auto& pair : arr) {
    if (!pair.is_array() || pair.size() != 2) {
      throw std::runtime_error(name + ": map entries must be [breakpoint, value] pairs");
    }
    x.push_back(pair[0].get<double>());
    y.push_back(pair[1].get<double>());
  }
  try {
    return PiecewiseLinear(std::move(x), std::move(y));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(name + ": " + e.what());
  }
}

}  // namespace detail

inline json to_json(const VehicleParams& p) {
  json j;
  j["params_version"] = kParamsVersion;
  json v;
  v["tau_ice_s"] = p.tau_ice_s;
  v["p_ice_max_map_kw"] = detail::map_to_json(p.p_ice_max_map);
  v["eng_threshold_rad_s"] = p.eng_threshold_rad_s;
  v["eng_ramp_band_rad_s"] = p.eng_ramp_band_rad_s;
  v["omega_min_map_rad_s"] = detail::map_to_json(p.omega_min_map);
  v["omega_max_map_rad_s"] = detail::map_to_json(p.omega_max_map);
  v["w_bat_max_kj"] = p.w_bat_max_kj;
  for (int m = 0; m < 2; ++m) {
    const auto& d = p.battery[static_cast<std::size_t>(m)];
    v["battery_d"]["mode" + std::to_string(m)] = {d.d1, d.d2, d.d3, d.d4};
    v["p_bat_nom_kw"]["mode" + std::to_string(m)] = p.p_bat_nom_kw[static_cast<std::size_t>(m)];
    v["eta_ed_map"]["mode" + std::to_string(m)] =
        detail::map_to_json(p.eta_ed_map[static_cast<std::size_t>(m)]);
  }
  v["m_c_kg"] = p.m_c_kg;
  v["k_v1_kg_per_m"] = p.k_v1;
  v["k_v2_mps2"] = p.k_v2;
  v["g_mps2"] = p.g_mps2;
  v["eps_v_mps"] = p.eps_v_mps;
  v["p_fr_max_map_kw"] = detail::map_to_json(p.p_fr_max_map);
  v["beta_rad_per_m"] = p.beta_rad_per_m;
  v["p_ed_in_max_map_kw"] = detail::map_to_json(p.p_ed_in_max_map);
  v["eta_cvt"] = p.eta_cvt;
  v["eta_cdd1"] = p.eta_cdd1;
  v["eta_cdd2"] = p.eta_cdd2;
  v["fuel_energy_density_mj_per_l"] = p.fuel_energy_density_mj_per_l;
  v["eta_ice_floor"] = p.eta_ice_floor;
  v["eta_ice_map"]["p_ice_kw"] = p.eta_ice_map.x_breakpoints();
  v["eta_ice_map"]["v_mps"] = p.eta_ice_map.y_breakpoints();
  v["eta_ice_map"]["eta"] = p.eta_ice_map.table();
  j["vehicle"] = v;
  return j;
}

inline json to_json(const CostWeights& w) {
  return json{{"c_v", w.c_v},           {"c_ice", w.c_ice},   {"c_fr", w.c_fr},
              {"c_bat_nom", w.c_bat_nom}, {"soc_nom", w.soc_nom}, {"soc_min", w.soc_min},
              {"soc_max", w.soc_max}};
}

inline VehicleParams params_from_json(const json& j) {
  if (!j.contains("params_version") || j["params_version"].get<int>() != kParamsVersion) {
    throw std::runtime_error("params: missing or unsupported params_version (expected " +
                             std::to_string(kParamsVersion) + ")");
  }
  if (!j.contains("vehicle")) throw std::runtime_error("params: missing vehicle block");
  const json& v = j["vehicle"];
  VehicleParams p;
  p.tau_ice_s = v.at("tau_ice_s").get<double>();
  p.p_ice_max_map = detail::map_from_json(v.at("p_ice_max_map_kw"), "p_ice_max_map_kw");
  p.eng_threshold_rad_s = v.at("eng_threshold_rad_s").get<double>();
  p.eng_ramp_band_rad_s = v.at("eng_ramp_band_rad_s").get<double>();
  p.omega_min_map = detail::map_from_json(v.at("omega_min_map_rad_s"), "omega_min_map_rad_s");
  p.omega_max_map = detail::map_from_json(v.at("omega_max_map_rad_s"), "omega_max_map_rad_s");
  p.w_bat_max_kj = v.at("w_bat_max_kj").get<double>();
  for (int m = 0; m < 2; ++m) {
    const std::string key = "mode" + std::to_string(m);
    const auto d = v.at("battery_d").at(key).get<std::vector<double>>();
    if (d.size() != 4) throw std::runtime_error("params: battery_d." + key + " needs 4 values");
    p.battery[static_cast<std::size_t>(m)] = BatteryCoeffs{d[0], d[1], d[2], d[3]};
    p.p_bat_nom_kw[static_cast<std::size_t>(m)] = v.at("p_bat_nom_kw").at(key).get<double>();
    p.eta_ed_map[static_cast<std::size_t>(m)] =
        detail::map_from_json(v.at("eta_ed_map").at(key), "eta_ed_map." + key);
  }
  p.m_c_kg = v.at("m_c_kg").get<double>();
  p.k_v1 = v.at("k_v1_kg_per_m").get<double>();
  p.k_v2 = v.at("k_v2_mps2").get<double>();
  p.g_mps2 = v.at("g_mps2").get<double>();
  p.eps_v_mps = v.at("eps_v_mps").get<double>();
  p.p_fr_max_map = detail::map_from_json(v.at("p_fr_max_map_kw"), "p_fr_max_map_kw");
  p.beta_rad_per_m = v.at("beta_rad_per_m").get<double>();
  p.p_ed_in_max_map = detail::map_from_json(v.at("p_ed_in_max_map_kw"), "p_ed_in_max_map_kw");
  p.eta_cvt = v.at("eta_cvt").get<double>();
  p.eta_cdd1 = v.at("eta_cdd1").get<double>();
  p.eta_cdd2 = v.at("eta_cdd2").get<double>();
  p.fuel_energy_density_mj_per_l = v.at("fuel_energy_density_mj_per_l").get<double>();
  p.eta_ice_floor = v.at("eta_ice_floor").get<double>();
  p.eta_ice_map = BilinearMap(v.at("eta_ice_map").at("p_ice_kw").get<std::vector<double>>(),
                              v.at("eta_ice_map").at("v_mps").get<std::vector<double>>(),
                              v.at("eta_ice_map").at("eta").get<std::vector<std::vector<double>>>());
  return p;
}

inline CostWeights weights_from_json(const json& j) {
  CostWeights w;
  w.c_v = j.at("c_v").get<double>();
  w.c_ice = j.at("c_ice").get<double>();
  w.c_fr = j.at("c_fr").get<double>();
  w.c_bat_nom = j.at("c_bat_nom").get<double>();
  w.soc_nom = j.at("soc_nom").get<double>();
  w.soc_min = j.at("soc_min").get<double>();
  w.soc_max = j.at("soc_max").get<double>();
  return w;
}

struct ParamsFile {
  VehicleParams vehicle;
  CostWeights weights;
};

inline ParamsFile load_params_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open params file: " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("params file " + path.string() + ": " + e.what());
  }
  ParamsFile out;
  out.vehicle = params_from_json(j);
  out.weights = j.contains("weights") ? weights_from_json(j["weights"]) : CostWeights{};
  return out;
}

inline void save_params_file(const VehicleParams& p, const CostWeights& w,
                             const std::filesystem::path& path) {
  json j = to_json(p);
  j["weights"] = to_json(w);
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write params file: " + path.string());
  os << j.dump(2) << '\n';
}

inline json to_json(const RunSummary& s) {
  json j;
  j["rms_tracking_mps"] = s.rms_tracking_mps;
  j["final_soc"] = s.final_soc;
  j["fuel_volume_l"] = s.fuel_volume_l;
  // JSON has no infinity; an unbounded fuel economy is emitted as null
  if (std::isfinite(s.mpg)) {
    j["mpg"] = s.mpg;
  } else {
    j["mpg"] = nullptr;
  }
  j["mode_switches"] = s.mode_switches;
  j["solver_failures"] = s.solver_failures;
  return j;
}

/// Structured dump of a transcribed NLP: variable names, bounds, and the
/// defect-Jacobian sparsity pattern at the warm start.
inline json dump_nlp(const NlpProblem& P) {
  json j;
  j["n_vars"] = P.layout.n_vars();
  j["n_defects"] = P.layout.n_defects();
  j["mesh"] = {{"t0", P.mesh.t0}, {"n_intervals", P.mesh.n_intervals}, {"h", P.mesh.h}};
  const char* state_names[] = {"p_ice_kw", "soc", "v_mps"};
  const char* control_names[] = {"u_ice", "u_fr", "u_mode"};
  std::vector<std::string> names(static_cast<std::size_t>(P.layout.n_vars()));
  for (int node = 0; node <= P.layout.n_intervals; ++node) {
    for (int k = 0; k < P.layout.nx; ++k) {
      std::string base = P.layout.nx == 3 ? state_names[k] : "x" + std::to_string(k);
      names[static_cast<std::size_t>(P.layout.x_index(node) + k)] =
          base + "[" + std::to_string(node) + "]";
    }
  }
  for (int iv = 1; iv <= P.layout.n_intervals; ++iv) {
    for (int k = 0; k < P.layout.nu; ++k) {
      std::string base = P.layout.nu == 3 ? control_names[k] : "u" + std::to_string(k);
      names[static_cast<std::size_t>(P.layout.u0_index(iv) + k)] =
          base + "0[" + std::to_string(iv) + "]";
      names[static_cast<std::size_t>(P.layout.u1_index(iv) + k)] =
          base + "1[" + std::to_string(iv) + "]";
    }
    names[static_cast<std::size_t>(P.layout.v_index(iv))] = "v[" + std::to_string(iv) + "]";
  }
  json vars = json::array();
  for (int i = 0; i < P.layout.n_vars(); ++i) {
    vars.push_back({{"name", names[static_cast<std::size_t>(i)]},
                    {"lower", P.nlp.lower(i)},
                    {"upper", P.nlp.upper(i)}});
  }
  j["variables"] = vars;

  Eigen::VectorXd c;
  Eigen::MatrixXd J;
  collocation_defects(*P.ocp, P.mesh, P.warm_start, c, &J);
  json pattern = json::array();
  for (int r = 0; r < J.rows(); ++r) {
    json row = json::array();
    for (int col = 0; col < J.cols(); ++col) {
      if (J(r, col) != 0.0) row.push_back(col);
    }
    pattern.push_back(row);
  }
  j["defect_jacobian_sparsity"] = pattern;
  return j;
}

}  // namespace eocp

#endif  // EOCP_JSON_IO_HPP_
