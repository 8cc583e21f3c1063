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

#ifndef EOCP_CYCLES_HPP_
#define EOCP_CYCLES_HPP_

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "eocp/trajectory.hpp"

namespace eocp {

struct CycleSample {
  double t_s = 0.0;
  double v_des_mps = 0.0;
  double grade_rad = 0.0;
};

/// A sampled drive cycle: reference speed and road grade over time.
/// Samples must start at t = 0, increase strictly, and be spaced at 1 Hz or
/// finer. Accessors interpolate linearly and clamp beyond the ends.
class DriveCycle {
 public:
  DriveCycle() = default;

  explicit DriveCycle(std::vector<CycleSample> samples) : samples_(std::move(samples)) {
    if (samples_.size() < 2) throw std::invalid_argument("DriveCycle: need >= 2 samples");
    if (samples_.front().t_s != 0.0) throw std::invalid_argument("DriveCycle: must start at t=0");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const auto& s = samples_[i];
      if (s.v_des_mps < 0.0) throw std::invalid_argument("DriveCycle: negative speed");
      if (!(std::abs(s.grade_rad) < std::numbers::pi / 2.0)) {
        throw std::invalid_argument("DriveCycle: grade must satisfy |grade| < pi/2");
      }
      if (i > 0) {
        const double dt = s.t_s - samples_[i - 1].t_s;
        if (!(dt > 0.0)) throw std::invalid_argument("DriveCycle: times must increase");
        if (dt > 1.0 + 1e-9) throw std::invalid_argument("DriveCycle: sampling coarser than 1 Hz");
      }
    }
  }

  const std::vector<CycleSample>& samples() const { return samples_; }
  double duration() const { return samples_.back().t_s; }

  double v_des_at(double t) const { return interp(t, &CycleSample::v_des_mps); }
  double grade_at(double t) const { return interp(t, &CycleSample::grade_rad); }

  std::function<double(double)> grade_fn() const {
    return [c = *this](double t) { return c.grade_at(t); };
  }

 private:
  double interp(double t, double CycleSample::* field) const {
    if (t <= samples_.front().t_s) return samples_.front().*field;
    if (t >= samples_.back().t_s) return samples_.back().*field;
    const auto it = std::upper_bound(
        samples_.begin(), samples_.end(), t,
        [](double q, const CycleSample& s) { return q < s.t_s; });
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double w = (t - lo.t_s) / (hi.t_s - lo.t_s);
    return (1.0 - w) * (lo.*field) + w * (hi.*field);
  }

  std::vector<CycleSample> samples_;
};

enum class SpeedUnit { Mph, Mps, Kph };

inline double to_mps(double value, SpeedUnit unit) {
  switch (unit) {
    case SpeedUnit::Mph: return value * 0.44704;
    case SpeedUnit::Kph: return value / 3.6;
    case SpeedUnit::Mps: return value;
  }
  return value;
}

/// Loads a cycle CSV (`t_s,speed,grade_deg`, header optional, grade column
/// optional). Malformed rows raise std::runtime_error naming the line.
inline DriveCycle load_cycle_csv(std::istream& is, SpeedUnit unit, const std::string& name = "") {
  std::vector<CycleSample> samples;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    // strip trailing CR from files with Windows line endings
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && !line.empty() && !(std::isdigit(line[0]) || line[0] == '-' || line[0] == '+' || line[0] == '.')) {
      continue;  // header row
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error(name + ": malformed cycle row at line " + std::to_string(lineno));
      }
    }
    if (vals.size() < 2 || vals.size() > 3) {
      throw std::runtime_error(name + ": expected 2 or 3 columns at line " + std::to_string(lineno));
    }
    CycleSample s;
    s.t_s = vals[0];
    s.v_des_mps = to_mps(vals[1], unit);
    s.grade_rad = vals.size() == 3 ? vals[2] * std::numbers::pi / 180.0 : 0.0;
    samples.push_back(s);
  }
  if (samples.empty()) throw std::runtime_error(name + ": empty cycle file");
  return DriveCycle(std::move(samples));
}

inline DriveCycle load_cycle_csv(const std::filesystem::path& path, SpeedUnit unit) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open cycle file: " + path.string());
  return load_cycle_csv(is, unit, path.string());
}

/// Writes a cycle as `t_s,speed,grade_deg` with speed in m/s, full precision.
inline void save_cycle_csv(const DriveCycle& c, std::ostream& os) {
  os << "t_s,speed,grade_deg\n";
  char buf[128];
  for (const auto& s : c.samples()) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", s.t_s, s.v_des_mps,
                  s.grade_rad * 180.0 / std::numbers::pi);
    os << buf;
  }
}

/// Parametric sawtooth test cycle: per period, ramp linearly to the peak over
/// rise_fraction of the period, then back to zero; sampled at 1 Hz. Holds at
/// zero after n_periods if the duration is longer.
inline DriveCycle sawtooth_cycle(double period_s, double peak_mps, int n_periods,
                                 double duration_s, double rise_fraction = 2.0 / 3.0) {
  if (!(peak_mps >= 0.0)) throw std::invalid_argument("sawtooth_cycle: peak must be >= 0");
  if (!(period_s > 0.0) || n_periods < 1 || !(duration_s > 0.0)) {
    throw std::invalid_argument("sawtooth_cycle: bad shape parameters");
  }
  if (!(rise_fraction > 0.0 && rise_fraction < 1.0)) {
    throw std::invalid_argument("sawtooth_cycle: rise_fraction must be in (0,1)");
  }
  std::vector<CycleSample> samples;
  const int n = static_cast<int>(std::ceil(duration_s));
  const double active = period_s * n_periods;
  for (int i = 0; i <= n; ++i) {
    const double t = std::min(static_cast<double>(i), duration_s);
    double v = 0.0;
    if (t < active) {
      const double phase = std::fmod(t, period_s) / period_s;
      v = phase <= rise_fraction ? peak_mps * (phase / rise_fraction)
                                 : peak_mps * ((1.0 - phase) / (1.0 - rise_fraction));
    }
    samples.push_back({t, v, 0.0});
    if (t >= duration_s) break;
  }
  return DriveCycle(std::move(samples));
}

/// One full sine of road grade over the cycle: uphill for the first half,
/// downhill for the second.
inline std::function<double(double)> sinusoidal_grade(double amplitude_rad, double duration_s) {
  if (!(std::abs(amplitude_rad) < std::numbers::pi / 2.0)) {
    throw std::invalid_argument("sinusoidal_grade: |amplitude| must be < pi/2");
  }
  if (!(duration_s > 0.0)) throw std::invalid_argument("sinusoidal_grade: duration must be > 0");
  return [amplitude_rad, duration_s](double t) {
    return amplitude_rad * std::sin(2.0 * std::numbers::pi * t / duration_s);
  };
}

/// Rebuilds a cycle with grades taken from the given function.
inline DriveCycle with_grade(const DriveCycle& c, const std::function<double(double)>& grade) {
  std::vector<CycleSample> samples = c.samples();
  for (auto& s : samples) s.grade_rad = grade(s.t_s);
  return DriveCycle(std::move(samples));
}

/// Fuel economy of a logged run in miles per US gallon. Zero fuel with
/// nonzero distance reports +infinity.
inline double fuel_economy_mpg(const TrajectoryLog& log, const VehicleParams& prm) {
  if (log.points.empty()) throw std::invalid_argument("fuel_economy_mpg: empty log");
  const double distance_m = integrate_log(log, [](const TrajectoryPoint& p) { return p.v_mps; });
  const double fuel_kj = integrate_log(log, [](const TrajectoryPoint& p) { return p.p_fuel_kw; });
  const double fuel_l = fuel_kj / (prm.fuel_energy_density_mj_per_l * 1000.0);
  const double miles = distance_m / 1609.344;
  const double gallons = fuel_l / 3.785411784;
  if (gallons <= 0.0) return std::numeric_limits<double>::infinity();
  return miles / gallons;
}

/// Fuel volume burned over a logged run, in liters.
inline double fuel_volume_l(const TrajectoryLog& log, const VehicleParams& prm) {
  const double fuel_kj = integrate_log(log, [](const TrajectoryPoint& p) { return p.p_fuel_kw; });
  return fuel_kj / (prm.fuel_energy_density_mj_per_l * 1000.0);
}

}  // namespace eocp

#endif  // EOCP_CYCLES_HPP_
