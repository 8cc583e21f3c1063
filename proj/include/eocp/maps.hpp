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

#ifndef EOCP_MAPS_HPP_
#define EOCP_MAPS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace eocp {

/// 1-D piecewise-linear lookup table with strictly increasing breakpoints.
/// Queries outside the table range clamp to the endpoint values, and the
/// slope reported there is zero. At an interior breakpoint the slope of the
/// segment to the right is reported.
class PiecewiseLinear {
 public:
  PiecewiseLinear() = default;

  PiecewiseLinear(std::vector<double> x, std::vector<double> y)
      : x_(std::move(x)), y_(std::move(y)) {
    if (x_.size() != y_.size() || x_.size() < 2) {
      throw std::invalid_argument("PiecewiseLinear: need >= 2 matching breakpoints");
    }
    for (std::size_t i = 1; i < x_.size(); ++i) {
      if (!(x_[i] > x_[i - 1])) {
        throw std::invalid_argument("PiecewiseLinear: breakpoints must be strictly increasing");
      }
    }
  }

  static PiecewiseLinear from_pairs(const std::vector<std::pair<double, double>>& pts) {
    std::vector<double> x, y;
    x.reserve(pts.size());
    y.reserve(pts.size());
    for (const auto& [a, b] : pts) {
      x.push_back(a);
      y.push_back(b);
    }
    return PiecewiseLinear(std::move(x), std::move(y));
  }

  double operator()(double x) const {
    double slope;
    return eval(x, slope);
  }

  double eval(double x, double& slope) const {
    if (std::isnan(x)) {
      slope = x;
      return x;  // propagate quiet NaNs instead of indexing with them
    }
    if (x < x_.front()) {
      slope = 0.0;
      return y_.front();
    }
    if (x >= x_.back()) {
      slope = 0.0;
      return y_.back();
    }
    // segment with x_[i] <= x < x_[i+1]
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
    slope = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
    return y_[i] + slope * (x - x_[i]);
  }

  const std::vector<double>& breakpoints() const { return x_; }
  const std::vector<double>& values() const { return y_; }
  double domain_min() const { return x_.front(); }
  double domain_max() const { return x_.back(); }
  double max_value() const { return *std::max_element(y_.begin(), y_.end()); }
  double min_value() const { return *std::min_element(y_.begin(), y_.end()); }
  bool empty() const { return x_.empty(); }

 private:
  std::vector<double> x_;
  std::vector<double> y_;
};

/// 2-D table on a rectangular grid with bilinear interpolation.
/// Out-of-range queries clamp the offending coordinate (the partial
/// derivative along a clamped axis is zero).
class BilinearMap {
 public:
  BilinearMap() = default;

  BilinearMap(std::vector<double> x, std::vector<double> y, std::vector<std::vector<double>> z)
      : x_(std::move(x)), y_(std::move(y)), z_(std::move(z)) {
    if (x_.size() < 2 || y_.size() < 2) {
      throw std::invalid_argument("BilinearMap: need >= 2 breakpoints per axis");
    }
    for (std::size_t i = 1; i < x_.size(); ++i) {
      if (!(x_[i] > x_[i - 1])) throw std::invalid_argument("BilinearMap: x not increasing");
    }
    for (std::size_t j = 1; j < y_.size(); ++j) {
      if (!(y_[j] > y_[j - 1])) throw std::invalid_argument("BilinearMap: y not increasing");
    }
    if (z_.size() != x_.size()) {
      throw std::invalid_argument("BilinearMap: z rows must match x breakpoints");
    }
    for (const auto& row : z_) {
      if (row.size() != y_.size()) {
        throw std::invalid_argument("BilinearMap: z cols must match y breakpoints");
      }
    }
  }

  double operator()(double x, double y) const {
    double dx, dy;
    return eval(x, y, dx, dy);
  }

  double eval(double x, double y, double& dzdx, double& dzdy) const {
    if (std::isnan(x) || std::isnan(y)) {
      dzdx = dzdy = std::numeric_limits<double>::quiet_NaN();
      return dzdx;
    }
    bool x_clamped = false, y_clamped = false;
    const std::size_t i = cell_index(x_, x, x_clamped);
    const std::size_t j = cell_index(y_, y, y_clamped);
    const double xc = std::clamp(x, x_.front(), x_.back());
    const double yc = std::clamp(y, y_.front(), y_.back());
    const double hx = x_[i + 1] - x_[i];
    const double hy = y_[j + 1] - y_[j];
    const double s = (xc - x_[i]) / hx;
    const double t = (yc - y_[j]) / hy;
    const double z00 = z_[i][j], z10 = z_[i + 1][j], z01 = z_[i][j + 1], z11 = z_[i + 1][j + 1];
    const double value = z00 * (1 - s) * (1 - t) + z10 * s * (1 - t) + z01 * (1 - s) * t + z11 * s * t;
    dzdx = x_clamped ? 0.0 : ((z10 - z00) * (1 - t) + (z11 - z01) * t) / hx;
    dzdy = y_clamped ? 0.0 : ((z01 - z00) * (1 - s) + (z11 - z10) * s) / hy;
    return value;
  }

  const std::vector<double>& x_breakpoints() const { return x_; }
  const std::vector<double>& y_breakpoints() const { return y_; }
  const std::vector<std::vector<double>>& table() const { return z_; }
  bool empty() const { return x_.empty(); }

  double max_value() const {
    double m = z_[0][0];
    for (const auto& row : z_)
      for (double v : row) m = std::max(m, v);
    return m;
  }
  double min_value() const {
    double m = z_[0][0];
    for (const auto& row : z_)
      for (double v : row) m = std::min(m, v);
    return m;
  }

 private:
  static std::size_t cell_index(const std::vector<double>& grid, double q, bool& clamped) {
    if (q < grid.front()) {
      clamped = true;
      return 0;
    }
    if (q >= grid.back()) {
      clamped = true;
      return grid.size() - 2;
    }
    const auto it = std::upper_bound(grid.begin(), grid.end(), q);
    return static_cast<std::size_t>(it - grid.begin()) - 1;
  }

  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<std::vector<double>> z_;
};

}  // namespace eocp

#endif  // EOCP_MAPS_HPP_
