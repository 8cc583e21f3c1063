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

// Test-only oracles: an adaptive reference integrator independent of the
// production RK4 path, and a configurable scalar bimodal OCP used for
// brute-force and closed-form comparisons.

#ifndef EOCP_TESTS_TEST_SUPPORT_HPP_
#define EOCP_TESTS_TEST_SUPPORT_HPP_

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "eocp/transcription.hpp"

namespace eocp_test {

/// Dormand-Prince 5(4) with adaptive steps. Independent oracle for every
/// integration comparison; tolerance defaults to 1e-9.
inline Eigen::VectorXd integrate_reference(
    const std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
    double t0, double t1, double rtol = 1e-9, double atol = 1e-11) {
  double t = t0;
  double h = (t1 - t0) / 100.0;
  const double hmin = (t1 - t0) * 1e-12;
  int guard = 0;
  while (t < t1 - 1e-14) {
    if (++guard > 2000000) throw std::runtime_error("reference integrator: too many steps");
    h = std::min(h, t1 - t);
    const Eigen::VectorXd k1 = f(t, x);
    const Eigen::VectorXd k2 = f(t + h / 5.0, x + h * (k1 / 5.0));
    const Eigen::VectorXd k3 = f(t + 3.0 * h / 10.0, x + h * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2));
    const Eigen::VectorXd k4 =
        f(t + 4.0 * h / 5.0, x + h * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2 + 32.0 / 9.0 * k3));
    const Eigen::VectorXd k5 =
        f(t + 8.0 * h / 9.0, x + h * (19372.0 / 6561.0 * k1 - 25360.0 / 2187.0 * k2 +
                                      64448.0 / 6561.0 * k3 - 212.0 / 729.0 * k4));
    const Eigen::VectorXd k6 =
        f(t + h, x + h * (9017.0 / 3168.0 * k1 - 355.0 / 33.0 * k2 + 46732.0 / 5247.0 * k3 +
                          49.0 / 176.0 * k4 - 5103.0 / 18656.0 * k5));
    const Eigen::VectorXd x5 = x + h * (35.0 / 384.0 * k1 + 500.0 / 1113.0 * k3 +
                                        125.0 / 192.0 * k4 - 2187.0 / 6784.0 * k5 + 11.0 / 84.0 * k6);
    const Eigen::VectorXd k7 = f(t + h, x5);
    const Eigen::VectorXd x4 =
        x + h * (5179.0 / 57600.0 * k1 + 7571.0 / 16695.0 * k3 + 393.0 / 640.0 * k4 -
                 92097.0 / 339200.0 * k5 + 187.0 / 2100.0 * k6 + k7 / 40.0);
    const double scale = atol + rtol * std::max(x.lpNorm<Eigen::Infinity>(),
                                                x5.lpNorm<Eigen::Infinity>());
    const double err = (x5 - x4).lpNorm<Eigen::Infinity>() / scale;
    if (err <= 1.0 || h <= hmin) {
      t += h;
      x = x5;
    }
    const double factor = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
    h *= std::clamp(factor, 0.2, 5.0);
  }
  return x;
}

/// Scalar bimodal OCP with affine dynamics and quadratic stage costs:
///   f_m(x, u) = a[m] x + b[m] u + d[m]
///   L_m(x, u) = w[m] (x - r)^2 + rho[m] u^2 + off[m]
///   terminal  = c_term (x_N - s_term)^2
/// Everything the collocation core needs for closed-form and brute-force
/// oracles.
class ScalarOcp : public eocp::BimodalOcp {
 public:
  double a[2] = {-1.0, -3.0};
  double b[2] = {2.0, 0.0};
  double d[2] = {0.0, 0.0};
  double w[2] = {1.0, 1.0};
  double rho[2] = {0.1, 0.0};
  double off[2] = {0.0, 0.05};
  double r = 1.0;
  double c_term = 0.0;
  double s_term = 0.0;
  double x_lo = -10.0, x_hi = 10.0;
  double u_lo = 0.0, u_hi = 1.0;

  int nx() const override { return 1; }
  int nu() const override { return 1; }

  void dynamics(int mode, const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::VectorXd& f,
                Eigen::MatrixXd* dfdx, Eigen::MatrixXd* dfdu) const override {
    f.resize(1);
    f(0) = a[mode] * x(0) + b[mode] * u(0) + d[mode];
    if (dfdx) {
      dfdx->resize(1, 1);
      (*dfdx)(0, 0) = a[mode];
    }
    if (dfdu) {
      dfdu->resize(1, 1);
      (*dfdu)(0, 0) = b[mode];
    }
  }

  double stage(int mode, int /*node*/, double /*t*/, const Eigen::VectorXd& x,
               const Eigen::VectorXd& u, Eigen::VectorXd* dLdx,
               Eigen::VectorXd* dLdu) const override {
    const double e = x(0) - r;
    if (dLdx) {
      dLdx->resize(1);
      (*dLdx)(0) = 2.0 * w[mode] * e;
    }
    if (dLdu) {
      dLdu->resize(1);
      (*dLdu)(0) = 2.0 * rho[mode] * u(0);
    }
    return w[mode] * e * e + rho[mode] * u(0) * u(0) + off[mode];
  }

  double terminal(const Eigen::VectorXd& xN, Eigen::VectorXd* grad) const override {
    const double e = xN(0) - s_term;
    if (grad) {
      grad->resize(1);
      (*grad)(0) = 2.0 * c_term * e;
    }
    return c_term * e * e;
  }

  void bounds(Eigen::VectorXd& xlo, Eigen::VectorXd& xhi, Eigen::VectorXd& ulo,
              Eigen::VectorXd& uhi) const override {
    xlo = Eigen::VectorXd::Constant(1, x_lo);
    xhi = Eigen::VectorXd::Constant(1, x_hi);
    ulo = Eigen::VectorXd::Constant(1, u_lo);
    uhi = Eigen::VectorXd::Constant(1, u_hi);
  }

  void stage_curvature(int mode, int /*node*/, double /*t*/, const Eigen::VectorXd& /*x*/,
                       const Eigen::VectorXd& /*u*/, Eigen::MatrixXd& Hxx, Eigen::MatrixXd& Huu,
                       Eigen::MatrixXd& Hxu) const override {
    Hxx.setConstant(1, 1, 2.0 * w[mode]);
    Huu.setConstant(1, 1, 2.0 * rho[mode]);
    Hxu.setZero(1, 1);
  }

  void terminal_curvature(const Eigen::VectorXd& /*xN*/, Eigen::MatrixXd& Hxx) const override {
    Hxx.setConstant(1, 1, 2.0 * c_term);
  }

  /// Closed-form implicit midpoint step of the embedded system.
  double midpoint_step(double x0, double h, double u0, double u1, double v) const {
    const double abar = (1.0 - v) * a[0] + v * a[1];
    const double force = (1.0 - v) * (b[0] * u0 + d[0]) + v * (b[1] * u1 + d[1]);
    return ((1.0 + 0.5 * h * abar) * x0 + h * force) / (1.0 - 0.5 * h * abar);
  }

  /// Embedded stage integrand.
  double le(double x, double u0, double u1, double v) const {
    const double e = x - r;
    const double l0 = w[0] * e * e + rho[0] * u0 * u0 + off[0];
    const double l1 = w[1] * e * e + rho[1] * u1 * u1 + off[1];
    return (1.0 - v) * l0 + v * l1;
  }

  /// Exact discretized objective for a 2-interval instance (controls given,
  /// states from the midpoint recursion). Independent arithmetic path used
  /// by the brute-force oracles.
  double two_interval_cost(double x0, double h, double u0_1, double u1_1, double v1, double u0_2,
                           double u1_2, double v2) const {
    const double x1 = midpoint_step(x0, h, u0_1, u1_1, v1);
    const double x2 = midpoint_step(x1, h, u0_2, u1_2, v2);
    double cost = 0.5 * h * (le(x1, u0_1, u1_1, v1) + le(x0, u0_1, u1_1, v1));
    cost += 0.5 * h * (le(x2, u0_2, u1_2, v2) + le(x1, u0_2, u1_2, v2));
    const double e = x2 - s_term;
    return cost + c_term * e * e;
  }
};

}  // namespace eocp_test

#endif  // EOCP_TESTS_TEST_SUPPORT_HPP_
