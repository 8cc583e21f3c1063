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

#ifndef EOCP_TRANSCRIPTION_HPP_
#define EOCP_TRANSCRIPTION_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "eocp/cost.hpp"
#include "eocp/cycles.hpp"
#include "eocp/embedding.hpp"
#include "eocp/model.hpp"
#include "eocp/nlp.hpp"
#include "eocp/params.hpp"

namespace eocp {

/// Uniform collocation mesh t_j = t0 + j*h, j = 0..n_intervals.
struct Mesh {
  double t0 = 0.0;
  int n_intervals = 1;
  double h = 1.0;

  double t(int j) const { return t0 + h * static_cast<double>(j); }
  double t_end() const { return t(n_intervals); }
};

/// Triangular (hat) state basis centered on node j.
inline double basis_state(int j, double t, const Mesh& mesh) {
  const double tj = mesh.t(j);
  if (t > tj - mesh.h && t <= tj) {
    if (j == 0) return t == tj ? 1.0 : 0.0;  // no interval to the left of node 0
    return (t - (tj - mesh.h)) / mesh.h;
  }
  if (t > tj && t <= tj + mesh.h && j < mesh.n_intervals) {
    return ((tj + mesh.h) - t) / mesh.h;
  }
  return 0.0;
}

/// Piecewise-constant control basis: 1 on (t_{j-1}, t_j], else 0 (j = 1..N).
inline double basis_control(int j, double t, const Mesh& mesh) {
  return (t > mesh.t(j - 1) && t <= mesh.t(j)) ? 1.0 : 0.0;
}

/// Abstract bimodal optimal-control problem the collocation core works on:
/// two vector fields f_0/f_1 with per-mode controls, a shared-structure stage
/// integrand, an optional node penalty, and a terminal cost.
class BimodalOcp {
 public:
  virtual ~BimodalOcp() = default;

  virtual int nx() const = 0;
  virtual int nu() const = 0;

  /// f_mode(x, u); fills Jacobians when the pointers are given.
  virtual void dynamics(int mode, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                        Eigen::VectorXd& f, Eigen::MatrixXd* dfdx,
                        Eigen::MatrixXd* dfdu) const = 0;

  /// Stage integrand L_mode at mesh node `node` (time t).
  virtual double stage(int mode, int node, double t, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& u, Eigen::VectorXd* dLdx,
                       Eigen::VectorXd* dLdu) const = 0;

  /// Control-independent penalty applied per node with trapezoid weights.
  virtual double node_penalty(int /*node*/, const Eigen::VectorXd& /*x*/,
                              Eigen::VectorXd* dPdx) const {
    if (dPdx) dPdx->setZero();
    return 0.0;
  }

  virtual double terminal(const Eigen::VectorXd& xN, Eigen::VectorXd* grad) const = 0;

  virtual void bounds(Eigen::VectorXd& x_lo, Eigen::VectorXd& x_hi, Eigen::VectorXd& u_lo,
                      Eigen::VectorXd& u_hi) const = 0;

  /// Positive-semidefinite curvature blocks of the stage integrand
  /// (Gauss-Newton of the residual form). Zero blocks are a valid default;
  /// the solver then falls back to quasi-Newton behavior through its
  /// regularization floor.
  virtual void stage_curvature(int /*mode*/, int /*node*/, double /*t*/,
                               const Eigen::VectorXd& /*x*/, const Eigen::VectorXd& /*u*/,
                               Eigen::MatrixXd& Hxx, Eigen::MatrixXd& Huu,
                               Eigen::MatrixXd& Hxu) const {
    Hxx.setZero(nx(), nx());
    Huu.setZero(nu(), nu());
    Hxu.setZero(nx(), nu());
  }

  virtual void node_penalty_curvature(int /*node*/, const Eigen::VectorXd& /*x*/,
                                      Eigen::MatrixXd& Hxx) const {
    Hxx.setZero(nx(), nx());
  }

  virtual void terminal_curvature(const Eigen::VectorXd& /*xN*/, Eigen::MatrixXd& Hxx) const {
    Hxx.setZero(nx(), nx());
  }
};

/// Index arithmetic for the decision vector
/// [x_0 .. x_N, (u0_1, u1_1, v_1) .. (u0_N, u1_N, v_N)].
struct DecisionLayout {
  int nx = 0;
  int nu = 0;
  int n_intervals = 0;

  int n_vars() const { return nx * (n_intervals + 1) + (2 * nu + 1) * n_intervals; }
  int n_defects() const { return nx * n_intervals; }
  int x_index(int j) const { return nx * j; }
  int u0_index(int j) const { return nx * (n_intervals + 1) + (2 * nu + 1) * (j - 1); }
  int u1_index(int j) const { return u0_index(j) + nu; }
  int v_index(int j) const { return u0_index(j) + 2 * nu; }
};

/// Midpoint collocation defects
///   r_j = x_j - x_{j-1} - h (1-v_j) f_0(xm, u0_j) - h v_j f_1(xm, u1_j),
/// xm = (x_{j-1}+x_j)/2, stacked for j = 1..N. Fills the dense Jacobian when
/// requested. Non-finite dynamics values are flagged by a large residual.
inline void collocation_defects(const BimodalOcp& ocp, const Mesh& mesh, const Eigen::VectorXd& z,
                                Eigen::VectorXd& residual, Eigen::MatrixXd* jac) {
  const DecisionLayout L{ocp.nx(), ocp.nu(), mesh.n_intervals};
  const int nx = L.nx, nu = L.nu, N = L.n_intervals;
  residual.resize(L.n_defects());
  if (jac) jac->setZero(L.n_defects(), L.n_vars());

  Eigen::VectorXd f0(nx), f1(nx);
  Eigen::MatrixXd A0(nx, nx), B0(nx, nu), A1(nx, nx), B1(nx, nu);
  for (int j = 1; j <= N; ++j) {
    const Eigen::VectorXd x_prev = z.segment(L.x_index(j - 1), nx);
    const Eigen::VectorXd x_next = z.segment(L.x_index(j), nx);
    const Eigen::VectorXd u0 = z.segment(L.u0_index(j), nu);
    const Eigen::VectorXd u1 = z.segment(L.u1_index(j), nu);
    const double v = z(L.v_index(j));
    const Eigen::VectorXd xm = 0.5 * (x_prev + x_next);

    ocp.dynamics(0, xm, u0, f0, jac ? &A0 : nullptr, jac ? &B0 : nullptr);
    ocp.dynamics(1, xm, u1, f1, jac ? &A1 : nullptr, jac ? &B1 : nullptr);

    Eigen::VectorXd r =
        x_next - x_prev - mesh.h * (1.0 - v) * f0 - mesh.h * v * f1;
    for (int k = 0; k < nx; ++k) {
      if (!std::isfinite(r(k))) r(k) = 1e20;
    }
    residual.segment(nx * (j - 1), nx) = r;

    if (jac) {
      const int row = nx * (j - 1);
      const Eigen::MatrixXd F = (1.0 - v) * A0 + v * A1;  // d f_E / dx at the midpoint
      jac->block(row, L.x_index(j - 1), nx, nx) =
          -Eigen::MatrixXd::Identity(nx, nx) - 0.5 * mesh.h * F;
      jac->block(row, L.x_index(j), nx, nx) =
          Eigen::MatrixXd::Identity(nx, nx) - 0.5 * mesh.h * F;
      jac->block(row, L.u0_index(j), nx, nu) = -mesh.h * (1.0 - v) * B0;
      jac->block(row, L.u1_index(j), nx, nu) = -mesh.h * v * B1;
      jac->block(row, L.v_index(j), nx, 1) = -mesh.h * (f1 - f0);
    }
  }
}

/// Discretized embedded performance index: terminal cost plus the trapezoid
/// of L_E with interval-constant controls,
///   sum_j h/2 [L_E(t_j, x_j, u_j, v_j) + L_E(t_{j-1}, x_{j-1}, u_j, v_j)],
/// plus node penalties with trapezoid weights.
inline double discrete_cost(const BimodalOcp& ocp, const Mesh& mesh, const Eigen::VectorXd& z,
                            Eigen::VectorXd* grad) {
  const DecisionLayout L{ocp.nx(), ocp.nu(), mesh.n_intervals};
  const int nx = L.nx, nu = L.nu, N = L.n_intervals;
  if (grad) grad->setZero(L.n_vars());

  double total = 0.0;
  Eigen::VectorXd dl0x(nx), dl0u(nu), dl1x(nx), dl1u(nu);

  // embedded integrand at one node with interval-j controls
  auto add_node = [&](int node, int j, double weight) {
    const Eigen::VectorXd x = z.segment(L.x_index(node), nx);
    const Eigen::VectorXd u0 = z.segment(L.u0_index(j), nu);
    const Eigen::VectorXd u1 = z.segment(L.u1_index(j), nu);
    const double v = z(L.v_index(j));
    const double t = mesh.t(node);
    const double l0 = ocp.stage(0, node, t, x, u0, grad ? &dl0x : nullptr, grad ? &dl0u : nullptr);
    const double l1 = ocp.stage(1, node, t, x, u1, grad ? &dl1x : nullptr, grad ? &dl1u : nullptr);
    total += weight * ((1.0 - v) * l0 + v * l1);
    if (grad) {
      grad->segment(L.x_index(node), nx) += weight * ((1.0 - v) * dl0x + v * dl1x);
      grad->segment(L.u0_index(j), nu) += weight * (1.0 - v) * dl0u;
      grad->segment(L.u1_index(j), nu) += weight * v * dl1u;
      (*grad)(L.v_index(j)) += weight * (l1 - l0);
    }
  };

  for (int j = 1; j <= N; ++j) {
    add_node(j, j, 0.5 * mesh.h);
    add_node(j - 1, j, 0.5 * mesh.h);
  }

  Eigen::VectorXd dpx(nx);
  for (int node = 0; node <= N; ++node) {
    const double w = (node == 0 || node == N) ? 0.5 * mesh.h : mesh.h;
    total += w * ocp.node_penalty(node, z.segment(L.x_index(node), nx), grad ? &dpx : nullptr);
    if (grad) grad->segment(L.x_index(node), nx) += w * dpx;
  }

  Eigen::VectorXd dterm(nx);
  total += ocp.terminal(z.segment(L.x_index(N), nx), grad ? &dterm : nullptr);
  if (grad) grad->segment(L.x_index(N), nx) += dterm;
  return total;
}

/// Gauss-Newton curvature of the discretized objective: stage blocks with the
/// same trapezoid weights as discrete_cost, node penalties, and the terminal.
/// The bilinear v couplings are dropped (they are the indefinite part), so
/// the result is positive semidefinite.
inline void discrete_cost_curvature(const BimodalOcp& ocp, const Mesh& mesh,
                                    const Eigen::VectorXd& z, Eigen::MatrixXd& H) {
  const DecisionLayout L{ocp.nx(), ocp.nu(), mesh.n_intervals};
  const int nx = L.nx, nu = L.nu, N = L.n_intervals;
  H.setZero(L.n_vars(), L.n_vars());

  Eigen::MatrixXd Hxx(nx, nx), Huu(nu, nu), Hxu(nx, nu);
  auto add_node = [&](int node, int j, double weight) {
    const Eigen::VectorXd x = z.segment(L.x_index(node), nx);
    const double v = z(L.v_index(j));
    const double t = mesh.t(node);

    ocp.stage_curvature(0, node, t, x, z.segment(L.u0_index(j), nu), Hxx, Huu, Hxu);
    H.block(L.x_index(node), L.x_index(node), nx, nx) += weight * (1.0 - v) * Hxx;
    H.block(L.u0_index(j), L.u0_index(j), nu, nu) += weight * (1.0 - v) * Huu;
    H.block(L.x_index(node), L.u0_index(j), nx, nu) += weight * (1.0 - v) * Hxu;
    H.block(L.u0_index(j), L.x_index(node), nu, nx) += weight * (1.0 - v) * Hxu.transpose();

    ocp.stage_curvature(1, node, t, x, z.segment(L.u1_index(j), nu), Hxx, Huu, Hxu);
    H.block(L.x_index(node), L.x_index(node), nx, nx) += weight * v * Hxx;
    H.block(L.u1_index(j), L.u1_index(j), nu, nu) += weight * v * Huu;
    H.block(L.x_index(node), L.u1_index(j), nx, nu) += weight * v * Hxu;
    H.block(L.u1_index(j), L.x_index(node), nu, nx) += weight * v * Hxu.transpose();
  };
  for (int j = 1; j <= N; ++j) {
    add_node(j, j, 0.5 * mesh.h);
    add_node(j - 1, j, 0.5 * mesh.h);
  }
  for (int node = 0; node <= N; ++node) {
    const double w = (node == 0 || node == N) ? 0.5 * mesh.h : mesh.h;
    ocp.node_penalty_curvature(node, z.segment(L.x_index(node), nx), Hxx);
    H.block(L.x_index(node), L.x_index(node), nx, nx) += w * Hxx;
  }
  ocp.terminal_curvature(z.segment(L.x_index(N), nx), Hxx);
  H.block(L.x_index(N), L.x_index(N), nx, nx) += Hxx;
}

/// A transcribed problem: the solver-facing NLP plus everything needed to
/// interpret its solution.
struct NlpProblem {
  Nlp nlp;
  Mesh mesh;
  DecisionLayout layout;
  Eigen::VectorXd warm_start;
  std::shared_ptr<const BimodalOcp> ocp;

  Eigen::VectorXd state_at(const Eigen::VectorXd& z, int node) const {
    return z.segment(layout.x_index(node), layout.nx);
  }
  Eigen::VectorXd u0_at(const Eigen::VectorXd& z, int j) const {
    return z.segment(layout.u0_index(j), layout.nu);
  }
  Eigen::VectorXd u1_at(const Eigen::VectorXd& z, int j) const {
    return z.segment(layout.u1_index(j), layout.nu);
  }
  double v_at(const Eigen::VectorXd& z, int j) const { return z(layout.v_index(j)); }
};

/// Wraps a BimodalOcp + mesh into the solver-facing NLP with shared bounds
/// and evaluator closures. x0 is pinned via equal bounds on the first node.
inline NlpProblem assemble_nlp(std::shared_ptr<const BimodalOcp> ocp, const Mesh& mesh,
                               const Eigen::VectorXd& x0,
                               const std::optional<std::vector<int>>& fixed_modes = {}) {
  if (mesh.n_intervals < 1) throw std::invalid_argument("assemble_nlp: empty window");
  NlpProblem P;
  P.mesh = mesh;
  P.ocp = ocp;
  P.layout = DecisionLayout{ocp->nx(), ocp->nu(), mesh.n_intervals};
  const DecisionLayout& L = P.layout;
  const int nx = L.nx, nu = L.nu, N = L.n_intervals;
  if (x0.size() != nx) throw std::invalid_argument("assemble_nlp: x0 dimension mismatch");
  if (fixed_modes && static_cast<int>(fixed_modes->size()) != N) {
    throw std::invalid_argument("assemble_nlp: fixed_modes must cover every interval");
  }

  Eigen::VectorXd x_lo(nx), x_hi(nx), u_lo(nu), u_hi(nu);
  ocp->bounds(x_lo, x_hi, u_lo, u_hi);

  P.nlp.lower.resize(L.n_vars());
  P.nlp.upper.resize(L.n_vars());
  for (int j = 0; j <= N; ++j) {
    P.nlp.lower.segment(L.x_index(j), nx) = x_lo;
    P.nlp.upper.segment(L.x_index(j), nx) = x_hi;
  }
  // pin the measured initial state (clamped into the box)
  const Eigen::VectorXd x0c = x0.cwiseMax(x_lo).cwiseMin(x_hi);
  P.nlp.lower.segment(L.x_index(0), nx) = x0c;
  P.nlp.upper.segment(L.x_index(0), nx) = x0c;
  for (int j = 1; j <= N; ++j) {
    P.nlp.lower.segment(L.u0_index(j), nu) = u_lo;
    P.nlp.upper.segment(L.u0_index(j), nu) = u_hi;
    P.nlp.lower.segment(L.u1_index(j), nu) = u_lo;
    P.nlp.upper.segment(L.u1_index(j), nu) = u_hi;
    double v_lo = 0.0, v_hi = 1.0;
    if (fixed_modes) {
      v_lo = v_hi = static_cast<double>((*fixed_modes)[static_cast<std::size_t>(j - 1)]);
    }
    P.nlp.lower(L.v_index(j)) = v_lo;
    P.nlp.upper(L.v_index(j)) = v_hi;
  }

  P.nlp.n_eq = L.n_defects();
  P.nlp.objective = [ocp, mesh](const Eigen::VectorXd& z, Eigen::VectorXd* g) {
    return discrete_cost(*ocp, mesh, z, g);
  };
  P.nlp.equalities = [ocp, mesh](const Eigen::VectorXd& z, Eigen::VectorXd& c,
                                 Eigen::MatrixXd* Jc) {
    collocation_defects(*ocp, mesh, z, c, Jc);
  };
  P.nlp.objective_curvature = [ocp, mesh](const Eigen::VectorXd& z, Eigen::MatrixXd& H) {
    discrete_cost_curvature(*ocp, mesh, z, H);
  };
  return P;
}

// ---------------------------------------------------------------------------
// Vehicle problem
// ---------------------------------------------------------------------------

/// One predictive window: mesh, reference speeds at the nodes, and the road
/// grade frozen at its window-start value.
struct OcpWindow {
  Mesh mesh;
  Eigen::VectorXd v_des;  ///< reference speed at each node (N+1)
  double grade_rad = 0.0;
};

inline OcpWindow make_window(const DriveCycle& cycle, double t_start, int n_intervals, double h) {
  if (n_intervals < 1) throw std::invalid_argument("make_window: empty window");
  OcpWindow w;
  w.mesh = Mesh{t_start, n_intervals, h};
  w.v_des.resize(n_intervals + 1);
  for (int j = 0; j <= n_intervals; ++j) w.v_des(j) = cycle.v_des_at(w.mesh.t(j));
  w.grade_rad = cycle.grade_at(t_start);
  return w;
}

/// The powertrain EOCP on one window, in BimodalOcp form. Dynamics use the
/// smooth sign surrogate; tables contribute right-sided slopes.
class VehicleOcp : public BimodalOcp {
 public:
  VehicleOcp(OcpWindow window, CostWeights weights, VehicleParams params, double c_bat_terminal)
      : win_(std::move(window)), w_(weights), prm_(std::move(params)), c_bat_(c_bat_terminal) {}

  int nx() const override { return 3; }
  int nu() const override { return 3; }

  void dynamics(int mode, const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::VectorXd& f,
                Eigen::MatrixXd* dfdx, Eigen::MatrixXd* dfdu) const override {
    const VehicleState xs = VehicleState::from_vec(x);
    const ControlVector uc = ControlVector::from_vec(u);
    f = mode_dynamics(xs, uc, mode, win_.grade_rad, prm_, SgnMode::Smooth).rate.vec();
    if (dfdx || dfdu) {
      const ModeJacobian J = mode_dynamics_jacobian(xs, uc, mode, win_.grade_rad, prm_,
                                                    SgnMode::Smooth);
      if (dfdx) *dfdx = J.dfdx;
      if (dfdu) *dfdu = J.dfdu;
    }
  }

  double stage(int /*mode*/, int node, double /*t*/, const Eigen::VectorXd& x,
               const Eigen::VectorXd& u, Eigen::VectorXd* dLdx,
               Eigen::VectorXd* dLdu) const override {
    const StageCostEval e = stage_cost_with_grad(VehicleState::from_vec(x),
                                                 ControlVector::from_vec(u), win_.v_des(node), w_,
                                                 prm_);
    if (dLdx) *dLdx = e.dx;
    if (dLdu) *dLdu = e.du;
    return e.value;
  }

  double node_penalty(int /*node*/, const Eigen::VectorXd& x,
                      Eigen::VectorXd* dPdx) const override {
    double dsoc = 0.0;
    const double p = soc_band_penalty(x(1), w_, &dsoc);
    if (dPdx) {
      dPdx->setZero(3);
      (*dPdx)(1) = dsoc;
    }
    return p;
  }

  double terminal(const Eigen::VectorXd& xN, Eigen::VectorXd* grad) const override {
    const double d = xN(1) - w_.soc_nom;
    if (grad) {
      grad->setZero(3);
      (*grad)(1) = 2.0 * c_bat_ * d;
    }
    return c_bat_ * d * d;
  }

  void bounds(Eigen::VectorXd& x_lo, Eigen::VectorXd& x_hi, Eigen::VectorXd& u_lo,
              Eigen::VectorXd& u_hi) const override {
    x_lo.resize(3);
    x_hi.resize(3);
    x_lo << 0.0, 0.0, 0.0;
    x_hi << prm_.p_ice_box_max_kw(), 1.0, prm_.v_box_max_mps();
    u_lo = Eigen::VectorXd::Zero(3);
    u_hi = Eigen::VectorXd::Ones(3);
  }

  void stage_curvature(int /*mode*/, int /*node*/, double /*t*/, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& u, Eigen::MatrixXd& Hxx, Eigen::MatrixXd& Huu,
                       Eigen::MatrixXd& Hxu) const override {
    Hxx.setZero(3, 3);
    Huu.setZero(3, 3);
    Hxu.setZero(3, 3);
    // tracking residual V - v_des
    Hxx(2, 2) += 2.0 * w_.c_v;
    // fuel residual P/eta(P, V)
    double deta_dP, deta_dV;
    double eta = prm_.eta_ice_map.eval(x(0), x(2), deta_dP, deta_dV);
    if (eta < prm_.eta_ice_floor) {
      eta = prm_.eta_ice_floor;
      deta_dP = deta_dV = 0.0;
    }
    Eigen::Vector3d gf = Eigen::Vector3d::Zero();
    gf(0) = (eta - x(0) * deta_dP) / (eta * eta);
    gf(2) = -x(0) * deta_dV / (eta * eta);
    Hxx += 2.0 * w_.c_ice * gf * gf.transpose();
    // friction residual P_FR^max(V) u_fr
    double s_pfr;
    const double pfr_max = prm_.p_fr_max_map.eval(x(2), s_pfr);
    Eigen::Vector3d gx = Eigen::Vector3d::Zero();
    gx(2) = s_pfr * u(1);
    Eigen::Vector3d gu = Eigen::Vector3d::Zero();
    gu(1) = pfr_max;
    Hxx += 2.0 * w_.c_fr * gx * gx.transpose();
    Huu += 2.0 * w_.c_fr * gu * gu.transpose();
    Hxu += 2.0 * w_.c_fr * gx * gu.transpose();
  }

  void node_penalty_curvature(int /*node*/, const Eigen::VectorXd& x,
                              Eigen::MatrixXd& Hxx) const override {
    Hxx.setZero(3, 3);
    if (x(1) < w_.soc_min || x(1) > w_.soc_max) {
      Hxx(1, 1) = 2.0 * 10.0 * w_.c_bat_nom;
    }
  }

  void terminal_curvature(const Eigen::VectorXd& /*xN*/, Eigen::MatrixXd& Hxx) const override {
    Hxx.setZero(3, 3);
    Hxx(1, 1) = 2.0 * c_bat_;
  }

  const OcpWindow& window() const { return win_; }
  const VehicleParams& params() const { return prm_; }
  const CostWeights& weights() const { return w_; }
  double c_bat_terminal() const { return c_bat_; }

 private:
  OcpWindow win_;
  CostWeights w_;
  VehicleParams prm_;
  double c_bat_;
};

namespace detail {

/// Implicit-midpoint forward simulation on the mesh (Newton per interval);
/// used for defect-feasible warm starts and test trajectories.
inline Eigen::VectorXd midpoint_simulate(const BimodalOcp& ocp, const Mesh& mesh,
                                         const Eigen::VectorXd& x0, const Eigen::VectorXd& u0,
                                         const Eigen::VectorXd& u1, double v) {
  const int nx = ocp.nx();
  Eigen::VectorXd traj((mesh.n_intervals + 1) * nx);
  traj.segment(0, nx) = x0;
  Eigen::VectorXd f0(nx), f1(nx);
  Eigen::MatrixXd A0(nx, nx), A1(nx, nx);
  for (int j = 1; j <= mesh.n_intervals; ++j) {
    const Eigen::VectorXd xp = traj.segment(nx * (j - 1), nx);
    Eigen::VectorXd xn = xp;
    for (int it = 0; it < 50; ++it) {
      const Eigen::VectorXd xm = 0.5 * (xp + xn);
      ocp.dynamics(0, xm, u0, f0, &A0, nullptr);
      ocp.dynamics(1, xm, u1, f1, &A1, nullptr);
      const Eigen::VectorXd g = xn - xp - mesh.h * ((1.0 - v) * f0 + v * f1);
      if (g.lpNorm<Eigen::Infinity>() < 1e-12) break;
      const Eigen::MatrixXd dg = Eigen::MatrixXd::Identity(nx, nx) -
                                 0.5 * mesh.h * ((1.0 - v) * A0 + v * A1);
      xn -= dg.partialPivLu().solve(g);
    }
    traj.segment(nx * j, nx) = xn;
  }
  return traj;
}

}  // namespace detail

/// Transcribes one vehicle window into an NLP. The warm start simulates the
/// embedded plant under u0 = u1 = (0.3, 0, 0.3), v = 0.5 (or the pinned mode
/// pattern when fixed_modes is given) so the initial defects are already
/// near zero.
inline NlpProblem build_nlp(const OcpWindow& window, const VehicleState& x0,
                            const CostWeights& weights, const VehicleParams& params,
                            double c_bat_terminal,
                            const std::optional<std::vector<int>>& fixed_modes = {}) {
  auto ocp = std::make_shared<VehicleOcp>(window, weights, params, c_bat_terminal);
  NlpProblem P = assemble_nlp(ocp, window.mesh, x0.vec(), fixed_modes);

  const DecisionLayout& L = P.layout;
  const int N = L.n_intervals;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(L.n_vars());
  Eigen::Vector3d u_ws;
  u_ws << 0.3, 0.0, 0.3;

  const Eigen::VectorXd x0c = P.nlp.lower.segment(0, 3);  // pinned value
  if (fixed_modes) {
    // piecewise simulation honoring the pinned binary modes
    Eigen::VectorXd xj = x0c;
    z.segment(0, 3) = xj;
    for (int j = 1; j <= N; ++j) {
      const double v = static_cast<double>((*fixed_modes)[static_cast<std::size_t>(j - 1)]);
      Mesh one{window.mesh.t(j - 1), 1, window.mesh.h};
      const Eigen::VectorXd seg = detail::midpoint_simulate(*ocp, one, xj, u_ws, u_ws, v);
      xj = seg.tail(3);
      z.segment(L.x_index(j), 3) = xj;
      z(L.v_index(j)) = v;
    }
  } else {
    const Eigen::VectorXd traj = detail::midpoint_simulate(*ocp, window.mesh, x0c, u_ws, u_ws, 0.5);
    z.head(3 * (N + 1)) = traj;
    for (int j = 1; j <= N; ++j) z(L.v_index(j)) = 0.5;
  }
  for (int j = 1; j <= N; ++j) {
    z.segment(L.u0_index(j), 3) = u_ws;
    z.segment(L.u1_index(j), 3) = u_ws;
  }
  // keep the warm start inside the box
  z = z.cwiseMax(P.nlp.lower).cwiseMin(P.nlp.upper);
  P.warm_start = z;
  return P;
}

}  // namespace eocp

#endif  // EOCP_TRANSCRIPTION_HPP_
