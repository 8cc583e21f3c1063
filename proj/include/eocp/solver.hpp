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

#ifndef EOCP_SOLVER_HPP_
#define EOCP_SOLVER_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "eocp/nlp.hpp"

namespace eocp {

struct SolverConfig {
  double kkt_tol = 1e-6;
  int max_iter = 200;
  double merit_growth = 2.0;      ///< penalty growth factor for the l1 merit
  double ls_backtrack = 0.5;      ///< backtracking ratio of the line search
  double hess_reg_floor = 1e-8;   ///< minimum eigenvalue target after damping
  int qp_max_iter = 0;            ///< 0 -> automatic (scales with problem size)
  bool log_iterations = false;
};

enum class SolveStatus { Optimal, MaxIter, LineSearchFailure, Infeasible };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::MaxIter: return "max_iter";
    case SolveStatus::LineSearchFailure: return "line_search_failure";
    case SolveStatus::Infeasible: return "infeasible";
  }
  return "?";
}

struct IterationRecord {
  int iter = 0;
  double objective = 0.0;
  double kkt = 0.0;
  double step_norm = 0.0;
  double merit_penalty = 0.0;
  double alpha = 0.0;
  double feasibility = 0.0;
};

struct SolverResult {
  Eigen::VectorXd z;
  double objective = 0.0;
  double kkt = std::numeric_limits<double>::infinity();
  int iterations = 0;
  SolveStatus status = SolveStatus::MaxIter;
  Eigen::VectorXd eq_multipliers;     ///< lambda for c(z) = 0
  Eigen::VectorXd bound_multipliers;  ///< nu; > 0 at lower bounds, < 0 at upper
  std::vector<IterationRecord> trace; ///< filled when log_iterations is set
};

/// Result of one QP subproblem
///   min 1/2 d'Hd + g'd  s.t.  A d = b,  lo <= d <= hi.
struct QpResult {
  Eigen::VectorXd step;
  Eigen::VectorXd eq_lambda;
  Eigen::VectorXd bound_mult;
  bool feasible = true;
  int iterations = 0;
};

namespace detail {

/// Equality-constrained step on the free variables of the working set.
/// Solves [H_ff A_f'; A_f 0] [p; -lambda] = [-(g + H d)_f; 0] and reports
/// lambda. Variables in `fixed` stay put.
inline bool eqp_step(const Eigen::MatrixXd& H, const Eigen::VectorXd& grad_at_d,
                     const Eigen::MatrixXd& A, const std::vector<bool>& fixed,
                     Eigen::VectorXd& p, Eigen::VectorXd& lambda) {
  const int n = static_cast<int>(H.rows());
  const int m = static_cast<int>(A.rows());
  std::vector<int> free_idx;
  free_idx.reserve(n);
  for (int i = 0; i < n; ++i) {
    if (!fixed[static_cast<std::size_t>(i)]) free_idx.push_back(i);
  }
  const int nf = static_cast<int>(free_idx.size());
  p = Eigen::VectorXd::Zero(n);
  if (nf == 0) {
    // all variables pinned; lambda from least squares on A' lambda = -grad
    if (m > 0) {
      lambda = A.transpose()
                   .colPivHouseholderQr()
                   .solve(-grad_at_d);
    } else {
      lambda.resize(0);
    }
    return true;
  }
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nf + m, nf + m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf + m);
  for (int a = 0; a < nf; ++a) {
    for (int b = 0; b < nf; ++b) K(a, b) = H(free_idx[a], free_idx[b]);
    rhs(a) = -grad_at_d(free_idx[a]);
    for (int r = 0; r < m; ++r) {
      K(nf + r, a) = A(r, free_idx[a]);
      K(a, nf + r) = A(r, free_idx[a]);
    }
  }
  Eigen::VectorXd sol = K.partialPivLu().solve(rhs);
  const double resid = (K * sol - rhs).lpNorm<Eigen::Infinity>();
  if (!sol.allFinite() || resid > 1e-8 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) {
    // rank-deficient working set: fall back to a least-squares KKT solve
    sol = K.colPivHouseholderQr().solve(rhs);
    if (!sol.allFinite()) {
      p.setZero();
      lambda = Eigen::VectorXd::Zero(m);
      return false;
    }
  }
  for (int a = 0; a < nf; ++a) p(free_idx[a]) = sol(a);
  lambda = sol.tail(m);
  return true;
}

}  // namespace detail

/// Primal active-set method for the convex QP with equality constraints and
/// box bounds. H must be positive definite (the SQP keeps it that way).
/// When the equalities admit no point inside the box, `feasible` is false and
/// the step minimizes ||A d - b||^2 over the box instead.
inline QpResult qp_subsolve(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                            const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                            const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                            int max_iter = 0) {
  const int n = static_cast<int>(H.rows());
  const int m = static_cast<int>(A.rows());
  if (max_iter <= 0) max_iter = 150 + 2 * n;
  constexpr double kStepTol = 1e-12;
  constexpr double kBoundTol = 1e-12;
  // multiplier tolerance relative to the gradient scale; an absolute one
  // makes the active set chase roundoff and cycle
  const double kMultTol = 1e-9 * (1.0 + g.lpNorm<Eigen::Infinity>());

  QpResult out;
  out.eq_lambda = Eigen::VectorXd::Zero(m);
  out.bound_mult = Eigen::VectorXd::Zero(n);

  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) d(i) = std::clamp(0.0, lo(i), hi(i));

  // Phase 1: reach A d = b inside the box by minimizing the residual norm.
  if (m > 0) {
    double resid = (A * d - b).norm();
    if (resid > 1e-12) {
      // least-norm equality solution first; often already inside the box
      Eigen::VectorXd dln = A.transpose() * (A * A.transpose())
                                                .ldlt()
                                                .solve(b);
      bool inside = true;
      for (int i = 0; i < n; ++i) {
        if (dln(i) < lo(i) - kBoundTol || dln(i) > hi(i) + kBoundTol) {
          inside = false;
          break;
        }
      }
      if (inside && dln.allFinite()) {
        d = dln;
        for (int i = 0; i < n; ++i) d(i) = std::clamp(d(i), lo(i), hi(i));
      } else {
        // box-constrained least squares via this same active-set machinery,
        // with H = A'A + reg and no equality rows
        const double reg = 1e-10 * std::max(1.0, A.squaredNorm());
        Eigen::MatrixXd Hf = A.transpose() * A + reg * Eigen::MatrixXd::Identity(n, n);
        Eigen::VectorXd gf = -A.transpose() * b;
        QpResult ls = qp_subsolve(Hf, gf, Eigen::MatrixXd(0, n), Eigen::VectorXd(0), lo, hi,
                                  max_iter);
        d = ls.step;
      }
      resid = (A * d - b).norm();
      if (resid > 1e-8 * std::max(1.0, b.norm())) {
        out.feasible = false;
        out.step = d;
        return out;
      }
    }
  }

  // Phase 2: active set on the bounds, equalities always enforced.
  std::vector<bool> at_lo(static_cast<std::size_t>(n), false);
  std::vector<bool> at_hi(static_cast<std::size_t>(n), false);
  std::vector<bool> fixed(static_cast<std::size_t>(n), false);
  for (int i = 0; i < n; ++i) {
    const std::size_t si = static_cast<std::size_t>(i);
    if (hi(i) - lo(i) <= kBoundTol || d(i) <= lo(i) + kBoundTol) {
      at_lo[si] = true;
      fixed[si] = true;
    } else if (d(i) >= hi(i) - kBoundTol) {
      at_hi[si] = true;
      fixed[si] = true;
    }
  }

  Eigen::VectorXd p, lambda;
  int degenerate_steps = 0;

  auto finish = [&](const Eigen::VectorXd& grad_at_d) {
    Eigen::VectorXd nu = grad_at_d;
    if (m > 0) nu += A.transpose() * lambda;
    out.step = d;
    out.eq_lambda = lambda;  // convention: g + Hd + A' lambda - nu = 0
    for (int i = 0; i < n; ++i) {
      if (fixed[static_cast<std::size_t>(i)]) out.bound_mult(i) = nu(i);
    }
  };

  for (int it = 0; it < max_iter; ++it) {
    out.iterations = it + 1;
    const Eigen::VectorXd grad_at_d = g + H * d;
    detail::eqp_step(H, grad_at_d, A, fixed, p, lambda);

    if (p.lpNorm<Eigen::Infinity>() < kStepTol || degenerate_steps > n + 2) {
      // check multipliers of the active bounds
      Eigen::VectorXd nu = grad_at_d;
      if (m > 0) nu += A.transpose() * lambda;
      int worst = -1;
      double worst_viol = kMultTol;
      for (int i = 0; i < n; ++i) {
        const std::size_t si = static_cast<std::size_t>(i);
        if (!fixed[si]) continue;
        if (hi(i) - lo(i) <= kBoundTol) continue;  // pinned variable, keep
        // want nu_i >= 0 at a lower bound, nu_i <= 0 at an upper bound
        const double viol = at_lo[si] ? -nu(i) : nu(i);
        if (viol > worst_viol) {
          worst_viol = viol;
          worst = i;
        }
      }
      if (worst < 0 || degenerate_steps > n + 2) {
        finish(grad_at_d);
        return out;
      }
      const std::size_t sw = static_cast<std::size_t>(worst);
      fixed[sw] = at_lo[sw] = at_hi[sw] = false;
      continue;
    }

    // longest step inside the box along p
    double alpha = 1.0;
    int blocking = -1;
    bool blocking_hi = false;
    for (int i = 0; i < n; ++i) {
      if (fixed[static_cast<std::size_t>(i)] || p(i) == 0.0) continue;
      if (p(i) > 0.0 && std::isfinite(hi(i))) {
        const double a = (hi(i) - d(i)) / p(i);
        if (a < alpha) {
          alpha = a;
          blocking = i;
          blocking_hi = true;
        }
      } else if (p(i) < 0.0 && std::isfinite(lo(i))) {
        const double a = (lo(i) - d(i)) / p(i);
        if (a < alpha) {
          alpha = a;
          blocking = i;
          blocking_hi = false;
        }
      }
    }
    alpha = std::max(alpha, 0.0);
    degenerate_steps = alpha < 1e-14 ? degenerate_steps + 1 : 0;
    d += alpha * p;
    if (blocking >= 0 && alpha < 1.0) {
      const std::size_t sb = static_cast<std::size_t>(blocking);
      d(blocking) = blocking_hi ? hi(blocking) : lo(blocking);
      fixed[sb] = true;
      at_hi[sb] = blocking_hi;
      at_lo[sb] = !blocking_hi;
    }
  }

  // iteration cap reached; return the current (feasible) point
  const Eigen::VectorXd grad_at_d = g + H * d;
  detail::eqp_step(H, grad_at_d, A, fixed, p, lambda);
  finish(grad_at_d);
  return out;
}

/// Max of the stationarity, primal feasibility, and complementarity
/// infinity-norms at (z, multipliers).
inline double kkt_residual(const Nlp& nlp, const Eigen::VectorXd& z,
                           const Eigen::VectorXd& eq_lambda,
                           const Eigen::VectorXd& bound_mult) {
  Eigen::VectorXd grad(z.size());
  nlp.objective(z, &grad);
  Eigen::VectorXd stat = grad;
  double feas = 0.0;
  if (nlp.n_eq > 0) {
    Eigen::VectorXd c;
    Eigen::MatrixXd J;
    nlp.equalities(z, c, &J);
    if (eq_lambda.size() == c.size()) stat += J.transpose() * eq_lambda;
    feas = c.lpNorm<Eigen::Infinity>();
  }
  double comp = 0.0;
  for (int i = 0; i < z.size(); ++i) {
    feas = std::max({feas, nlp.lower(i) - z(i), z(i) - nlp.upper(i)});
    if (bound_mult.size() == z.size() && bound_mult(i) != 0.0) {
      stat(i) -= bound_mult(i);
      const double gap = bound_mult(i) > 0.0 ? z(i) - nlp.lower(i) : nlp.upper(i) - z(i);
      comp = std::max(comp, std::abs(bound_mult(i) * gap));
    }
  }
  return std::max({stat.lpNorm<Eigen::Infinity>(), feas, comp});
}

namespace detail {

/// Best-case KKT residual of a feasible point: least-squares equality
/// multipliers on the inactive rows, sign-projected bound multipliers on the
/// active ones. Certifies optimality even when the QP's vertex multipliers
/// are degenerate.
struct CertifiedKkt {
  double residual = std::numeric_limits<double>::infinity();
  Eigen::VectorXd eq_lambda;
  Eigen::VectorXd bound_mult;
};

inline CertifiedKkt certify_kkt(const Nlp& nlp, const Eigen::VectorXd& z,
                                const Eigen::VectorXd& grad, const Eigen::VectorXd& c,
                                const Eigen::MatrixXd& J) {
  const int n = nlp.n();
  const int m = nlp.n_eq;
  CertifiedKkt out;
  out.bound_mult = Eigen::VectorXd::Zero(n);

  std::vector<int> free_rows;
  free_rows.reserve(static_cast<std::size_t>(n));
  std::vector<int> kind(static_cast<std::size_t>(n), 0);  // 0 free, 1 at lo, 2 at hi, 3 pinned
  for (int i = 0; i < n; ++i) {
    const double tol = 1e-9 * (1.0 + std::abs(z(i)));
    const bool at_lo = z(i) - nlp.lower(i) <= tol;
    const bool at_hi = nlp.upper(i) - z(i) <= tol;
    if (at_lo && at_hi) {
      kind[static_cast<std::size_t>(i)] = 3;
    } else if (at_lo) {
      kind[static_cast<std::size_t>(i)] = 1;
    } else if (at_hi) {
      kind[static_cast<std::size_t>(i)] = 2;
    } else {
      free_rows.push_back(i);
    }
  }

  if (m > 0) {
    Eigen::MatrixXd Jf(static_cast<int>(free_rows.size()), m);
    Eigen::VectorXd gf(static_cast<int>(free_rows.size()));
    for (std::size_t r = 0; r < free_rows.size(); ++r) {
      Jf.row(static_cast<int>(r)) = J.col(free_rows[r]).transpose();
      gf(static_cast<int>(r)) = grad(free_rows[r]);
    }
    out.eq_lambda = free_rows.empty()
                        ? Eigen::VectorXd::Zero(m)
                        : Eigen::VectorXd(Jf.colPivHouseholderQr().solve(-gf));
  } else {
    out.eq_lambda.resize(0);
  }

  Eigen::VectorXd stat = grad;
  if (m > 0) stat += J.transpose() * out.eq_lambda;
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    switch (kind[static_cast<std::size_t>(i)]) {
      case 0:
        worst = std::max(worst, std::abs(stat(i)));
        break;
      case 1:  // lower active: need nu >= 0
        if (stat(i) >= 0.0) {
          out.bound_mult(i) = stat(i);
        } else {
          worst = std::max(worst, -stat(i));
        }
        break;
      case 2:  // upper active: need nu <= 0
        if (stat(i) <= 0.0) {
          out.bound_mult(i) = stat(i);
        } else {
          worst = std::max(worst, stat(i));
        }
        break;
      default:  // pinned: multiplier free
        out.bound_mult(i) = stat(i);
        break;
    }
  }
  double feas = m > 0 ? c.lpNorm<Eigen::Infinity>() : 0.0;
  for (int i = 0; i < n; ++i) {
    feas = std::max({feas, nlp.lower(i) - z(i), z(i) - nlp.upper(i)});
  }
  out.residual = std::max(worst, feas);
  return out;
}

}  // namespace detail

/// Sequential quadratic programming with a damped-BFGS Lagrangian Hessian,
/// an active-set QP subproblem, and an l1-merit backtracking line search.
/// Never throws on non-convergence; the status field reports the outcome.
inline SolverResult solve(const Nlp& nlp, const SolverConfig& cfg, Eigen::VectorXd z) {
  nlp.check_shape();
  const int n = nlp.n();
  const int m = nlp.n_eq;

  for (int i = 0; i < n; ++i) z(i) = std::clamp(z(i), nlp.lower(i), nlp.upper(i));

  SolverResult res;
  res.eq_multipliers = Eigen::VectorXd::Zero(m);
  res.bound_multipliers = Eigen::VectorXd::Zero(n);

  const bool have_curvature = static_cast<bool>(nlp.objective_curvature);
  auto model_hessian = [&](const Eigen::VectorXd& at) {
    Eigen::MatrixXd Hm;
    nlp.objective_curvature(at, Hm);
    // a small absolute ridge: large enough for a definite QP, small enough
    // that flat directions (relaxed mode variables) keep Newton-length steps
    Hm += std::max(cfg.hess_reg_floor, 1e-4) * Eigen::MatrixXd::Identity(n, n);
    return Hm;
  };

  // Exact Lagrangian curvature by differencing the analytic derivatives,
  // clipped to positive definite. The Gauss-Newton model omits the
  // constraint curvature, which stalls the last digits; this polishes them.
  auto exact_hessian = [&](const Eigen::VectorXd& at, const Eigen::VectorXd& lam) {
    Eigen::MatrixXd Hx(n, n);
    Eigen::VectorXd gp(n), gm(n), cdum;
    Eigen::MatrixXd Jp, Jm;
    for (int i = 0; i < n; ++i) {
      const double hstep = 1e-6 * std::max(1.0, std::abs(at(i)));
      Eigen::VectorXd zp = at, zm = at;
      zp(i) += hstep;
      zm(i) -= hstep;
      nlp.objective(zp, &gp);
      nlp.objective(zm, &gm);
      if (m > 0 && lam.size() == m) {
        nlp.equalities(zp, cdum, &Jp);
        nlp.equalities(zm, cdum, &Jm);
        gp += Jp.transpose() * lam;
        gm += Jm.transpose() * lam;
      }
      Hx.col(i) = (gp - gm) / (2.0 * hstep);
    }
    Hx = 0.5 * (Hx + Hx.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Hx);
    const double floor_ev = std::max(cfg.hess_reg_floor, 1e-4);
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(floor_ev);
    return Eigen::MatrixXd(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
  };

  Eigen::MatrixXd H =
      have_curvature ? model_hessian(z) : Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd grad(n), c(m);
  Eigen::MatrixXd J(m, n);
  double f = nlp.objective(z, &grad);
  if (m > 0) nlp.equalities(z, c, &J);

  double mu = 1.0;  // merit penalty
  bool first_update = true;
  bool polish = true;   // exact-Hessian polishing allowed near the solution
  double ridge = 0.0;   // Levenberg-style step damping for the model Hessian
  const double alpha_min = 1e-12;

  auto merit = [&](double fv, const Eigen::VectorXd& cv) {
    return fv + (m > 0 ? mu * cv.lpNorm<1>() : 0.0);
  };

  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    res.iterations = iter;

    // convergence check with the multipliers of the previous step; when
    // feasible, fall back to certified least-squares multipliers (the QP's
    // vertex multipliers can be degenerate)
    res.kkt = kkt_residual(nlp, z, res.eq_multipliers, res.bound_multipliers);
    const double feas_now = m > 0 ? c.lpNorm<Eigen::Infinity>() : 0.0;
    if (feas_now <= std::max(cfg.kkt_tol, 1e-9)) {
      if (res.kkt > cfg.kkt_tol) {
        const detail::CertifiedKkt cert = detail::certify_kkt(nlp, z, grad, c, J.topRows(m));
        if (cert.residual < res.kkt) {
          res.kkt = cert.residual;
          res.eq_multipliers = cert.eq_lambda;
          res.bound_multipliers = cert.bound_mult;
        }
      }
      if (res.kkt <= cfg.kkt_tol) {
        res.status = SolveStatus::Optimal;
        res.z = z;
        res.objective = f;
        return res;
      }
    }

    Eigen::MatrixXd H_step = H;
    if (ridge > 0.0) {
      H_step += ridge * (1.0 + H.diagonal().cwiseAbs().maxCoeff()) *
                Eigen::MatrixXd::Identity(n, n);
    }
    QpResult qp = qp_subsolve(H_step, grad, J.topRows(m),
                              m > 0 ? Eigen::VectorXd(-c) : Eigen::VectorXd(),
                              nlp.lower - z, nlp.upper - z, cfg.qp_max_iter);
    Eigen::VectorXd d = qp.step;
    bool restoration = false;
    if (!qp.feasible) {
      // feasibility restoration: minimize ||J d + c||^2 within the box
      restoration = true;
      const double reg = 1e-8 * std::max(1.0, J.squaredNorm());
      Eigen::MatrixXd Hr = J.transpose() * J + reg * Eigen::MatrixXd::Identity(n, n);
      Eigen::VectorXd gr = J.transpose() * c;
      QpResult rest = qp_subsolve(Hr, gr, Eigen::MatrixXd(0, n), Eigen::VectorXd(0),
                                  nlp.lower - z, nlp.upper - z, cfg.qp_max_iter);
      d = rest.step;
      if (d.lpNorm<Eigen::Infinity>() < 1e-14) {
        res.status = SolveStatus::Infeasible;
        res.z = z;
        res.objective = f;
        return res;
      }
    } else {
      res.eq_multipliers = qp.eq_lambda;
      res.bound_multipliers = qp.bound_mult;
      // re-test convergence with the fresh multipliers of this QP
      const double kkt_now = kkt_residual(nlp, z, qp.eq_lambda, qp.bound_mult);
      if (kkt_now <= cfg.kkt_tol &&
          (m == 0 || c.lpNorm<Eigen::Infinity>() <= std::max(cfg.kkt_tol, 1e-9))) {
        res.status = SolveStatus::Optimal;
        res.z = z;
        res.objective = f;
        res.kkt = kkt_now;
        return res;
      }
    }

    // keep the merit penalty just above the QP multipliers: raise it fast,
    // and let it decay again so an early spike cannot throttle later steps
    if (m > 0 && qp.feasible) {
      const double lam_inf = qp.eq_lambda.lpNorm<Eigen::Infinity>();
      if (mu < 1.1 * lam_inf) {
        mu = cfg.merit_growth * lam_inf + 1e-6;
      } else {
        mu = std::max(1.2 * lam_inf + 1e-6, 0.5 * mu);
      }
    }

    const double phi0 = merit(f, c);
    // directional derivative bound of the l1 merit along d
    double ddir = grad.dot(d);
    if (m > 0) ddir -= mu * c.lpNorm<1>();

    double alpha = 1.0;
    double f_new = f;
    Eigen::VectorXd z_new, c_new(m);
    bool accepted = false;
    bool tried_correction = false;
    while (alpha > alpha_min) {
      z_new = z + alpha * d;
      for (int i = 0; i < n; ++i) z_new(i) = std::clamp(z_new(i), nlp.lower(i), nlp.upper(i));
      f_new = nlp.objective(z_new, nullptr);
      if (m > 0) nlp.equalities(z_new, c_new, nullptr);
      bool ok;
      if (restoration) {
        // restoration steps only need to make progress on feasibility
        ok = std::isfinite(f_new) && c_new.lpNorm<1>() <= (1.0 - 1e-4 * alpha) * c.lpNorm<1>();
      } else {
        const double phi_new = merit(f_new, c_new);
        ok = std::isfinite(phi_new) && phi_new <= phi0 + 1e-4 * alpha * ddir;
      }
      if (!ok && !tried_correction && !restoration && m > 0 && alpha == 1.0 &&
          c.lpNorm<Eigen::Infinity>() < 1e-3) {
        // second-order correction: project the trial point back onto the
        // constraint manifold so the quadratic violation growth cannot
        // reject a good full step (Maratos effect)
        tried_correction = true;
        const auto JJt_fac = Eigen::MatrixXd(J * J.transpose()).ldlt();
        Eigen::VectorXd z_soc = z_new;
        Eigen::VectorXd c_soc = c_new;
        bool finite = true;
        for (int round = 0; round < 3 && c_soc.lpNorm<1>() > 1e-12; ++round) {
          const Eigen::VectorXd dc = J.transpose() * JJt_fac.solve(-c_soc);
          if (!dc.allFinite()) {
            finite = false;
            break;
          }
          z_soc += dc;
          for (int i = 0; i < n; ++i) {
            z_soc(i) = std::clamp(z_soc(i), nlp.lower(i), nlp.upper(i));
          }
          nlp.equalities(z_soc, c_soc, nullptr);
        }
        if (finite) {
          const double f_soc = nlp.objective(z_soc, nullptr);
          const double phi_soc = merit(f_soc, c_soc);
          if (std::isfinite(phi_soc) && phi_soc <= phi0 + 1e-4 * ddir) {
            z_new = z_soc;
            f_new = f_soc;
            c_new = c_soc;
            ok = true;
          }
        }
      }
      if (ok) {
        accepted = true;
        break;
      }
      alpha *= cfg.ls_backtrack;
    }
    // adapt the damping to the achieved step: backtracking means the
    // quadratic model overreaches, full steps mean it can relax
    if (have_curvature) {
      if (accepted && alpha < 0.5) {
        ridge = std::min(1e6, std::max(4.0 * ridge, 1e-4));
      } else if (accepted && alpha == 1.0) {
        ridge = ridge > 1e-8 ? 0.5 * ridge : 0.0;
      }
    }
    if (!accepted) {
      if (have_curvature) {
        if (polish) {
          polish = false;  // the polished Hessian misbehaved; stay on Gauss-Newton
          H = model_hessian(z);
          continue;
        }
        if (ridge < 1e5) {
          // trust-region style rescue: damp the model hard and retry
          ridge = std::max(16.0 * ridge, 1e-2);
          continue;
        }
      } else if (!H.isIdentity(1e-12)) {
        H.setIdentity();
        first_update = true;
        continue;
      }
      res.status = SolveStatus::LineSearchFailure;
      res.z = z;
      res.objective = f;
      res.kkt = kkt_residual(nlp, z, res.eq_multipliers, res.bound_multipliers);
      return res;
    }

    // refresh derivatives at the accepted point
    Eigen::VectorXd grad_new(n);
    const double f_eval = nlp.objective(z_new, &grad_new);
    Eigen::MatrixXd J_new(m, n);
    if (m > 0) nlp.equalities(z_new, c_new, &J_new);

    if (have_curvature) {
      // near the solution switch from Gauss-Newton to the polished Hessian
      H = (polish && res.kkt < 1e-2 && m > 0) ? exact_hessian(z_new, res.eq_multipliers)
                                              : model_hessian(z_new);
    } else {
      // damped BFGS on the Lagrangian gradient
      Eigen::VectorXd gl_old = grad;
      Eigen::VectorXd gl_new = grad_new;
      if (m > 0) {
        gl_old += J.transpose() * res.eq_multipliers;
        gl_new += J_new.transpose() * res.eq_multipliers;
      }
      const Eigen::VectorXd s = z_new - z;
      Eigen::VectorXd y = gl_new - gl_old;
      if (first_update && s.dot(y) > 0.0) {
        // Shanno-Phua sizing of the initial Hessian
        const double sigma = y.squaredNorm() / s.dot(y);
        if (std::isfinite(sigma) && sigma > cfg.hess_reg_floor) H *= sigma;
        first_update = false;
      }
      const double sHs = s.dot(H * s);
      const double sy = s.dot(y);
      if (s.lpNorm<Eigen::Infinity>() > 1e-14 && sHs > 0.0) {
        // Powell damping keeps the update positive definite
        if (sy < 0.2 * sHs) {
          const double theta = 0.8 * sHs / (sHs - sy);
          y = theta * y + (1.0 - theta) * (H * s);
        }
        const double sy_d = s.dot(y);
        if (sy_d > cfg.hess_reg_floor * s.squaredNorm()) {
          const Eigen::VectorXd Hs = H * s;
          H += (y * y.transpose()) / sy_d - (Hs * Hs.transpose()) / sHs;
          H = 0.5 * (H + H.transpose());
        } else {
          H.setIdentity();
          first_update = true;
        }
      }
    }

    z = z_new;
    f = f_eval;
    grad = grad_new;
    if (m > 0) {
      c = c_new;
      J = J_new;
    }

    if (cfg.log_iterations) {
      res.trace.push_back({iter, f, res.kkt, alpha * d.norm(), mu, alpha,
                           m > 0 ? c.lpNorm<Eigen::Infinity>() : 0.0});
    }
  }

  res.status = SolveStatus::MaxIter;
  res.iterations = cfg.max_iter;
  res.z = z;
  res.objective = f;
  res.kkt = kkt_residual(nlp, z, res.eq_multipliers, res.bound_multipliers);
  return res;
}

}  // namespace eocp

#endif  // EOCP_SOLVER_HPP_
