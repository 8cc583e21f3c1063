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

#ifndef EOCP_NLP_HPP_
#define EOCP_NLP_HPP_

#include <Eigen/Core>
#include <functional>
#include <stdexcept>

namespace eocp {

/// Box-constrained NLP with equality constraints, the shape the SQP solver
/// consumes:
///   min f(z)  s.t.  c(z) = 0,  lower <= z <= upper.
/// Evaluators must be pure. Gradients/Jacobians are analytic; passing a
/// nullptr output skips the derivative work.
struct Nlp {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  int n_eq = 0;

  /// f(z); writes the gradient when grad != nullptr.
  std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)> objective;
  /// c(z) into residual; writes the Jacobian when jac != nullptr.
  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd*)> equalities;
  /// Optional positive-semidefinite curvature model of the objective
  /// (Gauss-Newton). When present the solver uses it instead of building the
  /// Hessian by BFGS; stiff quadratic penalties make BFGS crawl otherwise.
  std::function<void(const Eigen::VectorXd&, Eigen::MatrixXd&)> objective_curvature;

  int n() const { return static_cast<int>(lower.size()); }

  void check_shape() const {
    if (lower.size() != upper.size()) throw std::invalid_argument("Nlp: bound size mismatch");
    if (!objective) throw std::invalid_argument("Nlp: missing objective");
    if (n_eq > 0 && !equalities) throw std::invalid_argument("Nlp: missing equality evaluator");
  }
};

}  // namespace eocp

#endif  // EOCP_NLP_HPP_
