/*
 * Copyright 2026 The sjslab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "sjs/nnls.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sjs/error.h"

namespace sjs {
namespace {

// Least squares on the passive columns; zero elsewhere.
Eigen::VectorXd SolvePassive(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                             const std::vector<bool>& passive) {
  std::vector<Eigen::Index> cols;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    if (passive[j]) cols.push_back(j);
  }
  if (cols.empty()) return Eigen::VectorXd::Zero(a.cols());
  Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) sub.col(k) = a.col(cols[k]);
  const Eigen::VectorXd s = sub.colPivHouseholderQr().solve(b);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(a.cols());
  for (std::size_t k = 0; k < cols.size(); ++k) out(cols[k]) = s(k);
  return out;
}

}  // namespace

NnlsResult SolveNnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                     std::size_t max_iterations) {
  if (a.rows() != b.size()) {
    throw InvalidArgument("SolveNnls: A and b have incompatible shapes");
  }
  const Eigen::Index n = a.cols();
  if (max_iterations == 0) max_iterations = 3 * static_cast<std::size_t>(n) + 10;
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() *
                     std::max<double>(a.rows(), n) *
                     std::max(1.0, a.cwiseAbs().colwise().sum().maxCoeff());

  NnlsResult result;
  result.x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(n, false);
  Eigen::VectorXd w = a.transpose() * (b - a * result.x);

  while (result.iterations < max_iterations) {
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[j] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    }
    if (best < 0) {
      result.converged = true;
      break;
    }
    passive[best] = true;
    ++result.iterations;

    Eigen::VectorXd s = SolvePassive(a, b, passive);
    // Inner loop: step back toward the feasible region while some passive
    // coefficient is non-positive.
    while (true) {
      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && s(j) <= 0.0) {
          alpha = std::min(alpha, result.x(j) / (result.x(j) - s(j)));
        }
      }
      if (!std::isfinite(alpha)) break;
      result.x += alpha * (s - result.x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && result.x(j) <= tol) {
          passive[j] = false;
          result.x(j) = 0.0;
        }
      }
      s = SolvePassive(a, b, passive);
    }
    result.x = s;
    w = a.transpose() * (b - a * result.x);
  }
  result.residual = (a * result.x - b).squaredNorm();
  return result;
}

}  // namespace sjs
