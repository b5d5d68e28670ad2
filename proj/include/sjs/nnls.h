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

#ifndef SJSLAB_SJS_NNLS_H_
#define SJSLAB_SJS_NNLS_H_

#include <cstddef>

#include <Eigen/Dense>

namespace sjs {

struct NnlsResult {
  Eigen::VectorXd x;
  // ||A x - b||^2
  double residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

// min ||A x - b||_2 subject to x >= 0, by the Lawson-Hanson active-set
// method. Intended for the small dense systems of the per-cell estimators.
NnlsResult SolveNnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                     std::size_t max_iterations = 0);

}  // namespace sjs

#endif  // SJSLAB_SJS_NNLS_H_
