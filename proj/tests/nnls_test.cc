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

#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "sjs/random.h"

namespace sjs {
namespace {

// Best objective over every support set, solving the unconstrained least
// squares on each and keeping non-negative solutions.
double BruteForceObjective(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const Eigen::Index n = a.cols();
  double best = b.squaredNorm();
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (mask & (1u << j)) cols.push_back(j);
    }
    Eigen::MatrixXd sub(a.rows(), cols.size());
    for (std::size_t k = 0; k < cols.size(); ++k) sub.col(k) = a.col(cols[k]);
    const Eigen::VectorXd x = sub.completeOrthogonalDecomposition().solve(b);
    if (x.minCoeff() < 0.0) continue;
    best = std::min(best, (sub * x - b).squaredNorm());
  }
  return best;
}

Eigen::MatrixXd RandomMatrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.Uniform(-1.0, 1.0);
  }
  return m;
}

TEST(NnlsTest, ExactNonNegativeSolution) {
  Eigen::MatrixXd a(3, 2);
  a << 1, 0, 0, 1, 1, 1;
  Eigen::VectorXd b(3);
  b << 2, 3, 5;
  const auto r = SolveNnls(a, b);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x(0), 2.0, 1e-14);
  EXPECT_NEAR(r.x(1), 3.0, 1e-14);
  EXPECT_NEAR(r.residual, 0.0, 1e-24);
}

TEST(NnlsTest, ClampsNegativeDirection) {
  // Unconstrained optimum is (1, -1); constrained optimum sets x1 = 0.
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd b(2);
  b << 1, -1;
  const auto r = SolveNnls(a, b);
  EXPECT_NEAR(r.x(0), 1.0, 1e-15);
  EXPECT_EQ(r.x(1), 0.0);
  EXPECT_NEAR(r.residual, 1.0, 1e-15);
}

TEST(NnlsTest, ZeroRightHandSide) {
  Rng rng(3);
  const auto a = RandomMatrix(rng, 4, 3);
  const auto r = SolveNnls(a, Eigen::VectorXd::Zero(4));
  EXPECT_EQ(r.x.norm(), 0.0);
  EXPECT_EQ(r.residual, 0.0);
}

TEST(NnlsTest, RejectsShapeMismatch) {
  EXPECT_ANY_THROW(SolveNnls(Eigen::MatrixXd::Identity(3, 2), Eigen::VectorXd::Zero(2)));
}

TEST(NnlsTest, KktAndBruteForceOnRandomSystems) {
  Rng rng(2026);
  for (int trial = 0; trial < 300; ++trial) {
    const Eigen::Index rows = 1 + static_cast<Eigen::Index>(rng.Index(6));
    const Eigen::Index cols = 1 + static_cast<Eigen::Index>(rng.Index(4));
    const auto a = RandomMatrix(rng, rows, cols);
    Eigen::VectorXd b(rows);
    for (Eigen::Index i = 0; i < rows; ++i) b(i) = rng.Uniform(-1.0, 1.0);
    const auto r = SolveNnls(a, b);
    ASSERT_TRUE(r.converged) << trial;
    ASSERT_GE(r.x.minCoeff(), 0.0) << trial;
    EXPECT_NEAR(r.residual, (a * r.x - b).squaredNorm(), 1e-12) << trial;
    // KKT: gradient non-negative, complementary with x.
    const Eigen::VectorXd g = a.transpose() * (a * r.x - b);
    for (Eigen::Index j = 0; j < cols; ++j) {
      EXPECT_GE(g(j), -1e-10) << trial;
      EXPECT_NEAR(g(j) * r.x(j), 0.0, 1e-10) << trial;
    }
    EXPECT_NEAR(r.residual, BruteForceObjective(a, b), 1e-10) << trial;
  }
}

}  // namespace
}  // namespace sjs
