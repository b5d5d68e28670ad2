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

#include "sjs/shift_analysis.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "sjs/error.h"
#include "sjs/random.h"
#include "test_util.h"

namespace sjs {
namespace {

using namespace sjs::testing;

FeaturePartition X1(const FeatureSpace& space) {
  return FeaturePartition::FromFeatureNames(space, {"X1"});
}

TEST(CheckSjsTest, WorkedExample) {
  const auto p = WorkedP();
  const auto q = WorkedQ();
  EXPECT_TRUE(CheckSjs(p, q, X1(p.space())).holds);
  const auto trivial = CheckSjs(p, q, FeaturePartition::Trivial(p.space()));
  EXPECT_FALSE(trivial.holds);
  ASSERT_TRUE(trivial.witness.has_value());
  EXPECT_TRUE(trivial.witness->label.has_value());
  EXPECT_TRUE(trivial.witness->feature_cell.has_value());
}

TEST(CheckSjsTest, IdenticalDistributions) {
  Rng rng(1);
  const auto p = RandomJoint(rng, 3, 2, 3);
  const auto v = CheckSjs(p, p, RandomPartition(rng, p.space()));
  EXPECT_TRUE(v.holds);
  EXPECT_EQ(v.max_violation, 0.0);
}

TEST(CheckSjsTest, MatchesDirectComparison) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = RandomJoint(rng, 3, 2, 2);
    const auto q = RandomJoint(rng, 3, 2, 2);
    const auto f = RandomPartition(rng, p.space());
    // Oracle: |Q_i[x | F_n] - P_i[x | F_n]| by enumeration.
    double worst = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t x = 0; x < p.num_cells(); ++x) {
        double pf = 0.0, qf = 0.0;
        for (std::size_t y : f.members(f.cell_of(x))) {
          pf += p.mass(y, i);
          qf += q.mass(y, i);
        }
        worst = std::max(worst, std::abs(q.mass(x, i) / qf - p.mass(x, i) / pf));
      }
    }
    const auto v = CheckSjs(p, q, f);
    EXPECT_NEAR(v.max_violation, worst, 1e-14);
    EXPECT_EQ(v.holds, worst <= v.tolerance);
  }
}

TEST(CheckSjsTest, AbsoluteContinuity) {
  FeatureSpace space({"a"}, {2});
  FiniteJointDistribution p(space, 2, {0.5, 0.5, 0.0, 0.0});
  FiniteJointDistribution q(space, 2, {0.25, 0.25, 0.25, 0.25});
  EXPECT_THROW(CheckSjs(p, q, FeaturePartition::Full(space)), AbsoluteContinuityViolated);
}

TEST(CheckPriorShiftTest, Cases) {
  const auto p = WorkedP();
  EXPECT_FALSE(CheckPriorShift(p, WorkedQ()).holds);
  EXPECT_TRUE(CheckPriorShift(p, p).holds);
  // Same class-conditionals, new priors.
  const auto shifted = ConditionallyIndependent(0.8, 0.4, 0.6, 0.6, 0.2);
  EXPECT_TRUE(CheckPriorShift(p, shifted).holds);
}

TEST(CheckCovariateShiftTest, WorkedExampleTables) {
  const auto p = WorkedP();
  const auto q = WorkedQ();
  const auto f = X1(p.space());
  const auto post = Posterior(p, f);
  EXPECT_NEAR(post.value(1, 1), 0.6, 1e-15);
  EXPECT_NEAR(post.value(0, 1), 0.4, 1e-15);
  // By hand from the stated tables: Q[X1=1|Y] = 1/2 for both labels, so
  // Q[Y=1|X1] = Q[Y=1] = 0.6 on both cells and the X1=0 cell deviates by 0.2.
  const double q_post_x1_0 = 0.6 * 0.5 / (0.6 * 0.5 + 0.4 * 0.5);
  const auto v = CheckCovariateShift(p, q, f);
  EXPECT_NEAR(v.max_violation, std::abs(q_post_x1_0 - 0.4), 1e-14);
  EXPECT_FALSE(v.holds);
  ASSERT_TRUE(v.witness.has_value());
  EXPECT_EQ(v.witness->partition_cell, 0u);
  // Full H: Q[Y=1|X1=0,X2=0] = 0.24/0.32 against P's 0.16/0.28.
  const auto full = CheckCovariateShift(p, q, FeaturePartition::Full(p.space()));
  EXPECT_NEAR(full.max_violation, 0.24 / 0.32 - 0.16 / 0.28, 1e-14);
}

TEST(CheckCovariateShiftTest, HoldsForFeatureReweighting) {
  Rng rng(12);
  const auto p = RandomJoint(rng, 2, 3, 3);
  const auto full = FeaturePartition::Full(p.space());
  std::vector<double> r(p.num_cells() * 3);
  for (std::size_t x = 0; x < p.num_cells(); ++x) {
    const double g = rng.Uniform(0.25, 4.0);
    for (std::size_t i = 0; i < 3; ++i) r[x * 3 + i] = g;
  }
  const auto q = ScaleByCells(p, full, r);
  EXPECT_TRUE(CheckCovariateShift(p, q, full).holds);
  EXPECT_TRUE(CheckCovariateShift(p, q, FeaturePartition::FromFeatures(p.space(), {0})).holds ==
              CheckCdi(p, q, FeaturePartition::FromFeatures(p.space(), {0})).holds);
}

TEST(CheckCovariateShiftTest, SquaredPosteriorFails) {
  const auto p = WorkedP();
  const auto q = SquaredPosteriorTarget(p, X1(p.space()), {1.0, 1.0});
  EXPECT_FALSE(CheckCovariateShift(p, q, FeaturePartition::Full(p.space())).holds);
}

TEST(CheckCdiTest, Cases) {
  const auto p = WorkedP();
  const auto f = X1(p.space());
  const auto q = SquaredPosteriorTarget(p, f, {0.7, 1.3});
  const auto v = CheckCdi(p, q, f);
  EXPECT_TRUE(v.holds);
  ASSERT_TRUE(v.alternate_violation.has_value());
  EXPECT_LE(*v.alternate_violation, 1e-9);
  EXPECT_TRUE(CheckCdi(p, p, f).holds);

  // Prior shift with class-dependent conditionals moves Q|H.
  const auto shifted = ConditionallyIndependent(0.8, 0.4, 0.6, 0.6, 0.2);
  const auto trivial = FeaturePartition::Trivial(p.space());
  const auto marginal_p = p.FeatureMarginal();
  const auto marginal_q = shifted.FeatureMarginal();
  double worst = 0.0;
  for (std::size_t x = 0; x < 4; ++x) worst = std::max(worst, std::abs(marginal_q[x] - marginal_p[x]));
  const auto fails = CheckCdi(p, shifted, trivial);
  EXPECT_FALSE(fails.holds);
  EXPECT_NEAR(fails.max_violation, worst, 1e-14);
}

TEST(CheckSufficiencyTest, Cases) {
  const auto p = WorkedP();
  EXPECT_TRUE(CheckSufficiency(p, FeaturePartition::Full(p.space())).holds);
  EXPECT_FALSE(CheckSufficiency(p, X1(p.space())).holds);
  const auto uninformative_x2 = ConditionallyIndependent(0.5, 0.4, 0.6, 0.5, 0.5);
  EXPECT_TRUE(CheckSufficiency(uninformative_x2, X1(p.space())).holds);
}

TEST(RankMatrixTest, ConstantStatisticsHaveRankOne) {
  Rng rng(3);
  const auto p = RandomJoint(rng, 2, 3, 3);
  const Statistics ones(3, std::vector<double>(p.num_cells(), 1.0));
  const auto r = RankMatrix(p, FeaturePartition::Trivial(p.space()), ones);
  EXPECT_EQ(r.per_cell_rank[0], 1u);
  EXPECT_FALSE(r.identifiable);
}

TEST(RankMatrixTest, PerfectClassifierGivesIdentity) {
  // Each feature cell carries a single label.
  FeatureSpace space({"a"}, {4});
  FiniteJointDistribution p(space, 2, {0.1, 0.0, 0.0, 0.2, 0.3, 0.0, 0.0, 0.4});
  const std::vector<std::size_t> assignment = {0, 1, 0, 1};
  const auto r = RankMatrix(p, FeaturePartition::Trivial(space),
                            ClassifierStatistics(assignment, 2));
  EXPECT_TRUE(r.identifiable);
  const auto& m = r.per_cell_matrices[0];
  EXPECT_NEAR(m[0], 1.0, 1e-15);
  EXPECT_NEAR(m[1], 0.0, 1e-15);
  EXPECT_NEAR(m[2], 0.0, 1e-15);
  EXPECT_NEAR(m[3], 1.0, 1e-15);
}

TEST(RankMatrixTest, MatchesEnumeration) {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const auto p = RandomJoint(rng, 2, 3, 3);
    const auto g = RandomPartition(rng, p.space());
    Statistics stats(3, std::vector<double>(p.num_cells()));
    for (auto& s : stats) for (double& v : s) v = rng.Uniform();
    const auto r = RankMatrix(p, g, stats);
    for (std::size_t n = 0; n < g.num_cells(); ++n) {
      for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
          double num = 0.0, den = 0.0;
          for (std::size_t x : g.members(n)) {
            num += stats[i][x] * p.mass(x, j);
            den += p.mass(x, j);
          }
          EXPECT_NEAR(r.per_cell_matrices[n][i * 3 + j], num / den, 1e-13);
        }
      }
    }
  }
}

TEST(RankMatrixTest, WorkedExampleMatchesVariance) {
  const auto p = WorkedP();
  const auto f = X1(p.space());
  const auto r = RankMatrix(p, f, PosteriorStatistics(p));
  const auto variance = ConditionalPosteriorVariance(p, f);
  const bool positive = std::all_of(variance.begin(), variance.end(),
                                    [](double v) { return v > 0.0; });
  EXPECT_TRUE(positive);
  EXPECT_EQ(r.identifiable, positive);
  EXPECT_TRUE(BinaryVarianceCriterion(p, f).holds);
}

TEST(BinaryVarianceCriterionTest, SufficientAndFullPartitionsFail) {
  const auto p = WorkedP();
  EXPECT_FALSE(BinaryVarianceCriterion(p, FeaturePartition::Full(p.space())).holds);
  const auto uninformative_x2 = ConditionallyIndependent(0.5, 0.4, 0.6, 0.5, 0.5);
  EXPECT_FALSE(BinaryVarianceCriterion(uninformative_x2, X1(p.space())).holds);
  Rng rng(1);
  const auto three = RandomJoint(rng, 2, 2, 3);
  EXPECT_THROW(BinaryVarianceCriterion(three, FeaturePartition::Trivial(three.space())),
               InvalidArgument);
}

TEST(VerifyTotalExpectationTest, RandomInstances) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    // 3 labels, 12 cells.
    FeatureSpace space({"a", "b"}, {3, 4});
    std::vector<double> w(36);
    for (double& v : w) v = rng.Uniform(0.01, 1.0);
    const auto p = FiniteJointDistribution::FromWeights(space, 3, w);
    const auto g = RandomPartition(rng, space);
    Statistics stats(3, std::vector<double>(12));
    for (auto& s : stats) for (double& v : s) v = rng.Uniform(0.0, 5.0);
    EXPECT_LT(VerifyTotalExpectation(p, g, stats), 1e-10);
  }
}

TEST(VerifyTotalExpectationTest, CellIndicators) {
  const auto p = WorkedP();
  const auto f = X1(p.space());
  Statistics stats(2, std::vector<double>(4, 0.0));
  for (std::size_t x = 0; x < 4; ++x) stats[f.cell_of(x)][x] = 1.0;
  EXPECT_LT(VerifyTotalExpectation(p, f, stats), 1e-15);
  const auto r = RankMatrix(p, f, stats);
  // Row n of the matrix on cell n is all ones, the other row zero.
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t j = 0; j < 2; ++j) {
        EXPECT_NEAR(r.per_cell_matrices[n][i * 2 + j], i == n ? 1.0 : 0.0, 1e-15);
      }
    }
  }
}

TEST(CheckTriangleTest, WorkedExample) {
  const auto p = WorkedP();
  const auto t = CheckTriangle(p, WorkedQ(), X1(p.space()));
  EXPECT_TRUE(t.sjs);
  // The stated tables move Q[X2 | X1] and the posteriors, see above.
  EXPECT_FALSE(t.cdi);
  EXPECT_FALSE(t.csh);
  EXPECT_TRUE(t.violations.empty());
}

TEST(CheckTriangleTest, SquaredPosterior) {
  const auto p = WorkedP();
  const auto f = X1(p.space());
  const auto t = CheckTriangle(p, SquaredPosteriorTarget(p, f, {0.5, 2.0}), f);
  EXPECT_TRUE(t.cdi);
  EXPECT_FALSE(t.csh);
  EXPECT_FALSE(t.sjs);
  EXPECT_TRUE(t.violations.empty());
}

TEST(CheckTriangleTest, Identity) {
  Rng rng(6);
  const auto p = RandomJoint(rng, 2, 3, 3);
  const auto t = CheckTriangle(p, p, RandomPartition(rng, p.space()));
  EXPECT_TRUE(t.sjs && t.cdi && t.csh);
  EXPECT_TRUE(t.violations.empty());
}

TEST(CheckTriangleTest, ImplicationsOnRandomInstances) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = RandomJoint(rng, 3, 2, 2);
    const auto f = RandomPartition(rng, p.space());
    // Mix of SJS, covariate-shift and CDI targets.
    FiniteJointDistribution q = p;
    switch (trial % 3) {
      case 0:
        q = ScaleByCells(p, f, RandomRatios(rng, f.num_cells() * 2));
        break;
      case 1: {
        const auto full = FeaturePartition::Full(p.space());
        std::vector<double> r(p.num_cells() * 2);
        for (std::size_t x = 0; x < p.num_cells(); ++x) r[2 * x] = r[2 * x + 1] = rng.Uniform(0.25, 4.0);
        q = ScaleByCells(p, full, r);
        break;
      }
      default:
        q = SquaredPosteriorTarget(p, f, RandomRatios(rng, f.num_cells()));
    }
    EXPECT_TRUE(CheckTriangle(p, q, f).violations.empty());
  }
}

// Corollary 1: SJS on F persists on every refinement F'.
TEST(PropertyTest, Nestedness) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = RandomJoint(rng, 3, 2, 2 + trial % 2);
    const auto f = RandomPartition(rng, p.space());
    const auto q = ScaleByCells(p, f, RandomRatios(rng, f.num_cells() * p.num_labels()));
    ASSERT_TRUE(CheckSjs(p, q, f).holds);
    const auto fine = FeaturePartition::Join(f, RandomPartition(rng, p.space()));
    EXPECT_TRUE(CheckSjs(p, q, fine).holds);
  }
}

// SJS means E_{Q_i}[X | F] = E_{P_i}[X | F] for every feature statistic X.
TEST(PropertyTest, StatisticsFormOfSjs) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = RandomJoint(rng, 3, 2, 2);
    const auto f = RandomPartition(rng, p.space());
    const auto q = ScaleByCells(p, f, RandomRatios(rng, f.num_cells() * 2));
    std::vector<double> stat(p.num_cells());
    for (double& v : stat) v = rng.Uniform(0.0, 3.0);
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t n = 0; n < f.num_cells(); ++n) {
        double ep = 0.0, eq = 0.0, mp = 0.0, mq = 0.0;
        for (std::size_t x : f.members(n)) {
          ep += stat[x] * p.mass(x, i);
          mp += p.mass(x, i);
          eq += stat[x] * q.mass(x, i);
          mq += q.mass(x, i);
        }
        EXPECT_NEAR(ep / mp, eq / mq, 1e-10);
      }
    }
  }
}

// Sufficiency of F under P carries over to Q and forces CDI.
TEST(PropertyTest, SufficiencyTransfer) {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    // X2, X3 independent of the label given X1.
    const auto p1 = RandomJoint(rng, 1, 3, 2);
    FeatureSpace space({"X1", "X2", "X3"}, {3, 2, 2});
    std::vector<double> rest(4);
    for (double& v : rest) v = rng.Uniform(0.1, 1.0);
    std::vector<double> w(12 * 2);
    for (std::size_t x = 0; x < 12; ++x) {
      for (std::size_t i = 0; i < 2; ++i) w[x * 2 + i] = p1.mass(x / 4, i) * rest[x % 4];
    }
    const auto p = FiniteJointDistribution::FromWeights(space, 2, w);
    const auto f = FeaturePartition::FromFeatureNames(space, {"X1"});
    ASSERT_TRUE(CheckSufficiency(p, f).holds);
    const auto q = ScaleByCells(p, f, RandomRatios(rng, f.num_cells() * 2));
    EXPECT_TRUE(CheckCdi(p, q, f).holds);
    EXPECT_TRUE(CheckSufficiency(q, f).holds);
    // Every statistic gives rank at most one.
    Statistics stats(2, std::vector<double>(12));
    for (auto& s : stats) for (double& v : s) v = rng.Uniform();
    for (std::size_t rank : RankMatrix(p, f, stats).per_cell_rank) EXPECT_LE(rank, 1u);
  }
}

}  // namespace
}  // namespace sjs
