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

#include "sjs/estimators.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "sjs/error.h"
#include "sjs/random.h"
#include "sjs/shift_analysis.h"
#include "test_util.h"

namespace sjs {
namespace {

using testing::ConditionallyIndependent;
using testing::WorkedP;
using testing::WorkedQ;
using testing::RandomJoint;
using testing::RandomRatios;
using testing::ScaleByCells;

double MaxAbsDiff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

// Checks the SjsFit invariants against the source.
void ExpectFitInvariants(const FiniteJointDistribution& p, const SjsFit& fit) {
  const std::size_t l = fit.num_labels;
  double total = 0.0;
  std::vector<double> priors(l, 0.0);
  for (std::size_t n = 0; n < fit.partition.num_cells(); ++n) {
    for (std::size_t i = 0; i < l; ++i) {
      const double m = fit.cell_label_mass[n * l + i];
      EXPECT_GE(m, 0.0);
      total += m;
      priors[i] += m;
    }
  }
  EXPECT_NEAR(total, 1.0, 1e-8);
  EXPECT_LT(MaxAbsDiff(priors, fit.target_priors), 1e-12);
  const auto p_cells = CellLabelMasses(p, fit.partition);
  const auto p_labels = p.LabelMasses();
  for (std::size_t i = 0; i < l; ++i) {
    if (!(fit.target_priors[i] > 0.0)) continue;
    double e = 0.0;
    for (std::size_t n = 0; n < fit.partition.num_cells(); ++n) {
      e += fit.f_ratios[n * l + i] * p_cells[n * l + i] / p_labels[i];
    }
    EXPECT_NEAR(e, 1.0, 1e-8) << "label " << i;
  }
}

// Random identifiable SJS pair built by per-cell reweighting.
struct Instance {
  FiniteJointDistribution p;
  FiniteJointDistribution q;
  FeaturePartition f;
};

Instance IdentifiableInstance(Rng& rng, std::size_t d, std::size_t card, std::size_t l,
                              std::size_t shift_feature) {
  for (;;) {
    auto p = RandomJoint(rng, d, card, l);
    auto f = FeaturePartition::FromFeatures(p.space(), {shift_feature});
    if (!RankMatrix(p, f, PosteriorStatistics(p)).identifiable) continue;
    auto q = ScaleByCells(p, f, RandomRatios(rng, f.num_cells() * l));
    return {std::move(p), std::move(q), std::move(f)};
  }
}

TEST(FitMethodTest, NamesRoundTrip) {
  for (auto m : {FitMethod::kSeesD, FitMethod::kSeesC, FitMethod::kConditionalConfusion}) {
    EXPECT_EQ(ParseFitMethod(FitMethodName(m)), m);
  }
  EXPECT_EQ(ParseFitMethod("sees-d"), FitMethod::kSeesD);
  EXPECT_EQ(ParseFitMethod("sees-c"), FitMethod::kSeesC);
  EXPECT_EQ(ParseFitMethod("confusion"), FitMethod::kConditionalConfusion);
  EXPECT_THROW(ParseFitMethod("em"), InvalidArgument);
}

TEST(SeesDTest, WorkedExamplePriors) {
  const auto p = WorkedP();
  const auto q = WorkedQ();
  const auto f = FeaturePartition::FromFeatures(p.space(), {0});
  const auto fit = SeesDFit(p, q.FeatureMarginal(), f);
  // Label index is the value of Y.
  EXPECT_NEAR(fit.target_priors[1], 0.6, 1e-12);
  EXPECT_NEAR(fit.target_priors[0], 0.4, 1e-12);
  EXPECT_TRUE(fit.diagnostics.underdetermined_cells.empty());
  EXPECT_NEAR(fit.residual, 0.0, 1e-20);
  ExpectFitInvariants(p, fit);
}

TEST(SeesDTest, SourceMarginalGivesIdentity) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = RandomJoint(rng, 2, 3, 2 + rng.Index(2));
    const auto f = testing::RandomPartition(rng, p.space());
    const auto fit = SeesDFit(p, p.FeatureMarginal(), f);
    EXPECT_LT(MaxAbsDiff(fit.target_priors, p.LabelMasses()), 1e-10) << trial;
    EXPECT_LT(fit.residual, 1e-20) << trial;
    for (std::size_t n = 0; n < f.num_cells(); ++n) {
      for (std::size_t i = 0; i < p.num_labels(); ++i) {
        if (CellLabelMasses(p, f)[n * p.num_labels() + i] > 0.0) {
          EXPECT_NEAR(fit.f_ratios[n * p.num_labels() + i], 1.0, 1e-9) << trial;
        }
      }
    }
  }
}

TEST(SeesDTest, RecoversPlantedCellMasses) {
  Rng rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const auto inst = IdentifiableInstance(rng, 2, 3, 3, trial % 2);
    const auto fit = SeesDFit(inst.p, inst.q.FeatureMarginal(), inst.f);
    EXPECT_LT(MaxAbsDiff(fit.cell_label_mass, CellLabelMasses(inst.q, inst.f)), 1e-8)
        << trial;
    EXPECT_LT(MaxAbsDiff(fit.target_priors, inst.q.LabelMasses()), 1e-8) << trial;
    ExpectFitInvariants(inst.p, fit);
  }
}

TEST(SeesDTest, FlagsUnderdeterminedCells) {
  // Full partition: one equation per cell and two unknowns.
  const auto p = WorkedP();
  const auto f = FeaturePartition::Full(p.space());
  const auto fit = SeesDFit(p, WorkedQ().FeatureMarginal(), f);
  EXPECT_EQ(fit.diagnostics.underdetermined_cells.size(), f.num_cells());
  ExpectFitInvariants(p, fit);
  // The cell equation still holds.
  const auto q = WorkedQ().FeatureMarginal();
  for (std::size_t x = 0; x < p.num_cells(); ++x) {
    EXPECT_NEAR(fit.cell_label_mass[x * 2] + fit.cell_label_mass[x * 2 + 1], q[x], 1e-10);
  }
}

TEST(SeesDTest, RejectsNonRefiningHPrime) {
  const auto p = WorkedP();
  const auto f = FeaturePartition::FromFeatures(p.space(), {0});
  const auto h = FeaturePartition::FromFeatures(p.space(), {1});
  EXPECT_THROW(SeesDFit(p, p.FeatureMarginal(), f, h), InvalidArgument);
}

TEST(SeesDTest, AbsoluteContinuityViolated) {
  FeatureSpace space({"X1"}, {3});
  const auto p = FiniteJointDistribution::FromWeights(space, 2, {1, 1, 1, 1, 0, 0});
  const std::vector<double> q = {0.4, 0.4, 0.2};
  EXPECT_THROW(SeesDFit(p, q, FeaturePartition::Trivial(space)), AbsoluteContinuityViolated);
}

TEST(SeesDWithClassifierTest, SourceMarginalIsExact) {
  Rng rng(9);
  const auto p = RandomJoint(rng, 2, 3, 3);
  const auto f = FeaturePartition::FromFeatures(p.space(), {0});
  const auto fit =
      SeesDFitWithClassifier(p, p.FeatureMarginal(), f, f, TrainArgmaxClassifier(p));
  EXPECT_LT(MaxAbsDiff(fit.target_priors, p.LabelMasses()), 1e-10);
  EXPECT_LT(fit.residual, 1e-20);
}

TEST(SeesDWithClassifierTest, TrivialPartitionIsClassicalConfusionMatrix) {
  Rng rng(31);
  const std::size_t l = 3;
  const auto p = RandomJoint(rng, 2, 3, l);
  const auto trivial = FeaturePartition::Trivial(p.space());
  const auto q = ScaleByCells(p, trivial, {0.5, 1.0, 2.0});
  const auto clf = TrainArgmaxClassifier(p);
  const auto fit = SeesDFitWithClassifier(p, q.FeatureMarginal(), trivial, trivial, clf);
  // Oracle: C_ji = P_i[C_j], solve C pi = Q[C_j].
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(l, l);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(l);
  const auto p_labels = p.LabelMasses();
  const auto q_features = q.FeatureMarginal();
  for (std::size_t x = 0; x < p.num_cells(); ++x) {
    const std::size_t j = clf.predict(x);
    for (std::size_t i = 0; i < l; ++i) c(j, i) += p.mass(x, i) / p_labels[i];
    rhs(j) += q_features[x];
  }
  ASSERT_GT(std::abs(c.determinant()), 1e-6);
  const Eigen::VectorXd pi = c.lu().solve(rhs);
  for (std::size_t i = 0; i < l; ++i) {
    EXPECT_NEAR(fit.target_priors[i], pi(i), 1e-10);
    EXPECT_NEAR(fit.target_priors[i], q.LabelMasses()[i], 1e-10);
  }
}

TEST(ConditionalConfusionTest, RecoversPlantedPriorsWhenIdentifiable) {
  Rng rng(404);
  int checked = 0;
  for (int trial = 0; trial < 60 && checked < 20; ++trial) {
    const auto p = RandomJoint(rng, 2, 4, 2);
    const auto f = FeaturePartition::FromFeatures(p.space(), {0});
    const auto clf = TrainArgmaxClassifier(p);
    const auto stats = ClassifierStatistics(clf.assignment(), 2);
    if (!RankMatrix(p, f, stats).identifiable) continue;
    ++checked;
    const auto q = ScaleByCells(p, f, RandomRatios(rng, f.num_cells() * 2));
    const auto fit = ConditionalConfusionFit(p, q.FeatureMarginal(), f);
    EXPECT_EQ(fit.method, FitMethod::kConditionalConfusion);
    EXPECT_LT(MaxAbsDiff(fit.target_priors, q.LabelMasses()), 1e-8) << trial;
  }
  EXPECT_GE(checked, 10);
}

TEST(SeesCTest, SourceMarginalGivesSourcePriors) {
  Rng rng(15);
  const auto p = RandomJoint(rng, 2, 3, 3);
  const auto f = FeaturePartition::FromFeatures(p.space(), {1});
  const auto fit = SeesCFit(p, p.FeatureMarginal(), f);
  EXPECT_TRUE(fit.diagnostics.converged);
  EXPECT_LT(MaxAbsDiff(fit.target_priors, p.LabelMasses()), 1e-9);
  EXPECT_LT(fit.diagnostics.kl_residual, 1e-14);
  EXPECT_NEAR(fit.diagnostics.objective, 0.0, 1e-12);
}

TEST(SeesCTest, WorkedExampleAgreesWithSeesD) {
  const auto p = WorkedP();
  const auto q = WorkedQ().FeatureMarginal();
  const auto f = FeaturePartition::FromFeatures(p.space(), {0});
  const auto c = SeesCFit(p, q, f);
  const auto d = SeesDFit(p, q, f);
  EXPECT_TRUE(c.diagnostics.converged);
  EXPECT_LT(MaxAbsDiff(c.target_priors, d.target_priors), 1e-3);
  EXPECT_NEAR(c.target_priors[1], 0.6, 1e-3);
  EXPECT_LT(c.diagnostics.kl_residual, 1e-10);
  ExpectFitInvariants(p, c);
}

TEST(SeesCTest, NonSjsTargetHasPositiveResidual) {
  Rng rng(8);
  const auto p = RandomJoint(rng, 2, 3, 2);
  const auto f = FeaturePartition::Trivial(p.space());
  auto q = p.FeatureMarginal();
  for (double& v : q) v *= rng.Uniform(0.3, 3.0);
  double total = 0.0;
  for (double v : q) total += v;
  for (double& v : q) v /= total;
  const auto c = SeesCFit(p, q, f);
  const auto d = SeesDFit(p, q, f);
  EXPECT_GT(c.diagnostics.kl_residual, 1e-6);
  // SEES-c minimizes the KL, so it cannot do worse than the SEES-d solution.
  EXPECT_LE(c.diagnostics.kl_residual, d.diagnostics.kl_residual + 1e-9);
}

TEST(SeesCTest, TraceIsMonotoneAndFeasible) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = IdentifiableInstance(rng, 3, 2, 2 + trial % 2, trial % 3);
    SeesCOptions opts;
    opts.record_trace = true;
    const auto fit = SeesCFit(inst.p, inst.q.FeatureMarginal(), inst.f, opts);
    const auto& obj = fit.diagnostics.objective_trace;
    ASSERT_FALSE(obj.empty());
    for (std::size_t k = 1; k < obj.size(); ++k) EXPECT_GE(obj[k], obj[k - 1]) << trial;
    for (double c : fit.diagnostics.constraint_trace) EXPECT_NEAR(c, 1.0, 1e-10) << trial;
    EXPECT_TRUE(fit.diagnostics.converged) << trial;
    EXPECT_LT(fit.diagnostics.projected_gradient_norm, opts.tol) << trial;
    EXPECT_LT(MaxAbsDiff(fit.target_priors, inst.q.LabelMasses()), 1e-3) << trial;
  }
}

TEST(SeesCTest, ReportsNonConvergence) {
  Rng rng(2);
  const auto inst = IdentifiableInstance(rng, 2, 3, 3, 0);
  SeesCOptions opts;
  opts.max_iter = 1;
  opts.tol = 1e-300;
  const auto fit = SeesCFit(inst.p, inst.q.FeatureMarginal(), inst.f, opts);
  EXPECT_FALSE(fit.diagnostics.converged);
  EXPECT_LE(fit.diagnostics.iterations, 1u);
  ExpectFitInvariants(inst.p, fit);
}

TEST(KlObjectiveTest, ProjectionAndIncrement) {
  Rng rng(3);
  const auto p = RandomJoint(rng, 2, 3, 3);
  const auto f = FeaturePartition::FromFeatures(p.space(), {0});
  const KlObjective obj(p, p.FeatureMarginal(), f);
  const auto phi0 = obj.InitialPoint();
  EXPECT_NEAR(obj.Constraint(phi0), 1.0, 1e-15);
  std::vector<double> y(obj.dimension());
  for (double& v : y) v = rng.Uniform(-0.5, 2.0);
  const auto phi = obj.Project(y);
  EXPECT_NEAR(obj.Constraint(phi), 1.0, 1e-12);
  for (double v : phi) EXPECT_GE(v, 0.0);
  // Projection is idempotent.
  EXPECT_LT(MaxAbsDiff(obj.Project(phi), phi), 1e-12);
  // Projection beats random feasible points in Euclidean distance.
  for (int k = 0; k < 20; ++k) {
    std::vector<double> z(obj.dimension());
    for (double& v : z) v = rng.Uniform(0.0, 2.0);
    const auto fz = obj.Project(z);
    double dz = 0.0, dp = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
      dz += (fz[j] - y[j]) * (fz[j] - y[j]);
      dp += (phi[j] - y[j]) * (phi[j] - y[j]);
    }
    EXPECT_LE(dp, dz + 1e-12);
  }
  std::vector<double> step(obj.dimension());
  for (std::size_t j = 0; j < step.size(); ++j) step[j] = 0.01 * (phi[j] - phi0[j]);
  std::vector<double> moved(phi0);
  for (std::size_t j = 0; j < moved.size(); ++j) moved[j] += step[j];
  EXPECT_NEAR(obj.Increment(phi0, step), obj.Value(moved) - obj.Value(phi0), 1e-12);
}

TEST(PosteriorCorrectTest, UnitRatiosGiveSourcePosterior) {
  Rng rng(4);
  const auto p = RandomJoint(rng, 2, 3, 3);
  const auto f = FeaturePartition::FromFeatures(p.space(), {1});
  const ConditionalTable ones(f, 3, std::vector<double>(f.num_cells() * 3, 1.0),
                              std::vector<bool>(f.num_cells(), true));
  const auto corrected = PosteriorCorrect(p, ones);
  const auto source = Posterior(p, FeaturePartition::Full(p.space()));
  EXPECT_LT(MaxAbsDiff(corrected.values(), source.values()), 1e-15);
}

TEST(PosteriorCorrectTest, PriorShiftMatchesBayes) {
  Rng rng(6);
  const auto p = RandomJoint(rng, 2, 3, 3);
  const auto trivial = FeaturePartition::Trivial(p.space());
  const std::vector<double> new_priors = {0.2, 0.5, 0.3};
  const auto p_labels = p.LabelMasses();
  std::vector<double> ratio(3);
  for (std::size_t i = 0; i < 3; ++i) ratio[i] = new_priors[i] / p_labels[i];
  const auto corrected =
      PosteriorCorrect(p, ConditionalTable(trivial, 3, ratio, {true}));
  // Oracle: Q[i|x] proportional to P[x|i] Q[i].
  for (std::size_t x = 0; x < p.num_cells(); ++x) {
    double denom = 0.0;
    for (std::size_t i = 0; i < 3; ++i) denom += p.mass(x, i) / p_labels[i] * new_priors[i];
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_NEAR(corrected.value(x, i), p.mass(x, i) / p_labels[i] * new_priors[i] / denom,
                  1e-14);
    }
  }
}

TEST(PosteriorCorrectTest, TrueRatiosReproduceTargetPosterior) {
  Rng rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t l = 2 + rng.Index(2);
    const auto p = RandomJoint(rng, 2, 3, l, 0.2);
    const auto f = testing::RandomPartition(rng, p.space());
    const auto q = ScaleByCells(p, f, RandomRatios(rng, f.num_cells() * l));
    const auto pf = Posterior(p, f);
    const auto qf = Posterior(q, f);
    std::vector<double> ratio(f.num_cells() * l, 0.0);
    std::vector<bool> defined(f.num_cells());
    for (std::size_t n = 0; n < f.num_cells(); ++n) {
      defined[n] = pf.is_defined(n);
      for (std::size_t i = 0; i < l; ++i) {
        if (pf.value(n, i) > 0.0) ratio[n * l + i] = qf.value(n, i) / pf.value(n, i);
      }
    }
    const auto corrected = PosteriorCorrect(p, ConditionalTable(f, l, ratio, defined));
    const auto truth = Posterior(q, FeaturePartition::Full(p.space()));
    const auto qx = q.FeatureMarginal();
    for (std::size_t x = 0; x < p.num_cells(); ++x) {
      if (!(qx[x] > 0.0)) continue;
      for (std::size_t i = 0; i < l; ++i) {
        EXPECT_NEAR(corrected.value(x, i), truth.value(x, i), 1e-10) << trial;
      }
    }
  }
}

TEST(PosteriorCorrectTest, WorkedExampleGivesTargetPosterior) {
  const auto p = WorkedP();
  const auto q = WorkedQ();
  const auto fit = SeesDFit(p, q.FeatureMarginal(), FeaturePartition::FromFeatures(p.space(), {0}));
  const auto corrected = PosteriorCorrect(p, fit);
  // Hand computation from the stated Q tables, cell index 2 * x1 + x2.
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t b = 0; b < 2; ++b) {
      const double y1 = 0.6 * 0.5 * (b ? 0.2 : 0.8);
      const double y0 = 0.4 * 0.5 * (b ? 0.6 : 0.4);
      EXPECT_NEAR(corrected.value(2 * a + b, 1), y1 / (y0 + y1), 1e-12);
    }
  }
  // Q[Y=1 | X1=0, X2=0] = 0.24 / 0.32, while the source has 0.16 / 0.28.
  EXPECT_NEAR(corrected.value(0, 1), 0.75, 1e-12);
}

TEST(ReconstructTest, WorkedExampleReproducesTarget) {
  const auto p = WorkedP();
  const auto q = WorkedQ();
  const auto fit = SeesDFit(p, q.FeatureMarginal(), FeaturePartition::FromFeatures(p.space(), {0}));
  EXPECT_LT(MaxAbsDiff(ReconstructTarget(p, fit).masses(), q.masses()), 1e-8);
}

TEST(ReconstructTest, IdentityAndMarginalFit) {
  Rng rng(12);
  const auto p = RandomJoint(rng, 2, 3, 2);
  const auto f = FeaturePartition::FromFeatures(p.space(), {0});
  const auto same = ReconstructTarget(p, SeesDFit(p, p.FeatureMarginal(), f));
  EXPECT_LT(MaxAbsDiff(same.masses(), p.masses()), 1e-12);

  for (int trial = 0; trial < 30; ++trial) {
    const auto p2 = RandomJoint(rng, 2, 3, 2 + rng.Index(2));
    const auto g = testing::RandomPartition(rng, p2.space());
    auto q = p2.FeatureMarginal();
    for (double& v : q) v *= rng.Uniform(0.5, 2.0);
    double total = 0.0;
    for (double v : q) total += v;
    for (double& v : q) v /= total;
    for (auto method : {FitMethod::kSeesD, FitMethod::kSeesC}) {
      const auto fit = method == FitMethod::kSeesD ? SeesDFit(p2, q, g) : SeesCFit(p2, q, g);
      const auto rebuilt = ReconstructTarget(p2, fit).FeatureMarginal();
      // Exact fits reproduce the marginal; otherwise only the residual bounds it.
      if (fit.diagnostics.kl_residual < 1e-14) {
        EXPECT_LT(MaxAbsDiff(rebuilt, q), std::sqrt(fit.residual) + 1e-8) << trial;
      }
      double l1 = 0.0;
      for (std::size_t x = 0; x < q.size(); ++x) l1 += std::abs(rebuilt[x] - q[x]);
      // Pinsker: total variation bounded by the KL residual.
      EXPECT_LE(0.5 * l1, std::sqrt(0.5 * fit.diagnostics.kl_residual) + 1e-8) << trial;
    }
  }
}

TEST(ReconstructTest, PlantedRecovery) {
  Rng rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = IdentifiableInstance(rng, 3, 2, 2, trial % 3);
    const auto fit = SeesDFit(inst.p, inst.q.FeatureMarginal(), inst.f);
    EXPECT_LT(MaxAbsDiff(ReconstructTarget(inst.p, fit).masses(), inst.q.masses()), 1e-8);
  }
}

TEST(ArgmaxClassifierTest, WorkedExampleCell) {
  const auto p = WorkedP();
  const auto clf = TrainArgmaxClassifier(p);
  const std::vector<std::size_t> coords = {1, 0};
  // P[Y=1|X1=1,X2=0] = 0.48 / 0.64 = 0.75.
  EXPECT_EQ(clf.predict(p.space().Encode(coords)), 1u);
}

TEST(ArgmaxClassifierTest, TiesGoToLowestLabel) {
  FeatureSpace space({"X1"}, {2});
  const auto p = FiniteJointDistribution::FromWeights(space, 3, {1, 1, 1, 0, 2, 2});
  const auto clf = TrainArgmaxClassifier(p);
  EXPECT_EQ(clf.predict(0), 0u);
  EXPECT_EQ(clf.predict(1), 1u);
}

TEST(ArgmaxClassifierTest, SeparableHasZeroError) {
  FeatureSpace space({"X1"}, {3});
  const auto p = FiniteJointDistribution::FromWeights(space, 3, {1, 0, 0, 0, 2, 0, 0, 0, 3});
  const auto clf = TrainArgmaxClassifier(p);
  for (std::size_t x = 0; x < 3; ++x) EXPECT_EQ(clf.predict(x), x);
  EXPECT_EQ(clf.Regions(space).num_cells(), 3u);
}

TEST(HardClassifierTest, RegionsDropEmptyLabels) {
  FeatureSpace space({"X1", "X2"}, {2, 2});
  const HardClassifier clf({2, 2, 0, 2}, 3);
  const auto regions = clf.Regions(space);
  EXPECT_EQ(regions.num_cells(), 2u);
  EXPECT_EQ(regions.cell_of(0), regions.cell_of(1));
  EXPECT_NE(regions.cell_of(0), regions.cell_of(2));
  EXPECT_ANY_THROW(HardClassifier({0, 3}, 3));
}

TEST(SparsityTest, PlantedSingleFeature) {
  Rng rng(101);
  const auto inst = IdentifiableInstance(rng, 3, 2, 2, 0);
  const auto ranked =
      SparsitySearch(inst.p, inst.q.FeatureMarginal(), {0, 1, 2}, 1e-4);
  ASSERT_FALSE(ranked.empty());
  const auto& top = ranked.front().features;
  EXPECT_TRUE(std::find(top.begin(), top.end(), 0u) != top.end());
  for (const auto& r : ranked) {
    if (std::find(r.features.begin(), r.features.end(), 0u) != r.features.end()) {
      EXPECT_LT(r.kl_residual, 1e-10);
    }
  }
  for (std::size_t k = 1; k < ranked.size(); ++k) {
    EXPECT_LE(ranked[k - 1].penalized_objective, ranked[k].penalized_objective);
  }
}

TEST(SparsityTest, SourceMarginalPicksEmptySet) {
  Rng rng(102);
  const auto p = RandomJoint(rng, 3, 2, 2);
  const auto ranked = SparsitySearch(p, p.FeatureMarginal(), {0, 1, 2}, 0.01);
  ASSERT_FALSE(ranked.empty());
  EXPECT_TRUE(ranked.front().features.empty());
  EXPECT_NEAR(ranked.front().penalized_objective, 0.0, 1e-12);
}

TEST(SparsityTest, CovariateShiftNeedsEveryFeature) {
  Rng rng(103);
  const auto p = RandomJoint(rng, 3, 2, 2);
  const auto full = FeaturePartition::Full(p.space());
  std::vector<double> ratio(p.num_cells() * 2);
  for (std::size_t x = 0; x < p.num_cells(); ++x) {
    ratio[x * 2] = ratio[x * 2 + 1] = rng.Uniform(0.25, 4.0);
  }
  const auto q = ScaleByCells(p, full, ratio);
  ASSERT_TRUE(CheckCovariateShift(p, q, full).holds);
  SparsityOptions opts;
  opts.method = FitMethod::kSeesD;
  const auto ranked = SparsitySearch(p, q.FeatureMarginal(), {0, 1, 2}, 0.0, opts);
  for (const auto& r : ranked) {
    ASSERT_TRUE(r.fit.has_value()) << r.error;
    if (r.features.size() == 3) {
      EXPECT_LT(r.kl_residual, 1e-12);
    } else {
      EXPECT_GT(r.kl_residual, 1e-8);
    }
  }
  EXPECT_EQ(ranked.front().features.size(), 3u);
}

TEST(SparsityTest, RejectsBadArguments) {
  const auto p = WorkedP();
  EXPECT_THROW(SparsitySearch(p, p.FeatureMarginal(), {0, 0}, 0.1), InvalidArgument);
  EXPECT_THROW(SparsitySearch(p, p.FeatureMarginal(), {5}, 0.1), InvalidArgument);
  EXPECT_THROW(SparsitySearch(p, p.FeatureMarginal(), {0}, -1.0), InvalidArgument);
}

}  // namespace
}  // namespace sjs
