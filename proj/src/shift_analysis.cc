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
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "sjs/error.h"

namespace sjs {
namespace {

// Running maximum; keeps the first (lowest-index) witness on ties.
class ViolationTracker {
 public:
  explicit ViolationTracker(double tol) { verdict_.tolerance = tol; }

  void Observe(double deviation, Witness witness) {
    if (!verdict_.witness || deviation > verdict_.max_violation) {
      verdict_.max_violation = deviation;
      verdict_.witness = witness;
    }
  }

  ShiftVerdict Finish() {
    verdict_.holds = verdict_.max_violation <= verdict_.tolerance;
    return verdict_;
  }

 private:
  ShiftVerdict verdict_;
};

void RequirePartitionSpace(const FiniteJointDistribution& dist,
                           const FeaturePartition& partition) {
  if (!(dist.space() == partition.space())) {
    throw InvalidArgument("partition and distribution live on different spaces");
  }
}

void ValidateStatistics(const FiniteJointDistribution& p,
                        const Statistics& statistics) {
  if (statistics.size() != p.num_labels()) {
    throw InvalidArgument("expected one statistic per label (" +
                          std::to_string(p.num_labels()) + "), got " +
                          std::to_string(statistics.size()));
  }
  for (const auto& stat : statistics) {
    if (stat.size() != p.num_cells()) {
      throw InvalidArgument("statistic must have one value per feature cell");
    }
    for (double v : stat) {
      if (!std::isfinite(v) || v < 0.0) {
        throw InvalidArgument("statistics must be finite and non-negative");
      }
    }
  }
}

}  // namespace

ShiftVerdict CheckSjs(const FiniteJointDistribution& p,
                      const FiniteJointDistribution& q,
                      const FeaturePartition& f, double tol) {
  RequirePartitionSpace(p, f);
  RequireAbsolutelyContinuous(q, p);
  p.RequirePositiveLabels("source");
  q.RequirePositiveLabels("target");
  const std::size_t l = p.num_labels();
  const auto p_cells = CellLabelMasses(p, f);
  const auto q_cells = CellLabelMasses(q, f);
  ViolationTracker tracker(tol);
  for (std::size_t x = 0; x < p.num_cells(); ++x) {
    const std::size_t n = f.cell_of(x);
    for (std::size_t i = 0; i < l; ++i) {
      const double p_mass = p_cells[n * l + i];
      const double q_mass = q_cells[n * l + i];
      // Conditionals only exist on cells charged by both class-conditionals.
      if (!(p_mass > 0.0) || !(q_mass > 0.0)) continue;
      const double deviation =
          std::abs(q.mass(x, i) / q_mass - p.mass(x, i) / p_mass);
      tracker.Observe(deviation, Witness{n, i, x});
    }
  }
  return tracker.Finish();
}

ShiftVerdict CheckPriorShift(const FiniteJointDistribution& p,
                             const FiniteJointDistribution& q, double tol) {
  return CheckSjs(p, q, FeaturePartition::Trivial(p.space()), tol);
}

ShiftVerdict CheckCovariateShift(const FiniteJointDistribution& p,
                                 const FiniteJointDistribution& q,
                                 const FeaturePartition& f, double tol) {
  RequirePartitionSpace(p, f);
  RequireAbsolutelyContinuous(q, p);
  const auto p_post = Posterior(p, f);
  const auto q_post = Posterior(q, f);
  ViolationTracker tracker(tol);
  for (std::size_t n = 0; n < f.num_cells(); ++n) {
    if (!q_post.is_defined(n)) continue;
    for (std::size_t i = 0; i < p.num_labels(); ++i) {
      const double deviation = std::abs(q_post.value(n, i) - p_post.value(n, i));
      tracker.Observe(deviation, Witness{n, i, std::nullopt});
    }
  }
  return tracker.Finish();
}

ShiftVerdict CheckCdi(std::span<const double> p_features,
                      std::span<const double> q_features,
                      const FeaturePartition& f, double tol) {
  if (p_features.size() != f.space().num_cells() ||
      q_features.size() != f.space().num_cells()) {
    throw InvalidArgument("CheckCdi: feature tables do not match the space");
  }
  const auto p_cells = PartitionMasses(p_features, f);
  const auto q_cells = PartitionMasses(q_features, f);
  ViolationTracker tracker(tol);
  double max_spread = 0.0;
  for (std::size_t n = 0; n < f.num_cells(); ++n) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t x : f.members(n)) {
      if (p_features[x] > 0.0) {
        const double density = q_features[x] / p_features[x];
        lo = std::min(lo, density);
        hi = std::max(hi, density);
      } else if (q_features[x] > 0.0) {
        throw AbsoluteContinuityViolated(
            x, "target feature marginal has mass on source-null cell " +
                   std::to_string(x));
      }
    }
    if (hi >= lo) max_spread = std::max(max_spread, hi - lo);
    if (!(q_cells[n] > 0.0)) continue;
    for (std::size_t x : f.members(n)) {
      const double deviation =
          std::abs(q_features[x] / q_cells[n] - p_features[x] / p_cells[n]);
      tracker.Observe(deviation, Witness{n, std::nullopt, x});
    }
  }
  auto verdict = tracker.Finish();
  verdict.alternate_violation = max_spread;
  return verdict;
}

ShiftVerdict CheckCdi(const FiniteJointDistribution& p,
                      const FiniteJointDistribution& q,
                      const FeaturePartition& f, double tol) {
  RequireCompatible(p, q);
  RequirePartitionSpace(p, f);
  return CheckCdi(p.FeatureMarginal(), q.FeatureMarginal(), f, tol);
}

ShiftVerdict CheckSufficiency(const FiniteJointDistribution& p,
                              const FeaturePartition& f, double tol) {
  RequirePartitionSpace(p, f);
  const auto coarse = Posterior(p, f);
  const auto fine = Posterior(p, FeaturePartition::Full(p.space()));
  ViolationTracker tracker(tol);
  for (std::size_t x = 0; x < p.num_cells(); ++x) {
    if (!fine.is_defined(x)) continue;
    const std::size_t n = f.cell_of(x);
    for (std::size_t i = 0; i < p.num_labels(); ++i) {
      const double deviation = std::abs(fine.value(x, i) - coarse.value(n, i));
      tracker.Observe(deviation, Witness{n, i, x});
    }
  }
  return tracker.Finish();
}

Statistics PosteriorStatistics(const FiniteJointDistribution& p) {
  const auto post = Posterior(p, FeaturePartition::Full(p.space()));
  Statistics out(p.num_labels(), std::vector<double>(p.num_cells(), 0.0));
  for (std::size_t x = 0; x < p.num_cells(); ++x) {
    for (std::size_t i = 0; i < p.num_labels(); ++i) {
      out[i][x] = post.value(x, i);
    }
  }
  return out;
}

Statistics ClassifierStatistics(std::span<const std::size_t> assignment,
                                std::size_t num_labels) {
  Statistics out(num_labels, std::vector<double>(assignment.size(), 0.0));
  for (std::size_t x = 0; x < assignment.size(); ++x) {
    if (assignment[x] >= num_labels) {
      throw InvalidArgument("classifier assigns an out-of-range label");
    }
    out[assignment[x]][x] = 1.0;
  }
  return out;
}

RankReport RankMatrix(const FiniteJointDistribution& p,
                      const FeaturePartition& g, const Statistics& statistics,
                      double rank_threshold) {
  RequirePartitionSpace(p, g);
  p.RequirePositiveLabels("source");
  ValidateStatistics(p, statistics);
  const std::size_t l = p.num_labels();
  const auto cell_label = CellLabelMasses(p, g);

  RankReport report;
  report.num_labels = l;
  report.identifiable = true;
  report.per_cell_matrices.resize(g.num_cells());
  report.per_cell_rank.assign(g.num_cells(), 0);
  report.singular_values.resize(g.num_cells());
  report.positive_mass.assign(g.num_cells(), false);

  for (std::size_t n = 0; n < g.num_cells(); ++n) {
    double cell_mass = 0.0;
    for (std::size_t j = 0; j < l; ++j) cell_mass += cell_label[n * l + j];
    if (!(cell_mass > 0.0)) continue;
    report.positive_mass[n] = true;

    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(l, l);
    for (std::size_t x : g.members(n)) {
      for (std::size_t j = 0; j < l; ++j) {
        const double weight = p.mass(x, j);
        if (weight == 0.0) continue;
        for (std::size_t i = 0; i < l; ++i) r(i, j) += statistics[i][x] * weight;
      }
    }
    for (std::size_t j = 0; j < l; ++j) {
      const double denom = cell_label[n * l + j];
      if (denom > 0.0) r.col(j) /= denom;
    }

    auto& flat = report.per_cell_matrices[n];
    flat.resize(l * l);
    for (std::size_t i = 0; i < l; ++i) {
      for (std::size_t j = 0; j < l; ++j) flat[i * l + j] = r(i, j);
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(r);
    const Eigen::VectorXd sigma = svd.singularValues();
    report.singular_values[n].assign(sigma.data(), sigma.data() + sigma.size());
    const double cutoff = sigma.size() ? sigma(0) * l * rank_threshold : 0.0;
    std::size_t rank = 0;
    for (Eigen::Index k = 0; k < sigma.size(); ++k) {
      if (sigma(k) > cutoff && sigma(k) > 0.0) ++rank;
    }
    report.per_cell_rank[n] = rank;
    if (rank != l) report.identifiable = false;
  }
  return report;
}

double VerifyTotalExpectation(const FiniteJointDistribution& p,
                              const FeaturePartition& g,
                              const Statistics& statistics) {
  const auto report = RankMatrix(p, g, statistics);
  const std::size_t l = p.num_labels();
  const auto post = Posterior(p, g);
  const auto cell_mass = PartitionMasses(p.FeatureMarginal(), g);
  const auto marginal = p.FeatureMarginal();
  double worst = 0.0;
  for (std::size_t n = 0; n < g.num_cells(); ++n) {
    if (!report.positive_mass[n]) continue;
    const auto& r = report.per_cell_matrices[n];
    for (std::size_t i = 0; i < l; ++i) {
      double lhs = 0.0;
      for (std::size_t x : g.members(n)) lhs += statistics[i][x] * marginal[x];
      lhs /= cell_mass[n];
      double rhs = 0.0;
      for (std::size_t j = 0; j < l; ++j) rhs += r[i * l + j] * post.value(n, j);
      worst = std::max(worst, std::abs(lhs - rhs));
    }
  }
  return worst;
}

std::vector<double> ConditionalPosteriorVariance(
    const FiniteJointDistribution& p, const FeaturePartition& g) {
  RequirePartitionSpace(p, g);
  if (p.num_labels() != 2) {
    throw InvalidArgument("conditional posterior variance needs two labels");
  }
  const auto fine = Posterior(p, FeaturePartition::Full(p.space()));
  const auto coarse = Posterior(p, g);
  const auto marginal = p.FeatureMarginal();
  const auto cell_mass = PartitionMasses(marginal, g);
  std::vector<double> out(g.num_cells(), 0.0);
  for (std::size_t n = 0; n < g.num_cells(); ++n) {
    if (!(cell_mass[n] > 0.0)) continue;
    double var = 0.0;
    for (std::size_t x : g.members(n)) {
      const double d = fine.value(x, 0) - coarse.value(n, 0);
      var += marginal[x] * d * d;
    }
    out[n] = var / cell_mass[n];
  }
  return out;
}

VarianceVerdict BinaryVarianceCriterion(const FiniteJointDistribution& p,
                                        const FeaturePartition& g, double tol) {
  RequirePartitionSpace(p, g);
  if (p.num_labels() != 2) {
    throw InvalidArgument("binary variance criterion needs exactly two labels");
  }
  const auto fine = Posterior(p, FeaturePartition::Full(p.space()));
  const auto coarse = Posterior(p, g);
  VarianceVerdict verdict;
  verdict.tolerance = tol;
  verdict.holds = true;
  for (std::size_t n = 0; n < g.num_cells(); ++n) {
    if (!coarse.is_defined(n)) continue;
    double spread = 0.0;
    for (std::size_t x : g.members(n)) {
      if (!fine.is_defined(x)) continue;
      spread = std::max(spread, std::abs(fine.value(x, 0) - coarse.value(n, 0)));
    }
    if (!verdict.weakest_cell || spread < verdict.min_cell_spread) {
      verdict.min_cell_spread = spread;
      verdict.weakest_cell = n;
    }
    if (spread > tol) {
      verdict.varies_somewhere = true;
    } else {
      verdict.holds = false;
    }
  }
  if (!verdict.weakest_cell) verdict.holds = false;
  return verdict;
}

TriangleReport CheckTriangle(const FiniteJointDistribution& p,
                             const FiniteJointDistribution& q,
                             const FeaturePartition& f,
                             const std::optional<Statistics>& statistics,
                             double tol) {
  TriangleReport report;
  report.sjs_verdict = CheckSjs(p, q, f, tol);
  report.cdi_verdict = CheckCdi(p, q, f, tol);
  report.csh_verdict =
      CheckCovariateShift(p, q, FeaturePartition::Full(p.space()), tol);
  report.sjs = report.sjs_verdict.holds;
  report.cdi = report.cdi_verdict.holds;
  report.csh = report.csh_verdict.holds;

  const Statistics stats = statistics ? *statistics : PosteriorStatistics(p);
  report.full_rank = RankMatrix(p, f, stats).identifiable;

  const auto post = Posterior(p, FeaturePartition::Full(p.space()));
  report.positive_posteriors = true;
  for (std::size_t x = 0; x < p.num_cells() && report.positive_posteriors; ++x) {
    if (!post.is_defined(x)) continue;
    for (std::size_t i = 0; i < p.num_labels(); ++i) {
      if (!(post.value(x, i) > 0.0)) {
        report.positive_posteriors = false;
        break;
      }
    }
  }

  if (report.full_rank && report.sjs && report.cdi && !report.csh) {
    report.violations.push_back("(i) full rank && sjs && cdi => csh");
  }
  if (report.cdi && report.csh && !report.sjs) {
    report.violations.push_back("(ii) cdi && csh => sjs");
  }
  if (report.positive_posteriors && report.sjs && report.csh && !report.cdi) {
    report.violations.push_back("(iii) positive posteriors && sjs && csh => cdi");
  }
  return report;
}

}  // namespace sjs
