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

// Checks of distribution-shift hypotheses between a source P and a target Q,
// and the conditional class matrix used to decide identifiability.
//
// All equalities are almost-sure statements; cells of zero probability are
// skipped.

#ifndef SJSLAB_SJS_SHIFT_ANALYSIS_H_
#define SJSLAB_SJS_SHIFT_ANALYSIS_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sjs/discrete.h"

namespace sjs {

inline constexpr double kDefaultShiftTolerance = 1e-9;
inline constexpr double kDefaultRankThreshold = 1e-10;

// Where a check attains its largest deviation.
struct Witness {
  std::size_t partition_cell = 0;
  // Label of the deviating equality; absent for label-free equalities (CDI).
  std::optional<std::size_t> label;
  // Feature cell (the H-event) of the deviating equality; absent when the
  // equality is on partition cells only.
  std::optional<std::size_t> feature_cell;
};

struct ShiftVerdict {
  bool holds = true;
  double max_violation = 0.0;
  double tolerance = kDefaultShiftTolerance;
  std::optional<Witness> witness;
  // Secondary measurement where a check computes two equivalent forms (CDI:
  // largest spread of the marginal density within one partition cell).
  std::optional<double> alternate_violation;
};

// Q_i[H | F] = P_i[H | F] on every H-cell, label and positive-mass F-cell.
ShiftVerdict CheckSjs(const FiniteJointDistribution& p,
                      const FiniteJointDistribution& q,
                      const FeaturePartition& f,
                      double tol = kDefaultShiftTolerance);

// SJS with the trivial partition.
ShiftVerdict CheckPriorShift(const FiniteJointDistribution& p,
                             const FiniteJointDistribution& q,
                             double tol = kDefaultShiftTolerance);

// Q[A_i | F] = P[A_i | F] on every positive-mass F-cell.
ShiftVerdict CheckCovariateShift(const FiniteJointDistribution& p,
                                 const FiniteJointDistribution& q,
                                 const FeaturePartition& f,
                                 double tol = kDefaultShiftTolerance);

// Q[H | F] = P[H | F] on every H-cell. Depends on the feature marginals only;
// the density form (dQ/dP on H constant within F-cells) is reported as
// alternate_violation.
ShiftVerdict CheckCdi(std::span<const double> p_features,
                      std::span<const double> q_features,
                      const FeaturePartition& f,
                      double tol = kDefaultShiftTolerance);
ShiftVerdict CheckCdi(const FiniteJointDistribution& p,
                      const FiniteJointDistribution& q,
                      const FeaturePartition& f,
                      double tol = kDefaultShiftTolerance);

// P[A_i | H] = P[A_i | F] for all labels.
ShiftVerdict CheckSufficiency(const FiniteJointDistribution& p,
                              const FeaturePartition& f,
                              double tol = kDefaultShiftTolerance);

// ℓ non-negative functions of the feature cell.
using Statistics = std::vector<std::vector<double>>;

// X_i = P[A_i | H].
Statistics PosteriorStatistics(const FiniteJointDistribution& p);
// X_i = indicator of the feature cells assigned to label i.
Statistics ClassifierStatistics(std::span<const std::size_t> assignment,
                                std::size_t num_labels);

struct RankReport {
  // Row-major ℓ×ℓ matrices R_ij = E_{P_j}[X_i | G] for each G-cell; empty
  // for cells of zero mass.
  std::vector<std::vector<double>> per_cell_matrices;
  std::vector<std::size_t> per_cell_rank;
  std::vector<std::vector<double>> singular_values;
  std::vector<bool> positive_mass;
  std::size_t num_labels = 0;
  bool identifiable = false;
};

// Singular values above sigma_max * ℓ * rank_threshold count toward the rank.
// A column whose class-conditional is undefined on the cell (P[G_n ∩ A_j] = 0)
// is zero.
RankReport RankMatrix(const FiniteJointDistribution& p,
                      const FeaturePartition& g, const Statistics& statistics,
                      double rank_threshold = kDefaultRankThreshold);

// Max deviation between E_P[X_i | G] and (R × P[A | G])_i over cells and i.
double VerifyTotalExpectation(const FiniteJointDistribution& p,
                              const FeaturePartition& g,
                              const Statistics& statistics);

// Conditional variance var_P[P[A_1 | H] | G] per G-cell (0 on null cells).
std::vector<double> ConditionalPosteriorVariance(
    const FiniteJointDistribution& p, const FeaturePartition& g);

struct VarianceVerdict {
  // Every positive-mass G-cell contains a positive-mass feature cell whose
  // posterior differs from the cell average by more than the tolerance.
  bool holds = false;
  // Some positive-mass G-cell has such a feature cell.
  bool varies_somewhere = false;
  // Smallest, over positive-mass G-cells, of the largest in-cell deviation.
  double min_cell_spread = 0.0;
  std::optional<std::size_t> weakest_cell;
  double tolerance = kDefaultShiftTolerance;
};

// Binary case only: positive conditional variance of the posterior given G.
// With posterior statistics, `holds` coincides with RankMatrix's verdict.
VarianceVerdict BinaryVarianceCriterion(const FiniteJointDistribution& p,
                                        const FeaturePartition& g,
                                        double tol = kDefaultShiftTolerance);

struct TriangleReport {
  bool sjs = false;
  bool cdi = false;
  bool csh = false;
  // Full rank of R(P, F, ℓ) for the statistics used in implication (i).
  bool full_rank = false;
  // P[A_i | H] > 0 almost surely for all i.
  bool positive_posteriors = false;
  // Violated implications, e.g. "(ii) cdi && csh => sjs". Empty when the
  // three verdicts are consistent.
  std::vector<std::string> violations;
  ShiftVerdict sjs_verdict;
  ShiftVerdict cdi_verdict;
  ShiftVerdict csh_verdict;
};

// Runs SJS, CDI and full covariate-shift checks and audits the implications
// (i) full rank ∧ SJS ∧ CDI ⇒ CSH, (ii) CDI ∧ CSH ⇒ SJS,
// (iii) positive posteriors ∧ SJS ∧ CSH ⇒ CDI.
// Statistics default to the source posteriors.
TriangleReport CheckTriangle(const FiniteJointDistribution& p,
                             const FiniteJointDistribution& q,
                             const FeaturePartition& f,
                             const std::optional<Statistics>& statistics = {},
                             double tol = kDefaultShiftTolerance);

}  // namespace sjs

#endif  // SJSLAB_SJS_SHIFT_ANALYSIS_H_
