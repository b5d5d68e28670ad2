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

// Estimation of the target joint distribution under sparse joint shift from
// the labeled source and the unlabeled target feature marginal.
//
// Two strategies are provided:
//  - SeesDFit: per-cell linear systems linking the unknown joint masses
//    Q[F_n ∩ A_i] to the observed target marginal on a refinement of F,
//    solved by non-negative least squares.
//  - SeesCFit: maximum likelihood of the target marginal over F-measurable
//    tables phi_i = f_i * Q[A_i], i.e. KL minimization, by projected
//    gradient ascent.

#ifndef SJSLAB_SJS_ESTIMATORS_H_
#define SJSLAB_SJS_ESTIMATORS_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sjs/discrete.h"

namespace sjs {

enum class FitMethod { kSeesD, kSeesC, kConditionalConfusion };

std::string FitMethodName(FitMethod method);
// Accepts "sees-d", "sees-c" and "confusion".
FitMethod ParseFitMethod(const std::string& name);

struct FitDiagnostics {
  bool converged = true;
  std::size_t iterations = 0;
  double projected_gradient_norm = 0.0;
  // Log-likelihood E_q[log sum_i phi_i P[A_i|H]/P[A_i]] at the solution
  // (SEES-c only).
  double objective = 0.0;
  // KL(target marginal || fitted marginal) on the full feature cells.
  double kl_residual = 0.0;
  // F-cells whose linear system could not pin down the masses (SEES-d).
  std::vector<std::size_t> underdetermined_cells;
  // Per accepted iterate (SEES-c, when requested). The objective trace starts
  // at the initial value and adds each step's cancellation-free increment.
  std::vector<double> objective_trace;
  std::vector<double> constraint_trace;
};

struct SjsFit {
  FeaturePartition partition;
  std::size_t num_labels = 0;
  // Q[F_n ∩ A_i], indexed n * num_labels + i.
  std::vector<double> cell_label_mass;
  // Q[A_i] = sum_n Q[F_n ∩ A_i].
  std::vector<double> target_priors;
  // f_i on F_n = Q_i[F_n] / P_i[F_n]; 0 where undefined.
  std::vector<double> f_ratios;
  ConditionalTable corrected_posterior;
  // Objective of the method at the solution: the sum of squared equation
  // violations (SEES-d) or the KL residual (SEES-c).
  double residual = 0.0;
  FitMethod method = FitMethod::kSeesD;
  FitDiagnostics diagnostics;
};

// Total map from feature cell to predicted label.
class HardClassifier {
 public:
  HardClassifier(std::vector<std::size_t> assignment, std::size_t num_labels);

  std::size_t num_labels() const { return num_labels_; }
  std::size_t predict(std::size_t feature_cell) const {
    return assignment_[feature_cell];
  }
  std::span<const std::size_t> assignment() const { return assignment_; }
  // Partition of the feature cells into the classifier regions C_j. Regions
  // that receive no cell are dropped.
  FeaturePartition Regions(const FeatureSpace& space) const;

 private:
  std::vector<std::size_t> assignment_;
  std::size_t num_labels_;
};

// Label maximizing P[A_i | H] per cell; ties and null cells go to the lowest
// label index.
HardClassifier TrainArgmaxClassifier(const FiniteJointDistribution& p);

struct SeesDOptions {
  // Relative singular-value cutoff for the per-cell system rank.
  double rank_threshold = 1e-10;
};

// `h_prime` must refine `f`; nullopt means the full feature partition.
SjsFit SeesDFit(const FiniteJointDistribution& p,
                std::span<const double> q_features, const FeaturePartition& f,
                const std::optional<FeaturePartition>& h_prime = std::nullopt,
                const SeesDOptions& options = {});

// SEES-d on the join of h_prime (default: full) and the classifier regions.
SjsFit SeesDFitWithClassifier(
    const FiniteJointDistribution& p, std::span<const double> q_features,
    const FeaturePartition& f, const std::optional<FeaturePartition>& h_prime,
    const HardClassifier& classifier, const SeesDOptions& options = {});

// Conditional confusion-matrix estimator: SEES-d on the join of f and the
// argmax classifier regions.
SjsFit ConditionalConfusionFit(const FiniteJointDistribution& p,
                               std::span<const double> q_features,
                               const FeaturePartition& f,
                               const SeesDOptions& options = {});

struct SeesCOptions {
  double tol = 1e-10;
  std::size_t max_iter = 10'000;
  bool record_trace = false;
};

// The concave SEES-c objective over F-measurable tables phi (indexed
// n * num_labels + i) and its single linear constraint.
class KlObjective {
 public:
  KlObjective(const FiniteJointDistribution& p,
              std::span<const double> q_features, const FeaturePartition& f);

  std::size_t dimension() const { return weights_.size(); }
  std::size_t num_labels() const { return num_labels_; }
  const FeaturePartition& partition() const { return partition_; }

  // E_q[log s(x)] with s(x) = sum_i phi_{F(x),i} P[A_i|x] / P[A_i];
  // -infinity when s vanishes on a positive-q cell.
  double Value(std::span<const double> phi) const;
  // Value(phi + step) - Value(phi), computed without cancellation.
  double Increment(std::span<const double> phi,
                   std::span<const double> step) const;
  std::vector<double> Gradient(std::span<const double> phi) const;
  // Minus the Hessian. It is block diagonal over the partition cells; block n
  // is stored row-major at n * ℓ * ℓ.
  std::vector<double> NegativeHessianBlocks(std::span<const double> phi) const;
  // E_P[s] = sum_{n,i} phi_{n,i} P_i[F_n]; equals 1 on the feasible set.
  double Constraint(std::span<const double> phi) const;
  // P_i[F_n]: the constraint coefficients.
  std::span<const double> constraint_weights() const { return weights_; }
  // s(x) on every feature cell.
  std::vector<double> FittedDensity(std::span<const double> phi) const;
  // phi_{n,i} = P[A_i]: the source itself, feasible by construction.
  std::vector<double> InitialPoint() const;
  // Euclidean projection onto {phi >= 0, Constraint(phi) = 1}; coordinates
  // with zero constraint weight are pinned to 0.
  std::vector<double> Project(std::span<const double> y) const;

 private:
  FeaturePartition partition_;
  std::size_t num_labels_;
  std::vector<double> q_;
  // P[A_i|x] / P[A_i], indexed x * num_labels + i.
  std::vector<double> scaled_posterior_;
  std::vector<double> weights_;
  std::vector<double> source_priors_;
};

SjsFit SeesCFit(const FiniteJointDistribution& p,
                std::span<const double> q_features, const FeaturePartition& f,
                const SeesCOptions& options = {});

// Target posteriors on every feature cell from F-conditional prior ratios
// Q[A_i|F] / P[A_i|F] (any per-cell positive multiple works). Feature cells
// whose correction denominator vanishes are flagged undefined.
ConditionalTable PosteriorCorrect(const FiniteJointDistribution& p,
                                  const ConditionalTable& ratios_on_f);
ConditionalTable PosteriorCorrect(const FiniteJointDistribution& p,
                                  const SjsFit& fit);

// Q[F_n ∩ A_i] -> ratio table Q[A_i|F_n] / P[A_i|F_n] on the fit's partition.
ConditionalTable PriorRatiosOnPartition(const FiniteJointDistribution& p,
                                        const FeaturePartition& f,
                                        std::span<const double> cell_label_mass);

// Builds a fit from joint masses Q[F_n ∩ A_i] (priors, f ratios, corrected
// posterior, KL residual against `q_features`).
SjsFit FitFromCellMasses(const FiniteJointDistribution& p,
                         std::span<const double> q_features,
                         const FeaturePartition& f,
                         std::vector<double> cell_label_mass, FitMethod method);

// Target joint p * sum_i f_i Q[A_i]/P[A_i] 1_{A_i}.
FiniteJointDistribution ReconstructTarget(const FiniteJointDistribution& p,
                                          const SjsFit& fit);

struct SparsityOptions {
  FitMethod method = FitMethod::kSeesC;
  SeesCOptions sees_c;
  SeesDOptions sees_d;
};

struct SubsetResult {
  // Feature indices, increasing.
  std::vector<std::size_t> features;
  std::optional<SjsFit> fit;
  // Non-empty when the fit failed.
  std::string error;
  double kl_residual = 0.0;
  double penalized_objective = 0.0;
};

// Evaluates the full candidate set and every subset one smaller, then shrinks
// greedily from the best of those while the penalized objective
// kl_residual + penalty * |subset| strictly decreases. Returns every
// evaluated subset, best first (ties: smaller, then lexicographic).
std::vector<SubsetResult> SparsitySearch(
    const FiniteJointDistribution& p, std::span<const double> q_features,
    const std::vector<std::size_t>& candidates, double penalty,
    const SparsityOptions& options = {});

}  // namespace sjs

#endif  // SJSLAB_SJS_ESTIMATORS_H_
