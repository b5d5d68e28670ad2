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

// Brute-force reference computations for validating the estimators and
// checkers on desk-scale instances.

#ifndef SJSLAB_SJS_ORACLE_H_
#define SJSLAB_SJS_ORACLE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sjs/discrete.h"
#include "sjs/estimators.h"

namespace sjs {

struct PlantedInstance {
  FiniteJointDistribution source;
  FiniteJointDistribution target;
  FeaturePartition shift_partition;
  std::vector<double> planted_priors;
  // f_i on each shift cell after renormalization, indexed n * ℓ + i.
  std::vector<double> planted_ratios;
  // Q[F_n ∩ A_i], indexed n * ℓ + i.
  std::vector<double> planted_cell_mass;
  std::uint64_t seed = 0;
};

// Target = source * sum_i f_i Q[A_i]/P[A_i] 1_{A_i} with F-measurable f_i.
// `cell_ratios` (n * ℓ + i, non-negative) are rescaled so that
// E_{P_i}[f_i] = 1; when absent they are drawn log-uniformly from [1/4, 4].
// Throws InfeasibleRatios when a label's ratios vanish on its source support.
PlantedInstance PlantSjs(const FiniteJointDistribution& source,
                         const FeaturePartition& f,
                         std::vector<double> new_priors,
                         std::optional<std::vector<double>> cell_ratios,
                         std::uint64_t seed);

// Exact solution set of one shift cell's system, restricted to x >= 0.
struct CellSolutionSet {
  // Labels with P[F_n ∩ A_i] > 0; the others are pinned to 0.
  std::vector<std::size_t> active_labels;
  std::size_t rank = 0;
  // Rows of the system over the active labels, and its right-hand side.
  std::vector<std::vector<double>> equations;
  std::vector<double> rhs;
  // Vertices of the feasible polytope, each of length ℓ. Empty when the
  // system has no non-negative solution.
  std::vector<std::vector<double>> vertices;
};

struct FeasibleSet {
  std::size_t num_labels = 0;
  std::vector<CellSolutionSet> cells;

  bool Empty() const;
  bool IsSingleton() const;
  // True when every cell's masses solve the exact system within `tol` and
  // are non-negative (the polytope equals the hull of its vertices).
  bool Contains(std::span<const double> cell_label_mass, double tol) const;
  // The unique solution (n * ℓ + i) when IsSingleton().
  std::vector<double> UniqueSolution() const;
};

// Solves every shift cell's system sum_i x_i p(h, i) / P[F_n ∩ A_i] = q(h)
// over the feature cells h of F_n exactly, by rank-revealing LU and vertex
// enumeration. Limited to 10^4 feature cells and 10 labels.
FeasibleSet BruteForceFit(const FiniteJointDistribution& p,
                          std::span<const double> q_features,
                          const FeaturePartition& f);

// Max relative error between central finite differences of the SEES-c
// objective and its analytic gradient at phi. Coordinates closer than `step`
// to zero use a one-sided second-order difference.
double FdGradientCheck(const KlObjective& objective, std::span<const double> phi,
                       double step = 1e-6);

}  // namespace sjs

#endif  // SJSLAB_SJS_ORACLE_H_
