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

// Exact finite joint distributions over categorical features and labels.
//
// A feature cell is one joint assignment of all features, encoded row-major
// (the first feature is the most significant digit). Joint masses are stored
// densely, indexed by cell * num_labels + label.

#ifndef SJSLAB_SJS_DISCRETE_H_
#define SJSLAB_SJS_DISCRETE_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sjs {

inline constexpr std::size_t kDefaultMaxCells = 10'000'000;
// Tolerance for "masses sum to one".
inline constexpr double kNormalizationTolerance = 1e-12;

class FeatureSpace {
 public:
  FeatureSpace(std::vector<std::string> names,
               std::vector<std::size_t> cardinalities,
               std::size_t max_cells = kDefaultMaxCells);

  std::size_t num_features() const { return names_.size(); }
  std::size_t num_cells() const { return num_cells_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::size_t>& cardinalities() const {
    return cardinalities_;
  }
  const std::string& name(std::size_t feature) const {
    return names_.at(feature);
  }
  std::size_t cardinality(std::size_t feature) const {
    return cardinalities_.at(feature);
  }

  std::size_t Encode(std::span<const std::size_t> coords) const;
  std::vector<std::size_t> Decode(std::size_t cell) const;
  std::size_t Coordinate(std::size_t cell, std::size_t feature) const;

  std::optional<std::size_t> FeatureIndex(const std::string& name) const;
  // Resolves a list of names; throws InvalidArgument on an unknown name.
  std::vector<std::size_t> FeatureIndices(
      const std::vector<std::string>& names) const;

  friend bool operator==(const FeatureSpace& a, const FeatureSpace& b) {
    return a.names_ == b.names_ && a.cardinalities_ == b.cardinalities_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<std::size_t> cardinalities_;
  std::vector<std::size_t> strides_;
  std::size_t num_cells_ = 1;
};

// Probability table over (feature cell, label).
class FiniteJointDistribution {
 public:
  // `mass` has num_cells * num_labels non-negative entries summing to one
  // within kNormalizationTolerance.
  FiniteJointDistribution(FeatureSpace space, std::size_t num_labels,
                          std::vector<double> mass);

  // Normalizes non-negative weights with a positive total.
  static FiniteJointDistribution FromWeights(FeatureSpace space,
                                             std::size_t num_labels,
                                             std::vector<double> weights);

  const FeatureSpace& space() const { return space_; }
  std::size_t num_labels() const { return num_labels_; }
  std::size_t num_cells() const { return space_.num_cells(); }

  double mass(std::size_t cell, std::size_t label) const {
    return mass_[cell * num_labels_ + label];
  }
  std::span<const double> masses() const { return mass_; }

  // P[A_i] for every label.
  std::vector<double> LabelMasses() const;
  // P|H: mass per feature cell.
  std::vector<double> FeatureMarginal() const;

  // Throws ZeroLabelMass unless every label has positive mass.
  void RequirePositiveLabels(const std::string& role) const;

 private:
  FeatureSpace space_;
  std::size_t num_labels_;
  std::vector<double> mass_;
};

// A partition of the feature cells; the cells generate a sub-sigma-algebra of
// the full feature information.
class FeaturePartition {
 public:
  // Partition by the values of the given features. Cells are numbered
  // row-major over the selected features in the given order. An empty list
  // yields the trivial partition.
  static FeaturePartition FromFeatures(const FeatureSpace& space,
                                       std::vector<std::size_t> features);
  static FeaturePartition FromFeatureNames(
      const FeatureSpace& space, const std::vector<std::string>& names);
  static FeaturePartition Trivial(const FeatureSpace& space);
  static FeaturePartition Full(const FeatureSpace& space);
  // General function-of-features partition. Distinct labeling values become
  // cells, numbered in increasing order of the value.
  static FeaturePartition FromLabeling(
      const FeatureSpace& space,
      const std::function<std::int64_t(std::span<const std::size_t>)>& label);
  // `cell_of` must be total and surjective onto 0..max.
  static FeaturePartition FromCellMap(const FeatureSpace& space,
                                      std::vector<std::size_t> cell_of);
  // Coarsest common refinement.
  static FeaturePartition Join(const FeaturePartition& a,
                               const FeaturePartition& b);

  const FeatureSpace& space() const { return space_; }
  std::size_t num_cells() const { return num_cells_; }
  std::size_t cell_of(std::size_t feature_cell) const {
    return cell_of_[feature_cell];
  }
  std::span<const std::size_t> cell_map() const { return cell_of_; }
  // Feature cells belonging to a partition cell, in increasing order.
  std::span<const std::size_t> members(std::size_t cell) const;

  // True when every cell of *this lies inside one cell of `coarser`.
  bool Refines(const FeaturePartition& coarser) const;

  // Feature indices the partition was built from, when it was built from a
  // feature subset.
  const std::optional<std::vector<std::size_t>>& features() const {
    return features_;
  }

 private:
  FeaturePartition(FeatureSpace space, std::vector<std::size_t> cell_of,
                   std::size_t num_cells,
                   std::optional<std::vector<std::size_t>> features);

  FeatureSpace space_;
  std::vector<std::size_t> cell_of_;
  std::size_t num_cells_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> members_;
  std::optional<std::vector<std::size_t>> features_;
};

// Values over partition cells. Cells whose defining denominator is zero are
// flagged undefined and carry 0 (the 0/0 = 0 convention, made explicit).
struct CellValues {
  std::vector<double> values;
  std::vector<bool> defined;
};

// Per (partition cell, label) table, e.g. P[A_i | F].
class ConditionalTable {
 public:
  ConditionalTable(FeaturePartition partition, std::size_t num_labels,
                   std::vector<double> values, std::vector<bool> defined);

  const FeaturePartition& partition() const { return partition_; }
  std::size_t num_labels() const { return num_labels_; }
  double value(std::size_t cell, std::size_t label) const {
    return values_[cell * num_labels_ + label];
  }
  bool is_defined(std::size_t cell) const { return defined_[cell]; }
  std::span<const double> values() const { return values_; }

 private:
  FeaturePartition partition_;
  std::size_t num_labels_;
  std::vector<double> values_;
  std::vector<bool> defined_;
};

// Mass of each partition cell under a feature-cell table.
std::vector<double> PartitionMasses(std::span<const double> feature_masses,
                                    const FeaturePartition& partition);

// dist[F_n ∩ A_i], indexed n * num_labels + i.
std::vector<double> CellLabelMasses(const FiniteJointDistribution& dist,
                                    const FeaturePartition& partition);

// P_i over feature cells: P[· ∩ A_i] / P[A_i].
std::vector<double> ClassConditional(const FiniteJointDistribution& dist,
                                     std::size_t label);

// dist[A_i | F_n]; cells of zero mass are flagged undefined.
ConditionalTable Posterior(const FiniteJointDistribution& dist,
                           const FeaturePartition& partition);

// q[F_n] / p[F_n]. Throws AbsoluteContinuityViolated (carrying the partition
// cell) when q[F_n] > 0 = p[F_n].
CellValues MarginalDensity(std::span<const double> q_features,
                           const FiniteJointDistribution& p,
                           const FeaturePartition& partition);
CellValues MarginalDensity(const FiniteJointDistribution& q,
                           const FiniteJointDistribution& p,
                           const FeaturePartition& partition);

// Q_i[F_n] / P_i[F_n].
CellValues ClassConditionalDensity(const FiniteJointDistribution& q,
                                   const FiniteJointDistribution& p,
                                   const FeaturePartition& partition,
                                   std::size_t label);

// dQ/dP over (feature cell, label), built as h_i(x) * Q[A_i] / P[A_i].
// Indexed cell * num_labels + label; p-null entries are flagged undefined.
CellValues FullImportanceWeight(const FiniteJointDistribution& q,
                                const FiniteJointDistribution& p);

// Sum p log(p/q) with 0 log 0 = 0; +infinity when q = 0 < p somewhere.
double KlDivergence(std::span<const double> p, std::span<const double> q);

// Throws InvalidArgument unless both distributions live on the same space
// with the same number of labels.
void RequireCompatible(const FiniteJointDistribution& a,
                       const FiniteJointDistribution& b);
// Throws AbsoluteContinuityViolated (carrying the feature cell) when
// q(x, i) > 0 = p(x, i) for some entry.
void RequireAbsolutelyContinuous(const FiniteJointDistribution& q,
                                 const FiniteJointDistribution& p);

}  // namespace sjs

#endif  // SJSLAB_SJS_DISCRETE_H_
