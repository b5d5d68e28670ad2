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

#include "sjs/discrete.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>

#include "sjs/error.h"

namespace sjs {

FeatureSpace::FeatureSpace(std::vector<std::string> names,
                           std::vector<std::size_t> cardinalities,
                           std::size_t max_cells)
    : names_(std::move(names)), cardinalities_(std::move(cardinalities)) {
  if (names_.size() != cardinalities_.size()) {
    throw InvalidArgument("FeatureSpace: names and cardinalities differ in size");
  }
  std::set<std::string> seen;
  for (const auto& name : names_) {
    if (name.empty()) throw InvalidArgument("FeatureSpace: empty feature name");
    if (!seen.insert(name).second) {
      throw InvalidArgument("FeatureSpace: duplicate feature name '" + name + "'");
    }
  }
  strides_.assign(cardinalities_.size(), 1);
  num_cells_ = 1;
  for (std::size_t k = cardinalities_.size(); k-- > 0;) {
    if (cardinalities_[k] == 0) {
      throw InvalidArgument("FeatureSpace: cardinality of '" + names_[k] +
                            "' must be at least 1");
    }
    strides_[k] = num_cells_;
    if (num_cells_ > max_cells / cardinalities_[k]) {
      throw InvalidArgument("FeatureSpace: number of cells exceeds the cap of " +
                            std::to_string(max_cells));
    }
    num_cells_ *= cardinalities_[k];
  }
}

std::size_t FeatureSpace::Encode(std::span<const std::size_t> coords) const {
  if (coords.size() != cardinalities_.size()) {
    throw InvalidArgument("FeatureSpace::Encode: wrong number of coordinates");
  }
  std::size_t cell = 0;
  for (std::size_t k = 0; k < coords.size(); ++k) {
    if (coords[k] >= cardinalities_[k]) {
      throw InvalidArgument("FeatureSpace::Encode: value " +
                            std::to_string(coords[k]) + " out of range for '" +
                            names_[k] + "'");
    }
    cell += coords[k] * strides_[k];
  }
  return cell;
}

std::vector<std::size_t> FeatureSpace::Decode(std::size_t cell) const {
  std::vector<std::size_t> coords(cardinalities_.size());
  for (std::size_t k = 0; k < coords.size(); ++k) {
    coords[k] = (cell / strides_[k]) % cardinalities_[k];
  }
  return coords;
}

std::size_t FeatureSpace::Coordinate(std::size_t cell,
                                     std::size_t feature) const {
  return (cell / strides_[feature]) % cardinalities_[feature];
}

std::optional<std::size_t> FeatureSpace::FeatureIndex(
    const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

std::vector<std::size_t> FeatureSpace::FeatureIndices(
    const std::vector<std::string>& names) const {
  std::vector<std::size_t> out;
  out.reserve(names.size());
  for (const auto& name : names) {
    const auto index = FeatureIndex(name);
    if (!index) throw InvalidArgument("unknown feature '" + name + "'");
    out.push_back(*index);
  }
  return out;
}

// ---------------------------------------------------------------------------

FiniteJointDistribution::FiniteJointDistribution(FeatureSpace space,
                                                 std::size_t num_labels,
                                                 std::vector<double> mass)
    : space_(std::move(space)), num_labels_(num_labels), mass_(std::move(mass)) {
  if (num_labels_ < 2) {
    throw InvalidArgument("FiniteJointDistribution: at least two labels required");
  }
  if (mass_.size() != space_.num_cells() * num_labels_) {
    throw InvalidArgument("FiniteJointDistribution: mass table has " +
                          std::to_string(mass_.size()) + " entries, expected " +
                          std::to_string(space_.num_cells() * num_labels_));
  }
  double total = 0.0;
  for (double m : mass_) {
    if (!std::isfinite(m) || m < 0.0) {
      throw InvalidArgument("FiniteJointDistribution: masses must be finite and non-negative");
    }
    total += m;
  }
  if (std::abs(total - 1.0) > kNormalizationTolerance) {
    throw InvalidArgument("FiniteJointDistribution: masses sum to " +
                          std::to_string(total) + ", not 1");
  }
}

FiniteJointDistribution FiniteJointDistribution::FromWeights(
    FeatureSpace space, std::size_t num_labels, std::vector<double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw InvalidArgument("FromWeights: weights must be finite and non-negative");
    }
    total += w;
  }
  if (!(total > 0.0)) throw InvalidArgument("FromWeights: total weight is zero");
  for (double& w : weights) w /= total;
  return FiniteJointDistribution(std::move(space), num_labels, std::move(weights));
}

std::vector<double> FiniteJointDistribution::LabelMasses() const {
  std::vector<double> out(num_labels_, 0.0);
  for (std::size_t x = 0; x < num_cells(); ++x) {
    for (std::size_t i = 0; i < num_labels_; ++i) out[i] += mass(x, i);
  }
  return out;
}

std::vector<double> FiniteJointDistribution::FeatureMarginal() const {
  std::vector<double> out(num_cells(), 0.0);
  for (std::size_t x = 0; x < num_cells(); ++x) {
    for (std::size_t i = 0; i < num_labels_; ++i) out[x] += mass(x, i);
  }
  return out;
}

void FiniteJointDistribution::RequirePositiveLabels(
    const std::string& role) const {
  const auto labels = LabelMasses();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!(labels[i] > 0.0)) {
      throw ZeroLabelMass(i, role + " distribution: label " + std::to_string(i) +
                                 " has zero mass");
    }
  }
}

// ---------------------------------------------------------------------------

FeaturePartition::FeaturePartition(
    FeatureSpace space, std::vector<std::size_t> cell_of, std::size_t num_cells,
    std::optional<std::vector<std::size_t>> features)
    : space_(std::move(space)),
      cell_of_(std::move(cell_of)),
      num_cells_(num_cells),
      features_(std::move(features)) {
  offsets_.assign(num_cells_ + 1, 0);
  for (std::size_t c : cell_of_) ++offsets_[c + 1];
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  members_.resize(cell_of_.size());
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t x = 0; x < cell_of_.size(); ++x) {
    members_[cursor[cell_of_[x]]++] = x;
  }
}

FeaturePartition FeaturePartition::FromFeatures(
    const FeatureSpace& space, std::vector<std::size_t> features) {
  std::set<std::size_t> unique;
  for (std::size_t k : features) {
    if (k >= space.num_features()) {
      throw InvalidArgument("FromFeatures: feature index out of range");
    }
    if (!unique.insert(k).second) {
      throw InvalidArgument("FromFeatures: duplicate feature '" + space.name(k) + "'");
    }
  }
  std::size_t num_cells = 1;
  for (std::size_t k : features) num_cells *= space.cardinality(k);
  std::vector<std::size_t> cell_of(space.num_cells());
  for (std::size_t x = 0; x < space.num_cells(); ++x) {
    std::size_t c = 0;
    for (std::size_t k : features) {
      c = c * space.cardinality(k) + space.Coordinate(x, k);
    }
    cell_of[x] = c;
  }
  return FeaturePartition(space, std::move(cell_of), num_cells,
                          std::move(features));
}

FeaturePartition FeaturePartition::FromFeatureNames(
    const FeatureSpace& space, const std::vector<std::string>& names) {
  return FromFeatures(space, space.FeatureIndices(names));
}

FeaturePartition FeaturePartition::Trivial(const FeatureSpace& space) {
  return FromFeatures(space, {});
}

FeaturePartition FeaturePartition::Full(const FeatureSpace& space) {
  std::vector<std::size_t> all(space.num_features());
  std::iota(all.begin(), all.end(), 0);
  return FromFeatures(space, std::move(all));
}

FeaturePartition FeaturePartition::FromLabeling(
    const FeatureSpace& space,
    const std::function<std::int64_t(std::span<const std::size_t>)>& label) {
  std::vector<std::int64_t> raw(space.num_cells());
  std::set<std::int64_t> distinct;
  for (std::size_t x = 0; x < space.num_cells(); ++x) {
    const auto coords = space.Decode(x);
    raw[x] = label(coords);
    distinct.insert(raw[x]);
  }
  std::map<std::int64_t, std::size_t> index;
  for (std::int64_t v : distinct) index.emplace(v, index.size());
  std::vector<std::size_t> cell_of(space.num_cells());
  for (std::size_t x = 0; x < raw.size(); ++x) cell_of[x] = index.at(raw[x]);
  return FeaturePartition(space, std::move(cell_of), index.size(), std::nullopt);
}

FeaturePartition FeaturePartition::FromCellMap(const FeatureSpace& space,
                                               std::vector<std::size_t> cell_of) {
  if (cell_of.size() != space.num_cells()) {
    throw InvalidArgument("FromCellMap: map must cover every feature cell");
  }
  std::size_t num_cells = 0;
  for (std::size_t c : cell_of) num_cells = std::max(num_cells, c + 1);
  std::vector<bool> hit(num_cells, false);
  for (std::size_t c : cell_of) hit[c] = true;
  if (std::find(hit.begin(), hit.end(), false) != hit.end()) {
    throw InvalidArgument("FromCellMap: map is not surjective onto 0..max");
  }
  return FeaturePartition(space, std::move(cell_of), num_cells, std::nullopt);
}

FeaturePartition FeaturePartition::Join(const FeaturePartition& a,
                                        const FeaturePartition& b) {
  if (!(a.space() == b.space())) {
    throw InvalidArgument("Join: partitions live on different feature spaces");
  }
  if (a.features() && b.features()) {
    // Agreeing on both subsets is agreeing on their union.
    std::set<std::size_t> merged(a.features()->begin(), a.features()->end());
    merged.insert(b.features()->begin(), b.features()->end());
    return FromFeatures(a.space(), {merged.begin(), merged.end()});
  }
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> index;
  for (std::size_t x = 0; x < a.space().num_cells(); ++x) {
    index.emplace(std::make_pair(a.cell_of(x), b.cell_of(x)), 0);
  }
  std::size_t next = 0;
  for (auto& [key, value] : index) value = next++;
  std::vector<std::size_t> cell_of(a.space().num_cells());
  for (std::size_t x = 0; x < cell_of.size(); ++x) {
    cell_of[x] = index.at({a.cell_of(x), b.cell_of(x)});
  }
  return FeaturePartition(a.space(), std::move(cell_of), next, std::nullopt);
}

std::span<const std::size_t> FeaturePartition::members(std::size_t cell) const {
  return std::span<const std::size_t>(members_).subspan(
      offsets_[cell], offsets_[cell + 1] - offsets_[cell]);
}

bool FeaturePartition::Refines(const FeaturePartition& coarser) const {
  if (!(space_ == coarser.space())) return false;
  for (std::size_t c = 0; c < num_cells_; ++c) {
    const auto cell = members(c);
    for (std::size_t x : cell) {
      if (coarser.cell_of(x) != coarser.cell_of(cell.front())) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

ConditionalTable::ConditionalTable(FeaturePartition partition,
                                   std::size_t num_labels,
                                   std::vector<double> values,
                                   std::vector<bool> defined)
    : partition_(std::move(partition)),
      num_labels_(num_labels),
      values_(std::move(values)),
      defined_(std::move(defined)) {
  if (values_.size() != partition_.num_cells() * num_labels_ ||
      defined_.size() != partition_.num_cells()) {
    throw InvalidArgument("ConditionalTable: table size does not match partition");
  }
}

// ---------------------------------------------------------------------------

namespace {

void RequireSameSpace(const FeatureSpace& a, const FeatureSpace& b) {
  if (!(a == b)) throw InvalidArgument("feature spaces differ");
}

std::string CellName(const FeatureSpace& space, std::size_t cell) {
  std::string out = "(";
  const auto coords = space.Decode(cell);
  for (std::size_t k = 0; k < coords.size(); ++k) {
    if (k) out += ", ";
    out += space.name(k) + "=" + std::to_string(coords[k]);
  }
  return out + ")";
}

}  // namespace

void RequireCompatible(const FiniteJointDistribution& a,
                       const FiniteJointDistribution& b) {
  RequireSameSpace(a.space(), b.space());
  if (a.num_labels() != b.num_labels()) {
    throw InvalidArgument("distributions have different numbers of labels");
  }
}

void RequireAbsolutelyContinuous(const FiniteJointDistribution& q,
                                 const FiniteJointDistribution& p) {
  RequireCompatible(q, p);
  for (std::size_t x = 0; x < p.num_cells(); ++x) {
    for (std::size_t i = 0; i < p.num_labels(); ++i) {
      if (q.mass(x, i) > 0.0 && p.mass(x, i) == 0.0) {
        throw AbsoluteContinuityViolated(
            x, "target has mass on source-null cell " + CellName(p.space(), x) +
                   " label " + std::to_string(i));
      }
    }
  }
}

std::vector<double> PartitionMasses(std::span<const double> feature_masses,
                                    const FeaturePartition& partition) {
  if (feature_masses.size() != partition.space().num_cells()) {
    throw InvalidArgument("PartitionMasses: table size does not match space");
  }
  std::vector<double> out(partition.num_cells(), 0.0);
  for (std::size_t x = 0; x < feature_masses.size(); ++x) {
    out[partition.cell_of(x)] += feature_masses[x];
  }
  return out;
}

std::vector<double> CellLabelMasses(const FiniteJointDistribution& dist,
                                    const FeaturePartition& partition) {
  RequireSameSpace(dist.space(), partition.space());
  const std::size_t l = dist.num_labels();
  std::vector<double> out(partition.num_cells() * l, 0.0);
  for (std::size_t x = 0; x < dist.num_cells(); ++x) {
    const std::size_t n = partition.cell_of(x);
    for (std::size_t i = 0; i < l; ++i) out[n * l + i] += dist.mass(x, i);
  }
  return out;
}

std::vector<double> ClassConditional(const FiniteJointDistribution& dist,
                                     std::size_t label) {
  if (label >= dist.num_labels()) {
    throw InvalidArgument("ClassConditional: label out of range");
  }
  const double label_mass = dist.LabelMasses()[label];
  if (!(label_mass > 0.0)) {
    throw ZeroLabelMass(label, "label " + std::to_string(label) + " has zero mass");
  }
  std::vector<double> out(dist.num_cells());
  for (std::size_t x = 0; x < out.size(); ++x) {
    out[x] = dist.mass(x, label) / label_mass;
  }
  return out;
}

ConditionalTable Posterior(const FiniteJointDistribution& dist,
                           const FeaturePartition& partition) {
  const std::size_t l = dist.num_labels();
  auto joint = CellLabelMasses(dist, partition);
  std::vector<bool> defined(partition.num_cells(), false);
  for (std::size_t n = 0; n < partition.num_cells(); ++n) {
    double total = 0.0;
    for (std::size_t i = 0; i < l; ++i) total += joint[n * l + i];
    if (total > 0.0) {
      defined[n] = true;
      for (std::size_t i = 0; i < l; ++i) joint[n * l + i] /= total;
    } else {
      for (std::size_t i = 0; i < l; ++i) joint[n * l + i] = 0.0;
    }
  }
  return ConditionalTable(partition, l, std::move(joint), std::move(defined));
}

CellValues MarginalDensity(std::span<const double> q_features,
                           const FiniteJointDistribution& p,
                           const FeaturePartition& partition) {
  RequireSameSpace(p.space(), partition.space());
  const auto q_cells = PartitionMasses(q_features, partition);
  const auto p_cells = PartitionMasses(p.FeatureMarginal(), partition);
  CellValues out{std::vector<double>(partition.num_cells(), 0.0),
                 std::vector<bool>(partition.num_cells(), false)};
  for (std::size_t n = 0; n < partition.num_cells(); ++n) {
    if (p_cells[n] > 0.0) {
      out.values[n] = q_cells[n] / p_cells[n];
      out.defined[n] = true;
    } else if (q_cells[n] > 0.0) {
      throw AbsoluteContinuityViolated(
          n, "target has mass " + std::to_string(q_cells[n]) +
                 " on source-null partition cell " + std::to_string(n));
    }
  }
  return out;
}

CellValues MarginalDensity(const FiniteJointDistribution& q,
                           const FiniteJointDistribution& p,
                           const FeaturePartition& partition) {
  RequireCompatible(q, p);
  return MarginalDensity(q.FeatureMarginal(), p, partition);
}

CellValues ClassConditionalDensity(const FiniteJointDistribution& q,
                                   const FiniteJointDistribution& p,
                                   const FeaturePartition& partition,
                                   std::size_t label) {
  RequireCompatible(q, p);
  RequireSameSpace(p.space(), partition.space());
  const auto qi = PartitionMasses(ClassConditional(q, label), partition);
  const auto pi = PartitionMasses(ClassConditional(p, label), partition);
  CellValues out{std::vector<double>(partition.num_cells(), 0.0),
                 std::vector<bool>(partition.num_cells(), false)};
  for (std::size_t n = 0; n < partition.num_cells(); ++n) {
    if (pi[n] > 0.0) {
      out.values[n] = qi[n] / pi[n];
      out.defined[n] = true;
    } else if (qi[n] > 0.0) {
      throw AbsoluteContinuityViolated(
          n, "label " + std::to_string(label) +
                 ": target class-conditional has mass on source-null cell " +
                 std::to_string(n));
    }
  }
  return out;
}

CellValues FullImportanceWeight(const FiniteJointDistribution& q,
                                const FiniteJointDistribution& p) {
  RequireAbsolutelyContinuous(q, p);
  const std::size_t l = p.num_labels();
  const auto full = FeaturePartition::Full(p.space());
  const auto q_labels = q.LabelMasses();
  const auto p_labels = p.LabelMasses();
  CellValues out{std::vector<double>(p.num_cells() * l, 0.0),
                 std::vector<bool>(p.num_cells() * l, false)};
  for (std::size_t i = 0; i < l; ++i) {
    if (!(p_labels[i] > 0.0)) continue;  // every entry of the label is p-null
    // With Q[A_i] = 0 the weight is identically zero on the label.
    CellValues h;
    if (q_labels[i] > 0.0) h = ClassConditionalDensity(q, p, full, i);
    const double prior_ratio = q_labels[i] / p_labels[i];
    for (std::size_t x = 0; x < p.num_cells(); ++x) {
      if (p.mass(x, i) == 0.0) continue;
      out.defined[x * l + i] = true;
      // Full partition cells coincide with feature cells.
      out.values[x * l + i] = q_labels[i] > 0.0 ? h.values[x] * prior_ratio : 0.0;
    }
  }
  return out;
}

double KlDivergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw InvalidArgument("KlDivergence: tables differ in size");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] < 0.0 || q[k] < 0.0) {
      throw InvalidArgument("KlDivergence: negative entry");
    }
    if (p[k] == 0.0) continue;
    if (q[k] == 0.0) return std::numeric_limits<double>::infinity();
    total += p[k] * std::log(p[k] / q[k]);
  }
  return total;
}

}  // namespace sjs
