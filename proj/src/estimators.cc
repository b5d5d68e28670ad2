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
#include <limits>
#include <map>
#include <utility>

#include <Eigen/Dense>

#include "sjs/error.h"
#include "sjs/nnls.h"
#include "internal.h"

namespace sjs {

std::string FitMethodName(FitMethod method) {
  switch (method) {
    case FitMethod::kSeesD:
      return "sees-d";
    case FitMethod::kSeesC:
      return "sees-c";
    case FitMethod::kConditionalConfusion:
      return "confusion";
  }
  return "unknown";
}

FitMethod ParseFitMethod(const std::string& name) {
  if (name == "sees-d") return FitMethod::kSeesD;
  if (name == "sees-c") return FitMethod::kSeesC;
  if (name == "confusion") return FitMethod::kConditionalConfusion;
  throw InvalidArgument("unknown method '" + name +
                        "' (expected sees-c, sees-d or confusion)");
}

namespace internal {

std::vector<double> NormalizedTargetMarginal(const FeatureSpace& space,
                                             std::span<const double> q) {
  if (q.size() != space.num_cells()) {
    throw InvalidArgument("target marginal has " + std::to_string(q.size()) +
                          " cells, expected " +
                          std::to_string(space.num_cells()));
  }
  double total = 0.0;
  for (double v : q) {
    if (!std::isfinite(v) || v < 0.0) {
      throw InvalidArgument("target marginal must be finite and non-negative");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidArgument("target marginal sums to " + std::to_string(total));
  }
  std::vector<double> out(q.begin(), q.end());
  for (double& v : out) v /= total;
  return out;
}

}  // namespace internal

// ---------------------------------------------------------------------------

HardClassifier::HardClassifier(std::vector<std::size_t> assignment,
                               std::size_t num_labels)
    : assignment_(std::move(assignment)), num_labels_(num_labels) {
  for (std::size_t label : assignment_) {
    if (label >= num_labels_) {
      throw InvalidArgument("HardClassifier: label out of range");
    }
  }
}

FeaturePartition HardClassifier::Regions(const FeatureSpace& space) const {
  if (assignment_.size() != space.num_cells()) {
    throw InvalidArgument("HardClassifier: assignment does not cover the space");
  }
  return FeaturePartition::FromLabeling(
      space, [&](std::span<const std::size_t> coords) {
        return static_cast<std::int64_t>(assignment_[space.Encode(coords)]);
      });
}

HardClassifier TrainArgmaxClassifier(const FiniteJointDistribution& p) {
  std::vector<std::size_t> assignment(p.num_cells(), 0);
  for (std::size_t x = 0; x < p.num_cells(); ++x) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.num_labels(); ++i) {
      // Joint masses order labels exactly like posteriors within a cell.
      if (p.mass(x, i) > p.mass(x, best)) best = i;
    }
    assignment[x] = best;
  }
  return HardClassifier(std::move(assignment), p.num_labels());
}

// ---------------------------------------------------------------------------

ConditionalTable PriorRatiosOnPartition(const FiniteJointDistribution& p,
                                        const FeaturePartition& f,
                                        std::span<const double> cell_label_mass) {
  const std::size_t l = p.num_labels();
  if (cell_label_mass.size() != f.num_cells() * l) {
    throw InvalidArgument("cell/label mass table does not match the partition");
  }
  const auto p_cells = CellLabelMasses(p, f);
  std::vector<double> values(f.num_cells() * l, 0.0);
  std::vector<bool> defined(f.num_cells(), false);
  for (std::size_t n = 0; n < f.num_cells(); ++n) {
    double q_n = 0.0;
    double p_n = 0.0;
    for (std::size_t i = 0; i < l; ++i) {
      q_n += cell_label_mass[n * l + i];
      p_n += p_cells[n * l + i];
    }
    if (!(q_n > 0.0) || !(p_n > 0.0)) continue;
    defined[n] = true;
    for (std::size_t i = 0; i < l; ++i) {
      const double p_post = p_cells[n * l + i] / p_n;
      // 0/0 = 0: the label is absent from the cell under the source.
      values[n * l + i] =
          p_post > 0.0 ? (cell_label_mass[n * l + i] / q_n) / p_post : 0.0;
    }
  }
  return ConditionalTable(f, l, std::move(values), std::move(defined));
}

ConditionalTable PosteriorCorrect(const FiniteJointDistribution& p,
                                  const ConditionalTable& ratios_on_f) {
  const auto& f = ratios_on_f.partition();
  if (!(f.space() == p.space()) || ratios_on_f.num_labels() != p.num_labels()) {
    throw InvalidArgument("PosteriorCorrect: ratio table does not match source");
  }
  const std::size_t l = p.num_labels();
  const auto full = FeaturePartition::Full(p.space());
  const auto source_post = Posterior(p, full);
  std::vector<double> values(p.num_cells() * l, 0.0);
  std::vector<bool> defined(p.num_cells(), false);
  for (std::size_t x = 0; x < p.num_cells(); ++x) {
    const std::size_t n = f.cell_of(x);
    if (!source_post.is_defined(x) || !ratios_on_f.is_defined(n)) continue;
    double denom = 0.0;
    for (std::size_t i = 0; i < l; ++i) {
      const double w = ratios_on_f.value(n, i) * source_post.value(x, i);
      values[x * l + i] = w;
      denom += w;
    }
    if (denom > 0.0) {
      defined[x] = true;
      for (std::size_t i = 0; i < l; ++i) values[x * l + i] /= denom;
    } else {
      // Zero denominator: only possible on target-null cells.
      for (std::size_t i = 0; i < l; ++i) values[x * l + i] = 0.0;
    }
  }
  return ConditionalTable(full, l, std::move(values), std::move(defined));
}

ConditionalTable PosteriorCorrect(const FiniteJointDistribution& p,
                                  const SjsFit& fit) {
  return PosteriorCorrect(
      p, PriorRatiosOnPartition(p, fit.partition, fit.cell_label_mass));
}

namespace {

// sum_i p(x, i) Q[F_n ∩ A_i] / P[F_n ∩ A_i] per feature cell.
std::vector<double> FittedFeatureMarginal(const FiniteJointDistribution& p,
                                          const FeaturePartition& f,
                                          std::span<const double> cell_label_mass) {
  const std::size_t l = p.num_labels();
  const auto p_cells = CellLabelMasses(p, f);
  std::vector<double> out(p.num_cells(), 0.0);
  for (std::size_t x = 0; x < p.num_cells(); ++x) {
    const std::size_t n = f.cell_of(x);
    for (std::size_t i = 0; i < l; ++i) {
      const double denom = p_cells[n * l + i];
      if (denom > 0.0) out[x] += p.mass(x, i) * cell_label_mass[n * l + i] / denom;
    }
  }
  return out;
}

}  // namespace

SjsFit FitFromCellMasses(const FiniteJointDistribution& p,
                         std::span<const double> q_features,
                         const FeaturePartition& f,
                         std::vector<double> cell_label_mass, FitMethod method) {
  const std::size_t l = p.num_labels();
  const auto p_labels = p.LabelMasses();
  const auto p_cells = CellLabelMasses(p, f);

  std::vector<double> priors(l, 0.0);
  for (std::size_t n = 0; n < f.num_cells(); ++n) {
    for (std::size_t i = 0; i < l; ++i) priors[i] += cell_label_mass[n * l + i];
  }
  std::vector<double> ratios(f.num_cells() * l, 0.0);
  for (std::size_t n = 0; n < f.num_cells(); ++n) {
    for (std::size_t i = 0; i < l; ++i) {
      if (priors[i] > 0.0 && p_cells[n * l + i] > 0.0) {
        ratios[n * l + i] = (cell_label_mass[n * l + i] / priors[i]) /
                            (p_cells[n * l + i] / p_labels[i]);
      }
    }
  }
  auto corrected = PosteriorCorrect(
      p, PriorRatiosOnPartition(p, f, cell_label_mass));
  const auto fitted = FittedFeatureMarginal(p, f, cell_label_mass);

  SjsFit fit{f,
             l,
             std::move(cell_label_mass),
             std::move(priors),
             std::move(ratios),
             std::move(corrected),
             0.0,
             method,
             {}};
  // Both tables are distributions, so the divergence is non-negative; exact
  // fits round to a few ulps either side of zero.
  fit.diagnostics.kl_residual = std::max(0.0, KlDivergence(q_features, fitted));
  return fit;
}

FiniteJointDistribution ReconstructTarget(const FiniteJointDistribution& p,
                                          const SjsFit& fit) {
  const auto& f = fit.partition;
  if (!(f.space() == p.space()) || fit.num_labels != p.num_labels()) {
    throw InvalidArgument("ReconstructTarget: fit does not match the source");
  }
  const std::size_t l = p.num_labels();
  const auto p_cells = CellLabelMasses(p, f);
  std::vector<double> weights(p.num_cells() * l, 0.0);
  for (std::size_t x = 0; x < p.num_cells(); ++x) {
    const std::size_t n = f.cell_of(x);
    for (std::size_t i = 0; i < l; ++i) {
      const double denom = p_cells[n * l + i];
      if (denom > 0.0) {
        weights[x * l + i] = p.mass(x, i) * fit.cell_label_mass[n * l + i] / denom;
      }
    }
  }
  return FiniteJointDistribution::FromWeights(p.space(), l, std::move(weights));
}

// ---------------------------------------------------------------------------

namespace {

// Solution of A x = b closest to `anchor` among least-squares solutions,
// kept non-negative. Used when the per-cell system is rank deficient.
Eigen::VectorXd AnchoredSolution(const Eigen::MatrixXd& a,
                                 const Eigen::VectorXd& b,
                                 const Eigen::VectorXd& anchor,
                                 double rank_threshold) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sigma = svd.singularValues();
  const double cutoff = sigma.size() ? sigma(0) * a.cols() * rank_threshold : 0.0;
  Eigen::Index rank = 0;
  while (rank < sigma.size() && sigma(rank) > cutoff && sigma(rank) > 0.0) ++rank;
  Eigen::VectorXd least_norm = Eigen::VectorXd::Zero(a.cols());
  for (Eigen::Index k = 0; k < rank; ++k) {
    least_norm += svd.matrixV().col(k) * (svd.matrixU().col(k).dot(b) / sigma(k));
  }
  const Eigen::MatrixXd null = svd.matrixV().rightCols(a.cols() - rank);
  Eigen::VectorXd x = least_norm + null * (null.transpose() * (anchor - least_norm));
  const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
  if (x.minCoeff() >= -1e-14 * scale) return x.cwiseMax(0.0);

  // The closest solution leaves the orthant: trade a tiny amount of fit for
  // proximity to the anchor.
  const double ridge = std::sqrt(1e-8) * std::max(1.0, sigma.size() ? sigma(0) : 1.0);
  Eigen::MatrixXd stacked(a.rows() + a.cols(), a.cols());
  stacked << a, ridge * Eigen::MatrixXd::Identity(a.cols(), a.cols());
  Eigen::VectorXd rhs(a.rows() + a.cols());
  rhs << b, ridge * anchor;
  return SolveNnls(stacked, rhs).x;
}

}  // namespace

SjsFit SeesDFit(const FiniteJointDistribution& p,
                std::span<const double> q_features, const FeaturePartition& f,
                const std::optional<FeaturePartition>& h_prime,
                const SeesDOptions& options) {
  if (!(f.space() == p.space())) {
    throw InvalidArgument("SeesDFit: partition does not match the source space");
  }
  p.RequirePositiveLabels("source");
  const auto q = internal::NormalizedTargetMarginal(p.space(), q_features);
  const FeaturePartition fine = h_prime ? *h_prime : FeaturePartition::Full(p.space());
  if (!fine.Refines(f)) {
    throw InvalidArgument("SeesDFit: h_prime must refine the shift partition");
  }
  const std::size_t l = p.num_labels();

  const auto density = MarginalDensity(q, p, fine);  // throws on q ≪ p failure
  const auto fine_post = Posterior(p, fine);
  const auto fine_mass = PartitionMasses(p.FeatureMarginal(), fine);
  const auto p_cells = CellLabelMasses(p, f);
  const auto q_cells = PartitionMasses(q, f);
  const auto p_cell_total = PartitionMasses(p.FeatureMarginal(), f);

  std::vector<std::vector<std::size_t>> rows_of(f.num_cells());
  for (std::size_t r = 0; r < fine.num_cells(); ++r) {
    const auto members = fine.members(r);
    if (members.empty() || !(fine_mass[r] > 0.0)) continue;
    rows_of[f.cell_of(members.front())].push_back(r);
  }

  std::vector<double> masses(f.num_cells() * l, 0.0);
  std::vector<std::size_t> underdetermined;
  double residual = 0.0;

  for (std::size_t n = 0; n < f.num_cells(); ++n) {
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < l; ++i) {
      if (p_cells[n * l + i] > 0.0) active.push_back(i);
    }
    const auto& rows = rows_of[n];
    if (active.empty() || rows.empty()) continue;

    const auto m = static_cast<Eigen::Index>(rows.size());
    const auto k = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd a(m, k);
    Eigen::VectorXd b(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      for (Eigen::Index c = 0; c < k; ++c) {
        a(r, c) = fine_post.value(rows[r], active[c]) / p_cells[n * l + active[c]];
      }
      b(r) = density.values[rows[r]];
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const auto& sigma = svd.singularValues();
    const double cutoff = sigma(0) * k * options.rank_threshold;
    Eigen::Index rank = 0;
    for (Eigen::Index s = 0; s < sigma.size(); ++s) {
      if (sigma(s) > cutoff && sigma(s) > 0.0) ++rank;
    }

    Eigen::VectorXd x;
    if (rank < k) {
      underdetermined.push_back(n);
      Eigen::VectorXd anchor(k);
      for (Eigen::Index c = 0; c < k; ++c) {
        anchor(c) = p_cells[n * l + active[c]] * q_cells[n] / p_cell_total[n];
      }
      x = AnchoredSolution(a, b, anchor, options.rank_threshold);
    } else {
      x = SolveNnls(a, b).x;
    }
    // The cell's target mass is observed directly; hold the solution to it.
    const double total = x.sum();
    if (total > 0.0) x *= q_cells[n] / total;
    residual += (a * x - b).squaredNorm();
    for (Eigen::Index c = 0; c < k; ++c) masses[n * l + active[c]] = x(c);
  }

  auto fit = FitFromCellMasses(p, q, f, std::move(masses), FitMethod::kSeesD);
  fit.residual = residual;
  fit.diagnostics.underdetermined_cells = std::move(underdetermined);
  return fit;
}

SjsFit SeesDFitWithClassifier(const FiniteJointDistribution& p,
                              std::span<const double> q_features,
                              const FeaturePartition& f,
                              const std::optional<FeaturePartition>& h_prime,
                              const HardClassifier& classifier,
                              const SeesDOptions& options) {
  const FeaturePartition base = h_prime ? *h_prime : FeaturePartition::Full(p.space());
  const auto augmented = FeaturePartition::Join(base, classifier.Regions(p.space()));
  return SeesDFit(p, q_features, f, augmented, options);
}

SjsFit ConditionalConfusionFit(const FiniteJointDistribution& p,
                               std::span<const double> q_features,
                               const FeaturePartition& f,
                               const SeesDOptions& options) {
  auto fit = SeesDFitWithClassifier(p, q_features, f, f,
                                    TrainArgmaxClassifier(p), options);
  fit.method = FitMethod::kConditionalConfusion;
  return fit;
}

// ---------------------------------------------------------------------------

namespace {

SubsetResult EvaluateSubset(const FiniteJointDistribution& p,
                            std::span<const double> q,
                            std::vector<std::size_t> features, double penalty,
                            const SparsityOptions& options) {
  SubsetResult result;
  result.features = std::move(features);
  try {
    const auto f = FeaturePartition::FromFeatures(p.space(), result.features);
    SjsFit fit = [&] {
      switch (options.method) {
        case FitMethod::kSeesC:
          return SeesCFit(p, q, f, options.sees_c);
        case FitMethod::kConditionalConfusion:
          return ConditionalConfusionFit(p, q, f, options.sees_d);
        case FitMethod::kSeesD:
          break;
      }
      return SeesDFit(p, q, f, std::nullopt, options.sees_d);
    }();
    result.kl_residual = fit.diagnostics.kl_residual;
    result.penalized_objective =
        result.kl_residual + penalty * static_cast<double>(result.features.size());
    result.fit = std::move(fit);
  } catch (const Error& e) {
    result.error = e.what();
    result.kl_residual = std::numeric_limits<double>::infinity();
    result.penalized_objective = std::numeric_limits<double>::infinity();
  }
  return result;
}

bool Better(const SubsetResult& a, const SubsetResult& b) {
  if (a.penalized_objective != b.penalized_objective) {
    return a.penalized_objective < b.penalized_objective;
  }
  if (a.features.size() != b.features.size()) {
    return a.features.size() < b.features.size();
  }
  return a.features < b.features;
}

}  // namespace

std::vector<SubsetResult> SparsitySearch(const FiniteJointDistribution& p,
                                         std::span<const double> q_features,
                                         const std::vector<std::size_t>& candidates,
                                         double penalty,
                                         const SparsityOptions& options) {
  if (penalty < 0.0 || !std::isfinite(penalty)) {
    throw InvalidArgument("SparsitySearch: penalty must be finite and non-negative");
  }
  std::vector<std::size_t> base(candidates.begin(), candidates.end());
  std::sort(base.begin(), base.end());
  if (std::adjacent_find(base.begin(), base.end()) != base.end()) {
    throw InvalidArgument("SparsitySearch: duplicate candidate feature");
  }
  for (std::size_t k : base) {
    if (k >= p.space().num_features()) {
      throw InvalidArgument("SparsitySearch: candidate feature out of range");
    }
  }
  const auto q = internal::NormalizedTargetMarginal(p.space(), q_features);

  std::map<std::vector<std::size_t>, SubsetResult> evaluated;
  auto evaluate = [&](const std::vector<std::size_t>& subset) -> const SubsetResult& {
    auto it = evaluated.find(subset);
    if (it == evaluated.end()) {
      it = evaluated.emplace(subset, EvaluateSubset(p, q, subset, penalty, options))
               .first;
    }
    return it->second;
  };
  auto children = [](const std::vector<std::size_t>& subset) {
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t drop = 0; drop < subset.size(); ++drop) {
      std::vector<std::size_t> child;
      for (std::size_t k = 0; k < subset.size(); ++k) {
        if (k != drop) child.push_back(subset[k]);
      }
      out.push_back(std::move(child));
    }
    return out;
  };

  const SubsetResult* current = &evaluate(base);
  const SubsetResult* best_child = nullptr;
  for (const auto& child : children(base)) {
    const auto& r = evaluate(child);
    if (!best_child || Better(r, *best_child)) best_child = &r;
  }
  if (best_child) current = best_child;
  while (!current->features.empty()) {
    const SubsetResult* next = nullptr;
    for (const auto& child : children(current->features)) {
      const auto& r = evaluate(child);
      if (!next || Better(r, *next)) next = &r;
    }
    if (!(next->penalized_objective < current->penalized_objective)) break;
    current = next;
  }

  std::vector<SubsetResult> ranked;
  ranked.reserve(evaluated.size());
  for (auto& [key, value] : evaluated) ranked.push_back(std::move(value));
  std::sort(ranked.begin(), ranked.end(), Better);
  return ranked;
}

}  // namespace sjs
