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

#include "sjs/oracle.h"

#include <algorithm>
#include <functional>
#include <cmath>
#include <utility>

#include <Eigen/Dense>

#include "sjs/error.h"
#include "sjs/random.h"

namespace sjs {

PlantedInstance PlantSjs(const FiniteJointDistribution& source,
                         const FeaturePartition& f,
                         std::vector<double> new_priors,
                         std::optional<std::vector<double>> cell_ratios,
                         std::uint64_t seed) {
  if (!(f.space() == source.space())) {
    throw InvalidArgument("PlantSjs: partition does not match the source space");
  }
  source.RequirePositiveLabels("source");
  const std::size_t l = source.num_labels();
  if (new_priors.size() != l) {
    throw InvalidArgument("PlantSjs: expected one prior per label");
  }
  double prior_total = 0.0;
  for (double v : new_priors) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidArgument("PlantSjs: priors must be positive");
    }
    prior_total += v;
  }
  if (std::abs(prior_total - 1.0) > 1e-9) {
    throw InvalidArgument("PlantSjs: priors must sum to 1");
  }
  for (double& v : new_priors) v /= prior_total;

  std::vector<double> ratios;
  if (cell_ratios) {
    ratios = std::move(*cell_ratios);
    if (ratios.size() != f.num_cells() * l) {
      throw InvalidArgument("PlantSjs: expected one ratio per (cell, label)");
    }
    for (double r : ratios) {
      if (!(r >= 0.0) || !std::isfinite(r)) {
        throw InvalidArgument("PlantSjs: ratios must be non-negative");
      }
    }
  } else {
    Rng rng(seed);
    ratios.resize(f.num_cells() * l);
    for (double& r : ratios) r = std::exp(rng.Uniform(-std::log(4.0), std::log(4.0)));
  }

  const auto p_labels = source.LabelMasses();
  const auto p_cells = CellLabelMasses(source, f);
  for (std::size_t i = 0; i < l; ++i) {
    double expectation = 0.0;  // E_{P_i}[r_i]
    for (std::size_t n = 0; n < f.num_cells(); ++n) {
      expectation += p_cells[n * l + i] / p_labels[i] * ratios[n * l + i];
    }
    if (!(expectation > 0.0)) {
      throw InfeasibleRatios("PlantSjs: ratios of label " + std::to_string(i) +
                             " vanish on its source support");
    }
    for (std::size_t n = 0; n < f.num_cells(); ++n) ratios[n * l + i] /= expectation;
  }

  std::vector<double> weights(source.num_cells() * l);
  for (std::size_t x = 0; x < source.num_cells(); ++x) {
    const std::size_t n = f.cell_of(x);
    for (std::size_t i = 0; i < l; ++i) {
      weights[x * l + i] =
          source.mass(x, i) * ratios[n * l + i] * new_priors[i] / p_labels[i];
    }
  }
  std::vector<double> cell_mass(f.num_cells() * l);
  for (std::size_t n = 0; n < f.num_cells(); ++n) {
    for (std::size_t i = 0; i < l; ++i) {
      cell_mass[n * l + i] =
          new_priors[i] * ratios[n * l + i] * p_cells[n * l + i] / p_labels[i];
    }
  }
  auto target = FiniteJointDistribution::FromWeights(source.space(), l,
                                                     std::move(weights));
  return PlantedInstance{source,          std::move(target), f,
                         std::move(new_priors), std::move(ratios),
                         std::move(cell_mass), seed};
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kEquationTolerance = 1e-11;

void Enumerate(std::size_t start, std::size_t remaining,
               std::vector<Eigen::Index>& chosen, std::size_t k,
               const std::function<void(const std::vector<Eigen::Index>&)>& visit) {
  if (remaining == 0) {
    visit(chosen);
    return;
  }
  for (std::size_t c = start; c + remaining <= k; ++c) {
    chosen.push_back(static_cast<Eigen::Index>(c));
    Enumerate(c + 1, remaining - 1, chosen, k, visit);
    chosen.pop_back();
  }
}

}  // namespace

FeasibleSet BruteForceFit(const FiniteJointDistribution& p,
                          std::span<const double> q_features,
                          const FeaturePartition& f) {
  if (!(f.space() == p.space())) {
    throw InvalidArgument("BruteForceFit: partition does not match the source");
  }
  if (p.num_cells() > 10'000 || p.num_labels() > 10) {
    throw InvalidArgument("BruteForceFit: instance exceeds desk scale");
  }
  if (q_features.size() != p.num_cells()) {
    throw InvalidArgument("BruteForceFit: target marginal does not match the source");
  }
  const std::size_t l = p.num_labels();
  const auto p_cells = CellLabelMasses(p, f);

  FeasibleSet set;
  set.num_labels = l;
  set.cells.resize(f.num_cells());
  for (std::size_t n = 0; n < f.num_cells(); ++n) {
    auto& cell = set.cells[n];
    for (std::size_t i = 0; i < l; ++i) {
      if (p_cells[n * l + i] > 0.0) cell.active_labels.push_back(i);
    }
    const std::size_t k = cell.active_labels.size();
    for (std::size_t x : f.members(n)) {
      double px = 0.0;
      for (std::size_t i = 0; i < l; ++i) px += p.mass(x, i);
      if (!(px > 0.0)) {
        if (q_features[x] > 0.0) {
          throw AbsoluteContinuityViolated(x, "target charges a source-null cell");
        }
        continue;
      }
      std::vector<double> row(k);
      for (std::size_t c = 0; c < k; ++c) {
        const std::size_t i = cell.active_labels[c];
        row[c] = p.mass(x, i) / p_cells[n * l + i];
      }
      cell.equations.push_back(std::move(row));
      cell.rhs.push_back(q_features[x]);
    }
    if (k == 0) {
      cell.vertices.push_back(std::vector<double>(l, 0.0));
      continue;
    }

    const auto m = static_cast<Eigen::Index>(cell.equations.size());
    Eigen::MatrixXd a(m, static_cast<Eigen::Index>(k));
    Eigen::VectorXd b(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < k; ++c) a(r, c) = cell.equations[r][c];
      b(r) = cell.rhs[r];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    lu.setThreshold(1e-10);
    cell.rank = static_cast<std::size_t>(lu.rank());

    // Basic solutions: the support is a column subset of size rank whose
    // columns are independent.
    std::vector<Eigen::Index> chosen;
    Enumerate(0, cell.rank, chosen, k, [&](const std::vector<Eigen::Index>& cols) {
      Eigen::MatrixXd sub(m, static_cast<Eigen::Index>(cols.size()));
      for (std::size_t c = 0; c < cols.size(); ++c) sub.col(c) = a.col(cols[c]);
      Eigen::FullPivLU<Eigen::MatrixXd> sub_lu(sub);
      sub_lu.setThreshold(1e-10);
      if (static_cast<std::size_t>(sub_lu.rank()) != cols.size()) return;
      const Eigen::VectorXd xs = sub.fullPivHouseholderQr().solve(b);
      if ((sub * xs - b).cwiseAbs().maxCoeff() > kEquationTolerance) return;
      if (xs.size() && xs.minCoeff() < -kEquationTolerance) return;
      std::vector<double> vertex(l, 0.0);
      for (std::size_t c = 0; c < cols.size(); ++c) {
        vertex[cell.active_labels[cols[c]]] = std::max(0.0, xs(c));
      }
      for (const auto& seen : cell.vertices) {
        double d = 0.0;
        for (std::size_t i = 0; i < l; ++i) d = std::max(d, std::abs(seen[i] - vertex[i]));
        if (d <= kEquationTolerance) return;
      }
      cell.vertices.push_back(std::move(vertex));
    });
  }
  return set;
}

bool FeasibleSet::Empty() const {
  return std::any_of(cells.begin(), cells.end(),
                     [](const CellSolutionSet& c) { return c.vertices.empty(); });
}

bool FeasibleSet::IsSingleton() const {
  return std::all_of(cells.begin(), cells.end(),
                     [](const CellSolutionSet& c) { return c.vertices.size() == 1; });
}

bool FeasibleSet::Contains(std::span<const double> cell_label_mass,
                           double tol) const {
  const std::size_t l = num_labels;
  if (cell_label_mass.size() != cells.size() * l) return false;
  for (std::size_t n = 0; n < cells.size(); ++n) {
    const auto& cell = cells[n];
    if (cell.vertices.empty()) return false;
    std::vector<bool> active(l, false);
    for (std::size_t i : cell.active_labels) active[i] = true;
    for (std::size_t i = 0; i < l; ++i) {
      const double v = cell_label_mass[n * l + i];
      if (v < -tol) return false;
      if (!active[i] && std::abs(v) > tol) return false;
    }
    for (std::size_t r = 0; r < cell.equations.size(); ++r) {
      double lhs = 0.0;
      for (std::size_t c = 0; c < cell.active_labels.size(); ++c) {
        lhs += cell.equations[r][c] * cell_label_mass[n * l + cell.active_labels[c]];
      }
      if (std::abs(lhs - cell.rhs[r]) > tol) return false;
    }
  }
  return true;
}

std::vector<double> FeasibleSet::UniqueSolution() const {
  if (!IsSingleton()) throw InvalidArgument("feasible set is not a singleton");
  std::vector<double> out;
  out.reserve(cells.size() * num_labels);
  for (const auto& cell : cells) {
    out.insert(out.end(), cell.vertices.front().begin(), cell.vertices.front().end());
  }
  return out;
}

// ---------------------------------------------------------------------------

double FdGradientCheck(const KlObjective& objective, std::span<const double> phi,
                       double step) {
  if (phi.size() != objective.dimension()) {
    throw InvalidArgument("FdGradientCheck: point has the wrong dimension");
  }
  const auto grad = objective.Gradient(phi);
  std::vector<double> probe(phi.begin(), phi.end());
  auto value_at = [&](std::size_t k, double delta) {
    probe[k] = phi[k] + delta;
    const double v = objective.Value(probe);
    probe[k] = phi[k];
    return v;
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < phi.size(); ++k) {
    double fd;
    if (phi[k] > step) {
      fd = (value_at(k, step) - value_at(k, -step)) / (2.0 * step);
    } else {
      fd = (-3.0 * objective.Value(phi) + 4.0 * value_at(k, step) -
            value_at(k, 2.0 * step)) /
           (2.0 * step);
    }
    const double scale = std::max(std::abs(grad[k]), std::abs(fd));
    if (scale == 0.0) continue;
    worst = std::max(worst, std::abs(fd - grad[k]) / scale);
  }
  return worst;
}

}  // namespace sjs
