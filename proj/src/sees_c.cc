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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include <Eigen/Dense>

#include "internal.h"
#include "sjs/error.h"
#include "sjs/estimators.h"

namespace sjs {

KlObjective::KlObjective(const FiniteJointDistribution& p,
                         std::span<const double> q_features,
                         const FeaturePartition& f)
    : partition_(f), num_labels_(p.num_labels()) {
  if (!(f.space() == p.space())) {
    throw InvalidArgument("KlObjective: partition does not match the source space");
  }
  p.RequirePositiveLabels("source");
  q_ = internal::NormalizedTargetMarginal(p.space(), q_features);
  const std::size_t l = num_labels_;
  source_priors_ = p.LabelMasses();
  const auto marginal = p.FeatureMarginal();
  for (std::size_t x = 0; x < q_.size(); ++x) {
    if (q_[x] > 0.0 && marginal[x] == 0.0) {
      throw AbsoluteContinuityViolated(
          x, "target marginal has mass on source-null feature cell " +
                 std::to_string(x));
    }
  }
  scaled_posterior_.assign(p.num_cells() * l, 0.0);
  for (std::size_t x = 0; x < p.num_cells(); ++x) {
    if (!(marginal[x] > 0.0)) continue;
    for (std::size_t i = 0; i < l; ++i) {
      scaled_posterior_[x * l + i] =
          (p.mass(x, i) / marginal[x]) / source_priors_[i];
    }
  }
  weights_ = CellLabelMasses(p, f);
  for (std::size_t n = 0; n < f.num_cells(); ++n) {
    for (std::size_t i = 0; i < l; ++i) weights_[n * l + i] /= source_priors_[i];
  }
}

std::vector<double> KlObjective::FittedDensity(std::span<const double> phi) const {
  const std::size_t l = num_labels_;
  std::vector<double> s(q_.size(), 0.0);
  for (std::size_t x = 0; x < q_.size(); ++x) {
    const std::size_t n = partition_.cell_of(x);
    double v = 0.0;
    for (std::size_t i = 0; i < l; ++i) {
      v += phi[n * l + i] * scaled_posterior_[x * l + i];
    }
    s[x] = v;
  }
  return s;
}

double KlObjective::Value(std::span<const double> phi) const {
  const auto s = FittedDensity(phi);
  double total = 0.0;
  for (std::size_t x = 0; x < q_.size(); ++x) {
    if (q_[x] == 0.0) continue;
    if (!(s[x] > 0.0)) return -std::numeric_limits<double>::infinity();
    total += q_[x] * std::log(s[x]);
  }
  return total;
}

double KlObjective::Increment(std::span<const double> phi,
                              std::span<const double> step) const {
  const auto s = FittedDensity(phi);
  const auto ds = FittedDensity(step);
  double total = 0.0;
  for (std::size_t x = 0; x < q_.size(); ++x) {
    if (q_[x] == 0.0) continue;
    if (!(s[x] + ds[x] > 0.0)) return -std::numeric_limits<double>::infinity();
    total += q_[x] * std::log1p(ds[x] / s[x]);
  }
  return total;
}

std::vector<double> KlObjective::Gradient(std::span<const double> phi) const {
  const std::size_t l = num_labels_;
  const auto s = FittedDensity(phi);
  std::vector<double> g(weights_.size(), 0.0);
  for (std::size_t x = 0; x < q_.size(); ++x) {
    if (q_[x] == 0.0) continue;
    const std::size_t n = partition_.cell_of(x);
    const double scale = q_[x] / s[x];
    for (std::size_t i = 0; i < l; ++i) {
      g[n * l + i] += scale * scaled_posterior_[x * l + i];
    }
  }
  return g;
}

std::vector<double> KlObjective::NegativeHessianBlocks(
    std::span<const double> phi) const {
  const std::size_t l = num_labels_;
  const auto s = FittedDensity(phi);
  std::vector<double> h(partition_.num_cells() * l * l, 0.0);
  for (std::size_t x = 0; x < q_.size(); ++x) {
    if (q_[x] == 0.0) continue;
    const double scale = q_[x] / (s[x] * s[x]);
    double* block = &h[partition_.cell_of(x) * l * l];
    const double* a = &scaled_posterior_[x * l];
    for (std::size_t i = 0; i < l; ++i) {
      for (std::size_t j = 0; j < l; ++j) block[i * l + j] += scale * a[i] * a[j];
    }
  }
  return h;
}

double KlObjective::Constraint(std::span<const double> phi) const {
  double total = 0.0;
  for (std::size_t k = 0; k < weights_.size(); ++k) total += phi[k] * weights_[k];
  return total;
}

std::vector<double> KlObjective::InitialPoint() const {
  const std::size_t l = num_labels_;
  std::vector<double> phi(weights_.size(), 0.0);
  for (std::size_t k = 0; k < phi.size(); ++k) {
    if (weights_[k] > 0.0) phi[k] = source_priors_[k % l];
  }
  return phi;
}

std::vector<double> KlObjective::Project(std::span<const double> y) const {
  // phi_k = max(0, y_k - lambda c_k) with lambda solving sum_k c_k phi_k = 1.
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    if (weights_[k] > 0.0) order.push_back(k);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ta = y[a] / weights_[a];
    const double tb = y[b] / weights_[b];
    return ta != tb ? ta > tb : a < b;
  });
  double lambda = 0.0;
  double cy = 0.0;
  double cc = 0.0;
  for (std::size_t j = 0; j < order.size(); ++j) {
    const std::size_t k = order[j];
    cy += weights_[k] * y[k];
    cc += weights_[k] * weights_[k];
    lambda = (cy - 1.0) / cc;
    const bool last = j + 1 == order.size();
    if (last || lambda >= y[order[j + 1]] / weights_[order[j + 1]]) break;
  }
  std::vector<double> phi(weights_.size(), 0.0);
  for (std::size_t k : order) phi[k] = std::max(0.0, y[k] - lambda * weights_[k]);
  return phi;
}

namespace {

double Dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double ProjectedGradientNorm(const KlObjective& objective,
                             std::span<const double> phi,
                             std::span<const double> grad) {
  std::vector<double> y(phi.size());
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = phi[k] + grad[k];
  const auto projected = objective.Project(y);
  double sum = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double d = projected[k] - phi[k];
    sum += d * d;
  }
  return std::sqrt(sum);
}

// Newton direction for the equality-constrained quadratic model on the free
// coordinates; bound coordinates are sent to zero. Blocks are regularized
// so that flat directions (unidentified cells) stay bounded. Returns the
// target point, or nothing when the system cannot be solved.
std::optional<std::vector<double>> NewtonTarget(const KlObjective& objective,
                                                std::span<const double> phi,
                                                std::span<const double> grad) {
  const std::size_t l = objective.num_labels();
  const std::size_t cells = objective.partition().num_cells();
  const auto w = objective.constraint_weights();
  const auto h = objective.NegativeHessianBlocks(phi);
  const double scale = Dot(w, phi);
  // At a KKT point the multiplier of the constraint is sum_x q(x) = 1 when
  // Constraint = 1; bound coordinates have gradient below it.
  std::vector<bool> free(phi.size(), false);
  for (std::size_t k = 0; k < phi.size(); ++k) {
    if (!(w[k] > 0.0)) continue;
    free[k] = phi[k] > 1e-12 * scale || grad[k] * scale > w[k];
  }
  // d_n = M_n^{-1} (g_n - nu w_n) on each block, nu from sum w.d = 1 - w.phi'.
  std::vector<Eigen::MatrixXd> solves;
  std::vector<Eigen::VectorXd> mg(cells), mw(cells);
  double wmg = 0.0, wmw = 0.0, residual = 1.0;
  for (std::size_t n = 0; n < cells; ++n) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < l; ++i) {
      if (free[n * l + i]) idx.push_back(i);
    }
    mg[n] = Eigen::VectorXd::Zero(idx.size());
    mw[n] = Eigen::VectorXd::Zero(idx.size());
    if (idx.empty()) continue;
    const Eigen::Index k = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd m(k, k);
    Eigen::VectorXd g(k), wn(k);
    double diag = 0.0;
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < k; ++b) m(a, b) = h[n * l * l + idx[a] * l + idx[b]];
      diag = std::max(diag, m(a, a));
      g(a) = grad[n * l + idx[a]];
      wn(a) = w[n * l + idx[a]];
      residual -= wn(a) * phi[n * l + idx[a]];
    }
    m.diagonal().array() += 1e-12 * std::max(diag, 1e-300);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
    if (ldlt.info() != Eigen::Success) return std::nullopt;
    mg[n] = ldlt.solve(g);
    mw[n] = ldlt.solve(wn);
    wmg += wn.dot(mg[n]);
    wmw += wn.dot(mw[n]);
  }
  if (!(wmw > 0.0)) return std::nullopt;
  const double nu = (wmg - residual) / wmw;
  std::vector<double> target(phi.size(), 0.0);
  for (std::size_t n = 0; n < cells; ++n) {
    Eigen::Index a = 0;
    for (std::size_t i = 0; i < l; ++i) {
      const std::size_t kk = n * l + i;
      if (!free[kk]) continue;
      target[kk] = phi[kk] + mg[n](a) - nu * mw[n](a);
      ++a;
    }
  }
  for (double v : target) {
    if (!std::isfinite(v)) return std::nullopt;
  }
  return objective.Project(target);
}

constexpr double kArmijo = 1e-4;
constexpr double kMinStep = 1e-12;
constexpr double kMaxStep = 1e12;

}  // namespace

SjsFit SeesCFit(const FiniteJointDistribution& p,
                std::span<const double> q_features, const FeaturePartition& f,
                const SeesCOptions& options) {
  const KlObjective objective(p, q_features, f);
  const auto q = internal::NormalizedTargetMarginal(p.space(), q_features);
  const std::size_t dim = objective.dimension();

  std::vector<double> phi = objective.InitialPoint();
  double value = objective.Value(phi);
  if (!std::isfinite(value)) {
    throw DegenerateObjective("SEES-c objective is -infinity on the feasible set");
  }
  std::vector<double> grad = objective.Gradient(phi);

  FitDiagnostics diag;
  if (options.record_trace) {
    diag.objective_trace.push_back(value);
    diag.constraint_trace.push_back(objective.Constraint(phi));
  }

  const auto weights = objective.constraint_weights();
  double alpha = 1.0;
  double pg_norm = ProjectedGradientNorm(objective, phi, grad);
  std::vector<double> trial(dim), step(dim), next(dim);
  // Value - log(Constraint) equals the objective on the feasible set and is
  // blind to the rounding drift along the constraint normal, which would
  // otherwise swamp slopes and gains near the optimum. Near the optimum the
  // gains also drop below the rounding of the absolute objective, so steps
  // are judged, and the value advanced, by the log1p increment.
  double gain = 0.0;
  auto search = [&](std::span<const double> target, double min_t, bool need_ascent) {
    std::vector<double> direction(dim);
    for (std::size_t k = 0; k < dim; ++k) direction[k] = target[k] - phi[k];
    const double scale = Dot(weights, phi);
    const double slope = Dot(grad, direction) - Dot(weights, direction) / scale;
    if (need_ascent && !(slope > 0.0)) return false;
    for (double t = 1.0; t > min_t; t *= 0.5) {
      for (std::size_t k = 0; k < dim; ++k) step[k] = t * direction[k];
      gain = objective.Increment(phi, step) - std::log1p(Dot(weights, step) / scale);
      if (!(gain >= kArmijo * t * slope) || !(gain >= 0.0)) continue;
      for (std::size_t k = 0; k < dim; ++k) next[k] = phi[k] + step[k];
      return true;
    }
    return false;
  };
  while (pg_norm >= options.tol && diag.iterations < options.max_iter) {
    // Newton first; the spectral projected gradient step is the fallback and
    // carries the convergence guarantee.
    const auto newton = NewtonTarget(objective, phi, grad);
    bool accepted = newton && search(*newton, 1e-3, true);
    if (!accepted) {
      for (std::size_t k = 0; k < dim; ++k) trial[k] = phi[k] + alpha * grad[k];
      accepted = search(objective.Project(trial), 1e-20, false);
    }
    if (!accepted) break;
    const double next_value = value + gain;

    auto next_grad = objective.Gradient(next);
    double ss = 0.0;
    double sy = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double s = next[k] - phi[k];
      ss += s * s;
      sy += s * (next_grad[k] - grad[k]);
    }
    // Spectral step for ascent on a concave objective.
    alpha = sy < 0.0 ? std::clamp(ss / -sy, kMinStep, kMaxStep) : kMaxStep;

    phi.swap(next);
    grad.swap(next_grad);
    value = next_value;
    ++diag.iterations;
    if (options.record_trace) {
      diag.objective_trace.push_back(value);
      diag.constraint_trace.push_back(objective.Constraint(phi));
    }
    pg_norm = ProjectedGradientNorm(objective, phi, grad);
  }
  diag.projected_gradient_norm = pg_norm;
  diag.converged = pg_norm < options.tol;
  diag.objective = objective.Value(phi);

  std::vector<double> masses(dim);
  for (std::size_t k = 0; k < dim; ++k) masses[k] = phi[k] * weights[k];
  auto fit = FitFromCellMasses(p, q, f, std::move(masses), FitMethod::kSeesC);
  diag.kl_residual = fit.diagnostics.kl_residual;
  fit.residual = diag.kl_residual;
  fit.diagnostics = std::move(diag);
  return fit;
}

}  // namespace sjs
