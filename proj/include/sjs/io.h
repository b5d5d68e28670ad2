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

// JSON and CSV encodings of distributions, verdicts and fits.
//
// Distribution JSON:
//   {"features": [{"name": "X1", "cardinality": 2}, ...],
//    "num_labels": 2,
//    "mass": [[x1, x2, ..., label, p], ...]}
// Row order is irrelevant and missing entries are zero. Written files list
// the non-zero entries in cell order and carry sorted object keys.

#ifndef SJSLAB_SJS_IO_H_
#define SJSLAB_SJS_IO_H_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "sjs/discrete.h"
#include "sjs/estimators.h"
#include "sjs/oracle.h"
#include "sjs/shift_analysis.h"

namespace sjs {

// Shortest round-trip decimal; "nan", "inf" and "-inf" for non-finite values.
std::string FormatDouble(double value);

// Loader tolerance: totals within this of 1 are renormalized, others rejected.
inline constexpr double kLoaderNormalizationTolerance = 1e-9;

FiniteJointDistribution DistributionFromJson(const nlohmann::json& doc);
nlohmann::json DistributionToJson(const FiniteJointDistribution& dist);

FiniteJointDistribution LoadDistribution(const std::filesystem::path& path);
void SaveDistribution(const FiniteJointDistribution& dist,
                      const std::filesystem::path& path);

nlohmann::json ReadJsonFile(const std::filesystem::path& path);
// Pretty-printed with a trailing newline.
void WriteJsonFile(const nlohmann::json& doc, const std::filesystem::path& path);

// "X1,X2" -> {"X1", "X2"}; blanks are trimmed and "" yields an empty list.
std::vector<std::string> SplitList(const std::string& text);
// Feature-subset partition from a comma-separated list; "" is the trivial
// partition and "*" the full one.
FeaturePartition ParsePartition(const FeatureSpace& space, const std::string& text);

nlohmann::json VerdictToJson(const ShiftVerdict& verdict,
                             const FeaturePartition& partition);
nlohmann::json VarianceVerdictToJson(const VarianceVerdict& verdict);
nlohmann::json RankReportToJson(const RankReport& report,
                                const FeaturePartition& partition);
nlohmann::json TriangleToJson(const TriangleReport& report,
                              const FeaturePartition& partition);

// Partition cell -> {"X1": 0, ...} for feature-subset partitions, or the
// bare cell index otherwise.
nlohmann::json CellKey(const FeaturePartition& partition, std::size_t cell);

nlohmann::json FitToJson(const SjsFit& fit);
// Recovers the shift partition and Q[F_n ∩ A_i] from FitToJson output.
struct StoredFit {
  std::vector<std::string> shift_features;
  std::vector<double> cell_label_mass;
  std::vector<double> target_priors;
};
StoredFit StoredFitFromJson(const nlohmann::json& doc, const FeatureSpace& space,
                            std::size_t num_labels);

nlohmann::json PlantedInstanceToJson(const PlantedInstance& instance);

// Header: feature names, then p_0..p_{ℓ-1}, then "defined". One row per
// feature cell in cell order.
void WritePosteriorCsv(std::ostream& out, const ConditionalTable& posterior);

}  // namespace sjs

#endif  // SJSLAB_SJS_IO_H_
