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

// Datasets, empirical tables, synthetic instances and the experiment runner.
//
// CSV files have a header row with one column per feature and an optional
// "label" column. Values are categorical tokens from the declared domains.

#ifndef SJSLAB_SJS_HARNESS_H_
#define SJSLAB_SJS_HARNESS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sjs/discrete.h"
#include "sjs/estimators.h"
#include "sjs/oracle.h"
#include "sjs/random.h"

namespace sjs {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kLabelColumn = "label";

struct CategoricalColumn {
  std::string name;
  // Accepted tokens; the position of a token is its coded value.
  std::vector<std::string> domain;
};

enum class MissingPolicy { kError, kDropRow };

struct DatasetSchema {
  std::vector<CategoricalColumn> features;
  // Label tokens, coded by position. Unset for feature-only files.
  std::optional<std::vector<std::string>> label_domain;
  MissingPolicy missing_policy = MissingPolicy::kError;

  // Integer domains 0..card-1, and labels 0..num_labels-1 when requested.
  static DatasetSchema FromSpace(const FeatureSpace& space,
                                 std::optional<std::size_t> num_labels);
  // {"features": [{"name", "cardinality"} or {"name", "domain"}],
  //  "num_labels" or "label_domain", "missing_policy": "error"|"drop_row"}
  static DatasetSchema FromJson(const nlohmann::json& doc);
  FeatureSpace Space() const;
  std::size_t num_labels() const;
};

// Coded rows: feature cells of the schema's space, and labels when present.
struct RowTable {
  std::vector<std::size_t> cells;
  std::vector<std::size_t> labels;
  bool has_labels = false;
  std::size_t size() const { return cells.size(); }
};

RowTable ParseDataset(std::istream& in, const DatasetSchema& schema);
RowTable LoadDataset(const std::filesystem::path& path, const DatasetSchema& schema);
void WriteDataset(std::ostream& out, const RowTable& rows, const DatasetSchema& schema);

// Frequencies plus `alpha` per (cell, label), normalized.
FiniteJointDistribution EmpiricalDistribution(const RowTable& rows,
                                              const FeatureSpace& space,
                                              std::size_t num_labels, double alpha);
// Feature-marginal version; labels are ignored.
std::vector<double> EmpiricalMarginal(const RowTable& rows, const FeatureSpace& space,
                                      double alpha);

// i.i.d. draws of (cell, label) from a joint table.
RowTable SampleRows(const FiniteJointDistribution& dist, std::size_t count, Rng& rng);

enum class SyntheticKind { kSjs, kPriorShift, kCovariateShift, kCdiNotSjs, kPaperExample };
std::string SyntheticKindName(SyntheticKind kind);
SyntheticKind ParseSyntheticKind(const std::string& name);

struct SyntheticParams {
  std::size_t num_features = 3;
  std::size_t cardinality = 2;
  std::size_t num_labels = 2;
  // Names of the shifted features (X1..Xd); ignored by paper_example.
  std::vector<std::string> shift_features = {"X1"};
  std::size_t sample_size = 1000;
};

struct SyntheticInstance {
  SyntheticKind kind;
  FiniteJointDistribution source;
  FiniteJointDistribution target;
  FeaturePartition shift_partition;
  // Set for the sjs and prior_shift kinds.
  std::optional<PlantedInstance> planted;
};

// Random sources have masses uniform on [0.05, 1] before normalization.
FiniteJointDistribution RandomSource(const FeatureSpace& space, std::size_t num_labels,
                                     Rng& rng);
SyntheticInstance GenerateSynthetic(SyntheticKind kind, const SyntheticParams& params,
                                    std::uint64_t seed);
// Writes source.json, target.json, source.csv, target_features.csv and
// instance.json into `dir`.
void WriteSynthetic(const SyntheticInstance& instance, const SyntheticParams& params,
                    std::uint64_t seed, const std::filesystem::path& dir);

// Loads a source from distribution JSON, or from a labeled CSV (schema
// required) smoothed by alpha.
FiniteJointDistribution LoadSource(const std::filesystem::path& path,
                                   const std::optional<DatasetSchema>& schema,
                                   double alpha);
// Target feature marginal from distribution JSON or a feature CSV read with
// the schema's feature columns.
std::vector<double> LoadTargetMarginal(const std::filesystem::path& path,
                                       const DatasetSchema& schema, double alpha);

struct ExperimentConfig {
  std::filesystem::path source_path;
  std::filesystem::path target_path;
  std::optional<std::filesystem::path> schema_path;
  std::vector<std::string> shift_features;
  FitMethod method = FitMethod::kSeesD;
  double smoothing_alpha = 0.0;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = ".";
  // Comma list of features for the SEES-d refinement; unset means all.
  std::optional<std::vector<std::string>> h_prime;
  // "argmax" or a JSON file {"assignment": [...]}; SEES-d only.
  std::optional<std::string> classifier;
  // When set, the shift features are chosen by the sparsity search among
  // `shift_features` (all features if empty).
  std::optional<double> penalty;
  double rank_threshold = 1e-10;
  double sees_c_tol = 1e-10;
  std::size_t sees_c_max_iter = 10'000;

  // Relative paths are resolved against `base_dir`.
  static ExperimentConfig FromJson(const nlohmann::json& doc,
                                   const std::filesystem::path& base_dir);
  nlohmann::json ToJson() const;
};

enum class RunStatus { kOk = 0, kNotConverged = 3, kUnderdetermined = 4 };

struct ExperimentResult {
  RunStatus status = RunStatus::kOk;
  std::optional<SjsFit> fit;
  std::vector<std::filesystem::path> outputs;
  int exit_code() const { return static_cast<int>(status); }
};

// Writes fit.json, posterior.csv, identifiability.json and manifest.json
// (plus sparsity.json when a penalty is given) into the output directory.
ExperimentResult RunExperiment(const ExperimentConfig& config);

// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string HashFile(const std::filesystem::path& path);

}  // namespace sjs

#endif  // SJSLAB_SJS_HARNESS_H_
