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

#include "sjs/harness.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_map>

#include "sjs/error.h"
#include "sjs/io.h"
#include "sjs/shift_analysis.h"

namespace sjs {

using nlohmann::json;

namespace {

std::vector<std::string> IntegerDomain(std::size_t n) {
  std::vector<std::string> domain;
  for (std::size_t v = 0; v < n; ++v) domain.push_back(std::to_string(v));
  return domain;
}

std::string Trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> SplitFields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(Trim(line.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

bool IsCsv(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".csv";
}

std::vector<std::string> ReadDomain(const json& column) {
  if (column.contains("domain")) {
    std::vector<std::string> domain;
    for (const auto& v : column.at("domain")) {
      domain.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    }
    return domain;
  }
  return IntegerDomain(column.at("cardinality").get<std::size_t>());
}

}  // namespace

DatasetSchema DatasetSchema::FromSpace(const FeatureSpace& space,
                                       std::optional<std::size_t> num_labels) {
  DatasetSchema schema;
  for (std::size_t k = 0; k < space.num_features(); ++k) {
    schema.features.push_back({space.name(k), IntegerDomain(space.cardinality(k))});
  }
  if (num_labels) schema.label_domain = IntegerDomain(*num_labels);
  return schema;
}

DatasetSchema DatasetSchema::FromJson(const json& doc) {
  DatasetSchema schema;
  try {
    for (const auto& column : doc.at("features")) {
      schema.features.push_back({column.at("name").get<std::string>(), ReadDomain(column)});
    }
    if (doc.contains("label_domain")) {
      schema.label_domain = ReadDomain({{"domain", doc.at("label_domain")}});
    } else if (doc.contains("num_labels")) {
      schema.label_domain = IntegerDomain(doc.at("num_labels").get<std::size_t>());
    }
    if (doc.contains("missing_policy")) {
      const auto policy = doc.at("missing_policy").get<std::string>();
      if (policy == "error") {
        schema.missing_policy = MissingPolicy::kError;
      } else if (policy == "drop_row") {
        schema.missing_policy = MissingPolicy::kDropRow;
      } else {
        throw InvalidArgument("missing_policy must be error or drop_row");
      }
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("invalid schema: ") + e.what());
  }
  return schema;
}

FeatureSpace DatasetSchema::Space() const {
  std::vector<std::string> names;
  std::vector<std::size_t> cards;
  for (const auto& column : features) {
    names.push_back(column.name);
    cards.push_back(column.domain.size());
  }
  return FeatureSpace(std::move(names), std::move(cards));
}

std::size_t DatasetSchema::num_labels() const {
  return label_domain ? label_domain->size() : 0;
}

RowTable ParseDataset(std::istream& in, const DatasetSchema& schema) {
  const FeatureSpace space = schema.Space();
  std::string line;
  if (!std::getline(in, line)) throw SchemaViolation(0, "", "missing CSV header");
  const auto header = SplitFields(line);

  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!position.emplace(header[c], c).second) {
      throw SchemaViolation(0, header[c], "duplicate column " + header[c]);
    }
  }
  std::vector<std::size_t> feature_pos;
  for (const auto& column : schema.features) {
    const auto it = position.find(column.name);
    if (it == position.end()) {
      throw SchemaViolation(0, column.name, "missing column " + column.name);
    }
    feature_pos.push_back(it->second);
  }
  std::optional<std::size_t> label_pos;
  if (schema.label_domain) {
    const auto it = position.find(kLabelColumn);
    if (it == position.end()) {
      throw SchemaViolation(0, kLabelColumn, "missing label column");
    }
    label_pos = it->second;
  }
  for (const auto& name : header) {
    const bool declared =
        name == kLabelColumn ||
        std::any_of(schema.features.begin(), schema.features.end(),
                    [&](const CategoricalColumn& c) { return c.name == name; });
    if (!declared) throw SchemaViolation(0, name, "undeclared column " + name);
  }

  using Lookup = std::unordered_map<std::string, std::size_t>;
  auto make_lookup = [](const std::vector<std::string>& domain) {
    Lookup lookup;
    for (std::size_t v = 0; v < domain.size(); ++v) lookup.emplace(domain[v], v);
    return lookup;
  };
  std::vector<Lookup> lookups;
  for (const auto& column : schema.features) lookups.push_back(make_lookup(column.domain));
  const Lookup label_lookup = schema.label_domain ? make_lookup(*schema.label_domain) : Lookup{};

  RowTable rows;
  rows.has_labels = label_pos.has_value();
  std::size_t row = 0;
  std::vector<std::size_t> coords(schema.features.size());
  while (std::getline(in, line)) {
    if (Trim(line).empty()) continue;
    ++row;
    const auto fields = SplitFields(line);
    if (fields.size() != header.size()) {
      throw SchemaViolation(row, "", "row " + std::to_string(row) + " has " +
                                         std::to_string(fields.size()) + " fields, expected " +
                                         std::to_string(header.size()));
    }
    bool drop = false;
    auto decode = [&](const std::string& token, const Lookup& lookup,
                      const std::string& column) -> std::optional<std::size_t> {
      if (token.empty()) {
        if (schema.missing_policy == MissingPolicy::kDropRow) {
          drop = true;
          return std::nullopt;
        }
        throw SchemaViolation(row, column, "missing value in row " + std::to_string(row) +
                                               ", column " + column);
      }
      const auto it = lookup.find(token);
      if (it == lookup.end()) {
        throw SchemaViolation(row, column, "unseen category '" + token + "' in row " +
                                               std::to_string(row) + ", column " + column);
      }
      return it->second;
    };
    for (std::size_t k = 0; k < coords.size(); ++k) {
      const auto v = decode(fields[feature_pos[k]], lookups[k], schema.features[k].name);
      if (v) coords[k] = *v;
    }
    std::optional<std::size_t> label;
    if (label_pos) label = decode(fields[*label_pos], label_lookup, kLabelColumn);
    if (drop) continue;
    rows.cells.push_back(space.Encode(coords));
    if (label) rows.labels.push_back(*label);
  }
  return rows;
}

RowTable LoadDataset(const std::filesystem::path& path, const DatasetSchema& schema) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  return ParseDataset(in, schema);
}

void WriteDataset(std::ostream& out, const RowTable& rows, const DatasetSchema& schema) {
  const FeatureSpace space = schema.Space();
  const bool with_label = rows.has_labels && schema.label_domain.has_value();
  for (std::size_t k = 0; k < schema.features.size(); ++k) {
    out << (k ? "," : "") << schema.features[k].name;
  }
  if (with_label) out << ',' << kLabelColumn;
  out << '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto coords = space.Decode(rows.cells[r]);
    for (std::size_t k = 0; k < coords.size(); ++k) {
      out << (k ? "," : "") << schema.features[k].domain[coords[k]];
    }
    if (with_label) out << ',' << (*schema.label_domain)[rows.labels[r]];
    out << '\n';
  }
}

namespace {

void RequireAlpha(double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw InvalidArgument("smoothing alpha must be finite and non-negative");
  }
}

}  // namespace

FiniteJointDistribution EmpiricalDistribution(const RowTable& rows,
                                              const FeatureSpace& space,
                                              std::size_t num_labels, double alpha) {
  RequireAlpha(alpha);
  if (rows.size() == 0) throw EmptyDataset("no rows to estimate a distribution from");
  if (!rows.has_labels) throw InvalidArgument("empirical joint table needs labels");
  std::vector<double> weights(space.num_cells() * num_labels, alpha);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows.cells[r] >= space.num_cells() || rows.labels[r] >= num_labels) {
      throw InvalidArgument("row out of range for the feature space");
    }
    weights[rows.cells[r] * num_labels + rows.labels[r]] += 1.0;
  }
  return FiniteJointDistribution::FromWeights(space, num_labels, std::move(weights));
}

std::vector<double> EmpiricalMarginal(const RowTable& rows, const FeatureSpace& space,
                                      double alpha) {
  RequireAlpha(alpha);
  if (rows.size() == 0) throw EmptyDataset("no rows to estimate a marginal from");
  std::vector<double> weights(space.num_cells(), alpha);
  for (std::size_t cell : rows.cells) {
    if (cell >= space.num_cells()) throw InvalidArgument("row out of range");
    weights[cell] += 1.0;
  }
  double total = 0.0;
  for (double w : weights) total += w;
  for (double& w : weights) w /= total;
  return weights;
}

RowTable SampleRows(const FiniteJointDistribution& dist, std::size_t count, Rng& rng) {
  const auto masses = dist.masses();
  std::vector<double> cumulative(masses.size());
  double running = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < masses.size(); ++k) {
    running += masses[k];
    cumulative[k] = running;
    if (masses[k] > 0.0) last_positive = k;
  }
  RowTable rows;
  rows.has_labels = true;
  rows.cells.reserve(count);
  rows.labels.reserve(count);
  const std::size_t l = dist.num_labels();
  for (std::size_t r = 0; r < count; ++r) {
    const double u = rng.Uniform() * running;
    auto k = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    k = std::min(k, last_positive);
    rows.cells.push_back(k / l);
    rows.labels.push_back(k % l);
  }
  return rows;
}

// ---------------------------------------------------------------------------

std::string SyntheticKindName(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::kSjs:
      return "sjs";
    case SyntheticKind::kPriorShift:
      return "prior_shift";
    case SyntheticKind::kCovariateShift:
      return "covariate_shift";
    case SyntheticKind::kCdiNotSjs:
      return "cdi_not_sjs";
    case SyntheticKind::kPaperExample:
      return "paper_example";
  }
  return "unknown";
}

SyntheticKind ParseSyntheticKind(const std::string& name) {
  for (auto kind : {SyntheticKind::kSjs, SyntheticKind::kPriorShift,
                    SyntheticKind::kCovariateShift, SyntheticKind::kCdiNotSjs,
                    SyntheticKind::kPaperExample}) {
    if (SyntheticKindName(kind) == name) return kind;
  }
  throw InvalidArgument("unknown synthetic kind '" + name + "'");
}

FiniteJointDistribution RandomSource(const FeatureSpace& space, std::size_t num_labels,
                                     Rng& rng) {
  std::vector<double> weights(space.num_cells() * num_labels);
  for (double& w : weights) w = rng.Uniform(0.05, 1.0);
  return FiniteJointDistribution::FromWeights(space, num_labels, std::move(weights));
}

namespace {

FeatureSpace IndexedSpace(std::size_t d, std::size_t card) {
  std::vector<std::string> names;
  for (std::size_t k = 1; k <= d; ++k) names.push_back("X" + std::to_string(k));
  return FeatureSpace(std::move(names), std::vector<std::size_t>(d, card));
}

double LogUniformRatio(Rng& rng) { return std::exp(rng.Uniform(-std::log(4.0), std::log(4.0))); }

// Conditionally independent binary features; index 0 is Y=0, 1 is Y=1.
FiniteJointDistribution ExampleTable(double prior1, const double (&x1)[2],
                                   const double (&x2)[2]) {
  FeatureSpace space({"X1", "X2"}, {2, 2});
  std::vector<double> mass(8);
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t b = 0; b < 2; ++b) {
      for (std::size_t y = 0; y < 2; ++y) {
        const double py = y == 1 ? prior1 : 1.0 - prior1;
        const double p1 = a == 1 ? x1[y] : 1.0 - x1[y];
        const double p2 = b == 1 ? x2[y] : 1.0 - x2[y];
        mass[(a * 2 + b) * 2 + y] = py * p1 * p2;
      }
    }
  }
  return FiniteJointDistribution::FromWeights(std::move(space), 2, std::move(mass));
}

}  // namespace

SyntheticInstance GenerateSynthetic(SyntheticKind kind, const SyntheticParams& params,
                                    std::uint64_t seed) {
  if (kind == SyntheticKind::kPaperExample) {
    // P[X1=1|Y] = (0.4, 0.6), Q[X1=1|Y] = (1/2, 1/2); X2 unchanged.
    const double p_x1[2] = {0.4, 0.6};
    const double q_x1[2] = {0.5, 0.5};
    const double x2[2] = {0.6, 0.2};
    auto source = ExampleTable(0.5, p_x1, x2);
    auto target = ExampleTable(0.6, q_x1, x2);
    auto f = FeaturePartition::FromFeatureNames(source.space(), {"X1"});
    return SyntheticInstance{kind, std::move(source), std::move(target), std::move(f),
                             std::nullopt};
  }
  if (params.num_features == 0 || params.cardinality == 0) {
    throw InvalidArgument("synthetic instances need at least one feature value");
  }
  if (params.num_labels < 2) throw InvalidArgument("synthetic instances need two labels");
  Rng rng(seed);
  const FeatureSpace space = IndexedSpace(params.num_features, params.cardinality);
  auto source = RandomSource(space, params.num_labels, rng);
  const std::size_t l = params.num_labels;

  switch (kind) {
    case SyntheticKind::kSjs:
    case SyntheticKind::kPriorShift: {
      auto f = kind == SyntheticKind::kSjs
                   ? FeaturePartition::FromFeatureNames(space, params.shift_features)
                   : FeaturePartition::Trivial(space);
      std::vector<double> priors(l);
      double total = 0.0;
      for (double& v : priors) total += (v = rng.Uniform(0.2, 1.0));
      for (double& v : priors) v /= total;
      auto planted = PlantSjs(source, f, priors, std::nullopt, rng.Next());
      auto target = planted.target;
      return SyntheticInstance{kind, std::move(source), std::move(target), std::move(f),
                               std::move(planted)};
    }
    case SyntheticKind::kCovariateShift: {
      // Q|H has an arbitrary density; posteriors are kept.
      std::vector<double> weights(source.masses().begin(), source.masses().end());
      for (std::size_t x = 0; x < space.num_cells(); ++x) {
        const double density = LogUniformRatio(rng);
        for (std::size_t i = 0; i < l; ++i) weights[x * l + i] *= density;
      }
      auto target = FiniteJointDistribution::FromWeights(space, l, std::move(weights));
      return SyntheticInstance{kind, std::move(source), std::move(target),
                               FeaturePartition::Full(space), std::nullopt};
    }
    case SyntheticKind::kCdiNotSjs: {
      if (l != 2) throw InvalidArgument("cdi_not_sjs is defined for two labels");
      auto f = FeaturePartition::FromFeatureNames(space, params.shift_features);
      std::vector<double> density(f.num_cells());
      for (double& g : density) g = LogUniformRatio(rng);
      const auto marginal = source.FeatureMarginal();
      std::vector<double> weights(space.num_cells() * 2);
      for (std::size_t x = 0; x < space.num_cells(); ++x) {
        const double qx = marginal[x] * density[f.cell_of(x)];
        const double post = source.mass(x, 1) / marginal[x];
        weights[x * 2 + 1] = qx * post * post;
        weights[x * 2] = qx * (1.0 - post * post);
      }
      auto target = FiniteJointDistribution::FromWeights(space, 2, std::move(weights));
      return SyntheticInstance{kind, std::move(source), std::move(target), std::move(f),
                               std::nullopt};
    }
    case SyntheticKind::kPaperExample:
      break;
  }
  throw InvalidArgument("unsupported synthetic kind");
}

void WriteSynthetic(const SyntheticInstance& instance, const SyntheticParams& params,
                    std::uint64_t seed, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  SaveDistribution(instance.source, dir / "source.json");
  SaveDistribution(instance.target, dir / "target.json");

  Rng sampler(seed ^ 0x9e3779b97f4a7c15ULL);
  const auto& space = instance.source.space();
  const std::size_t l = instance.source.num_labels();
  {
    std::ofstream out(dir / "source.csv");
    WriteDataset(out, SampleRows(instance.source, params.sample_size, sampler),
                 DatasetSchema::FromSpace(space, l));
  }
  {
    std::ofstream out(dir / "target_features.csv");
    auto rows = SampleRows(instance.target, params.sample_size, sampler);
    rows.has_labels = false;
    WriteDataset(out, rows, DatasetSchema::FromSpace(space, std::nullopt));
  }

  json shift = nullptr;
  if (instance.shift_partition.features()) {
    shift = json::array();
    for (std::size_t k : *instance.shift_partition.features()) shift.push_back(space.name(k));
  }
  json doc = {{"kind", SyntheticKindName(instance.kind)},
              {"seed", seed},
              {"sample_size", params.sample_size},
              {"num_labels", l},
              {"shift_features", shift},
              {"version", kVersion}};
  doc["planted"] = instance.planted ? PlantedInstanceToJson(*instance.planted) : json(nullptr);
  WriteJsonFile(doc, dir / "instance.json");
}

FiniteJointDistribution LoadSource(const std::filesystem::path& path,
                                   const std::optional<DatasetSchema>& schema,
                                   double alpha) {
  if (!IsCsv(path)) return LoadDistribution(path);
  if (!schema || !schema->label_domain) {
    throw InvalidArgument("a labeled CSV source needs a schema with a label domain");
  }
  const auto rows = LoadDataset(path, *schema);
  return EmpiricalDistribution(rows, schema->Space(), schema->num_labels(), alpha);
}

std::vector<double> LoadTargetMarginal(const std::filesystem::path& path,
                                       const DatasetSchema& schema, double alpha) {
  const FeatureSpace space = schema.Space();
  if (IsCsv(path)) {
    DatasetSchema features_only = schema;
    features_only.label_domain.reset();
    return EmpiricalMarginal(LoadDataset(path, features_only), space, alpha);
  }
  const auto target = LoadDistribution(path);
  if (!(target.space() == space)) {
    throw InvalidArgument("target " + path.string() + " lives on a different feature space");
  }
  return target.FeatureMarginal();
}

// ---------------------------------------------------------------------------

namespace {

std::filesystem::path Resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::vector<std::string> NameList(const json& value) {
  if (value.is_string()) return SplitList(value.get<std::string>());
  return value.get<std::vector<std::string>>();
}

}  // namespace

ExperimentConfig ExperimentConfig::FromJson(const json& doc,
                                            const std::filesystem::path& base_dir) {
  static const std::vector<std::string> kKeys = {
      "source", "target",     "schema",  "shift_features", "method",   "alpha",
      "seed",   "output_dir", "h_prime", "classifier",     "penalty",  "tolerance"};
  ExperimentConfig config;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
        throw InvalidArgument("unknown config key '" + key + "'");
      }
    }
    config.source_path = Resolve(base_dir, doc.at("source").get<std::string>());
    config.target_path = Resolve(base_dir, doc.at("target").get<std::string>());
    if (doc.contains("schema")) {
      config.schema_path = Resolve(base_dir, doc.at("schema").get<std::string>());
    }
    if (doc.contains("shift_features")) config.shift_features = NameList(doc.at("shift_features"));
    if (doc.contains("method")) config.method = ParseFitMethod(doc.at("method").get<std::string>());
    if (doc.contains("alpha")) config.smoothing_alpha = doc.at("alpha").get<double>();
    if (doc.contains("seed")) config.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("output_dir")) {
      config.output_dir = Resolve(base_dir, doc.at("output_dir").get<std::string>());
    }
    if (doc.contains("h_prime")) config.h_prime = NameList(doc.at("h_prime"));
    if (doc.contains("classifier")) {
      config.classifier = doc.at("classifier").get<std::string>();
      if (*config.classifier != "argmax") {
        config.classifier = Resolve(base_dir, *config.classifier).string();
      }
    }
    if (doc.contains("penalty")) config.penalty = doc.at("penalty").get<double>();
    if (doc.contains("tolerance")) {
      const auto& tol = doc.at("tolerance");
      for (const auto& [key, value] : tol.items()) {
        if (key == "rank_threshold") {
          config.rank_threshold = value.get<double>();
        } else if (key == "sees_c_tol") {
          config.sees_c_tol = value.get<double>();
        } else if (key == "sees_c_max_iter") {
          config.sees_c_max_iter = value.get<std::size_t>();
        } else {
          throw InvalidArgument("unknown tolerance key '" + key + "'");
        }
      }
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("invalid experiment config: ") + e.what());
  }
  if (!(config.smoothing_alpha >= 0.0) || !std::isfinite(config.smoothing_alpha)) {
    throw InvalidArgument("config alpha must be finite and non-negative");
  }
  if (config.penalty && (!(*config.penalty >= 0.0) || !std::isfinite(*config.penalty))) {
    throw InvalidArgument("config penalty must be finite and non-negative");
  }
  if (!(config.rank_threshold > 0.0) || !(config.sees_c_tol > 0.0)) {
    throw InvalidArgument("config tolerances must be positive");
  }
  for (const auto& path : {config.source_path, config.target_path}) {
    if (!std::filesystem::exists(path)) {
      throw InvalidArgument("config references missing file " + path.string());
    }
  }
  if (config.schema_path && !std::filesystem::exists(*config.schema_path)) {
    throw InvalidArgument("config references missing file " + config.schema_path->string());
  }
  return config;
}

json ExperimentConfig::ToJson() const {
  json doc = {{"source", source_path.string()},
              {"target", target_path.string()},
              {"shift_features", shift_features},
              {"method", FitMethodName(method)},
              {"alpha", smoothing_alpha},
              {"seed", seed},
              {"output_dir", output_dir.string()},
              {"tolerance",
               {{"rank_threshold", rank_threshold},
                {"sees_c_tol", sees_c_tol},
                {"sees_c_max_iter", sees_c_max_iter}}}};
  if (schema_path) doc["schema"] = schema_path->string();
  if (h_prime) doc["h_prime"] = *h_prime;
  if (classifier) doc["classifier"] = *classifier;
  if (penalty) doc["penalty"] = *penalty;
  return doc;
}

std::string HashFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (std::istreambuf_iterator<char> it(in), end; it != end; ++it) {
    hash ^= static_cast<unsigned char>(*it);
    hash *= 0x100000001b3ULL;
  }
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(hash));
  return buffer;
}

namespace {

HardClassifier LoadClassifier(const std::string& spec, const FiniteJointDistribution& p) {
  if (spec == "argmax") return TrainArgmaxClassifier(p);
  const auto doc = ReadJsonFile(spec);
  try {
    auto assignment = doc.at("assignment").get<std::vector<std::size_t>>();
    if (assignment.size() != p.num_cells()) {
      throw InvalidArgument("classifier assignment must cover every feature cell");
    }
    return HardClassifier(std::move(assignment), p.num_labels());
  } catch (const json::exception& e) {
    throw InvalidArgument("invalid classifier file " + spec + ": " + e.what());
  }
}

const char* StatusName(RunStatus status) {
  switch (status) {
    case RunStatus::kOk:
      return "ok";
    case RunStatus::kNotConverged:
      return "not_converged";
    case RunStatus::kUnderdetermined:
      return "underdetermined";
  }
  return "unknown";
}

SjsFit Fit(const ExperimentConfig& config, const FiniteJointDistribution& p,
           std::span<const double> q, const FeaturePartition& f) {
  SeesDOptions d_options;
  d_options.rank_threshold = config.rank_threshold;
  switch (config.method) {
    case FitMethod::kSeesC: {
      SeesCOptions c_options;
      c_options.tol = config.sees_c_tol;
      c_options.max_iter = config.sees_c_max_iter;
      return SeesCFit(p, q, f, c_options);
    }
    case FitMethod::kConditionalConfusion:
      return ConditionalConfusionFit(p, q, f, d_options);
    case FitMethod::kSeesD:
      break;
  }
  std::optional<FeaturePartition> h_prime;
  if (config.h_prime) h_prime = FeaturePartition::FromFeatureNames(p.space(), *config.h_prime);
  if (config.classifier) {
    return SeesDFitWithClassifier(p, q, f, h_prime, LoadClassifier(*config.classifier, p),
                                  d_options);
  }
  return SeesDFit(p, q, f, h_prime, d_options);
}

json SubsetsToJson(const std::vector<SubsetResult>& results, const FeatureSpace& space) {
  json out = json::array();
  for (const auto& r : results) {
    json names = json::array();
    for (std::size_t k : r.features) names.push_back(space.name(k));
    json entry = {{"features", names}, {"error", r.error}};
    if (r.fit) {
      entry["kl_residual"] = r.kl_residual;
      entry["penalized_objective"] = r.penalized_objective;
      entry["target_priors"] = r.fit->target_priors;
    }
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace

ExperimentResult RunExperiment(const ExperimentConfig& config) {
  std::optional<DatasetSchema> schema;
  if (config.schema_path) schema = DatasetSchema::FromJson(ReadJsonFile(*config.schema_path));
  const auto p = LoadSource(config.source_path, schema, config.smoothing_alpha);
  if (!schema) schema = DatasetSchema::FromSpace(p.space(), p.num_labels());
  const auto q = LoadTargetMarginal(config.target_path, *schema, config.smoothing_alpha);

  const auto marginal = p.FeatureMarginal();
  for (std::size_t x = 0; x < q.size(); ++x) {
    if (q[x] > 0.0 && !(marginal[x] > 0.0)) {
      std::string cell;
      for (std::size_t c : p.space().Decode(x)) cell += (cell.empty() ? "" : ",") + std::to_string(c);
      throw AbsoluteContinuityViolated(
          x, "target has mass on feature cell (" + cell +
                 ") where the source has none; smooth with --alpha > 0 or fix the data");
    }
  }

  std::filesystem::create_directories(config.output_dir);
  ExperimentResult result;

  std::vector<std::string> shift = config.shift_features;
  if (config.penalty) {
    std::vector<std::size_t> candidates;
    if (shift.empty()) {
      for (std::size_t k = 0; k < p.space().num_features(); ++k) candidates.push_back(k);
    } else {
      candidates = p.space().FeatureIndices(shift);
    }
    SparsityOptions options;
    options.method = config.method;
    options.sees_c.tol = config.sees_c_tol;
    options.sees_c.max_iter = config.sees_c_max_iter;
    options.sees_d.rank_threshold = config.rank_threshold;
    const auto ranked = SparsitySearch(p, q, candidates, *config.penalty, options);
    const auto path = config.output_dir / "sparsity.json";
    WriteJsonFile({{"penalty", *config.penalty}, {"subsets", SubsetsToJson(ranked, p.space())}},
                  path);
    result.outputs.push_back(path);
    if (ranked.empty() || !ranked.front().fit) {
      throw InvalidArgument("sparsity search found no feasible subset");
    }
    shift.clear();
    for (std::size_t k : ranked.front().features) shift.push_back(p.space().name(k));
  }

  const auto f = FeaturePartition::FromFeatureNames(p.space(), shift);
  SjsFit fit = Fit(config, p, q, f);
  const auto rank = RankMatrix(p, f, PosteriorStatistics(p), config.rank_threshold);

  if (config.method == FitMethod::kSeesC) {
    if (!fit.diagnostics.converged) {
      result.status = RunStatus::kNotConverged;
    } else if (!rank.identifiable) {
      result.status = RunStatus::kUnderdetermined;
    }
  } else if (!fit.diagnostics.underdetermined_cells.empty()) {
    result.status = RunStatus::kUnderdetermined;
  }

  const auto fit_path = config.output_dir / "fit.json";
  WriteJsonFile(FitToJson(fit), fit_path);
  const auto posterior_path = config.output_dir / "posterior.csv";
  {
    std::ofstream out(posterior_path);
    WritePosteriorCsv(out, fit.corrected_posterior);
  }
  json ident = RankReportToJson(rank, f);
  if (p.num_labels() == 2) {
    ident["variance_criterion"] = VarianceVerdictToJson(BinaryVarianceCriterion(p, f));
  }
  const auto ident_path = config.output_dir / "identifiability.json";
  WriteJsonFile(ident, ident_path);
  result.outputs.insert(result.outputs.begin(), {fit_path, posterior_path, ident_path});

  json inputs = {{"source", {{"path", config.source_path.string()},
                             {"fnv1a64", HashFile(config.source_path)}}},
                 {"target", {{"path", config.target_path.string()},
                             {"fnv1a64", HashFile(config.target_path)}}}};
  if (config.schema_path) {
    inputs["schema"] = {{"path", config.schema_path->string()},
                        {"fnv1a64", HashFile(*config.schema_path)}};
  }
  json outputs = json::object();
  for (const auto& path : result.outputs) outputs[path.filename().string()] = HashFile(path);
  json manifest = {{"tool", "sjslab"},
                   {"version", kVersion},
                   {"seed", config.seed},
                   {"config", config.ToJson()},
                   {"shift_features", shift},
                   {"inputs", inputs},
                   {"outputs", outputs},
                   {"status", StatusName(result.status)},
                   {"exit_code", result.exit_code()}};
  const auto manifest_path = config.output_dir / "manifest.json";
  WriteJsonFile(manifest, manifest_path);
  result.outputs.push_back(manifest_path);
  result.fit = std::move(fit);
  return result;
}

}  // namespace sjs
