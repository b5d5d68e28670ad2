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

#include "sjs/io.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "sjs/error.h"

namespace sjs {

using nlohmann::json;

std::string FormatDouble(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

namespace {

// JSON has no infinity; encode it as a string.
json Number(double value) {
  if (std::isfinite(value)) return value;
  return FormatDouble(value);
}

std::size_t ReadCount(const json& value, const std::string& what) {
  if (!value.is_number_integer() || value.get<long long>() < 0) {
    throw InvalidArgument(what + " must be a non-negative integer");
  }
  return value.get<std::size_t>();
}

}  // namespace

FiniteJointDistribution DistributionFromJson(const json& doc) {
  if (!doc.is_object() || !doc.contains("features") || !doc.contains("num_labels") ||
      !doc.contains("mass")) {
    throw InvalidArgument("distribution JSON needs features, num_labels and mass");
  }
  std::vector<std::string> names;
  std::vector<std::size_t> cards;
  for (const auto& feature : doc.at("features")) {
    if (!feature.contains("name") || !feature.contains("cardinality")) {
      throw InvalidArgument("each feature needs a name and a cardinality");
    }
    names.push_back(feature.at("name").get<std::string>());
    cards.push_back(ReadCount(feature.at("cardinality"), "cardinality"));
  }
  FeatureSpace space(std::move(names), std::move(cards));
  const std::size_t l = ReadCount(doc.at("num_labels"), "num_labels");
  if (l < 2) throw InvalidArgument("num_labels must be at least 2");

  std::vector<double> mass(space.num_cells() * l, 0.0);
  std::vector<bool> seen(mass.size(), false);
  const std::size_t d = space.num_features();
  for (const auto& entry : doc.at("mass")) {
    if (!entry.is_array() || entry.size() != d + 2) {
      throw InvalidArgument("mass entries must be [cell..., label, p] with " +
                            std::to_string(d + 2) + " elements");
    }
    std::vector<std::size_t> coords(d);
    for (std::size_t k = 0; k < d; ++k) coords[k] = ReadCount(entry[k], "cell value");
    const std::size_t label = ReadCount(entry[d], "label");
    if (label >= l) throw InvalidArgument("label out of range in mass entry");
    if (!entry[d + 1].is_number()) throw InvalidArgument("mass must be a number");
    const double p = entry[d + 1].get<double>();
    if (!std::isfinite(p) || p < 0.0) {
      throw InvalidArgument("mass entries must be finite and non-negative");
    }
    const std::size_t index = space.Encode(coords) * l + label;
    if (seen[index]) throw InvalidArgument("duplicate mass entry");
    seen[index] = true;
    mass[index] = p;
  }
  double total = 0.0;
  for (double m : mass) total += m;
  if (std::abs(total - 1.0) > kLoaderNormalizationTolerance) {
    throw InvalidArgument("distribution masses sum to " + FormatDouble(total) +
                          ", not within 1e-9 of 1");
  }
  // Tables already normalized up to rounding are kept bit-exact so that a
  // write/load cycle reproduces them.
  if (std::abs(total - 1.0) > kNormalizationTolerance) {
    for (double& m : mass) m /= total;
  }
  return FiniteJointDistribution(std::move(space), l, std::move(mass));
}

json DistributionToJson(const FiniteJointDistribution& dist) {
  const auto& space = dist.space();
  json features = json::array();
  for (std::size_t k = 0; k < space.num_features(); ++k) {
    features.push_back({{"name", space.name(k)}, {"cardinality", space.cardinality(k)}});
  }
  json mass = json::array();
  for (std::size_t x = 0; x < dist.num_cells(); ++x) {
    const auto coords = space.Decode(x);
    for (std::size_t i = 0; i < dist.num_labels(); ++i) {
      if (dist.mass(x, i) == 0.0) continue;
      json entry = json::array();
      for (std::size_t c : coords) entry.push_back(c);
      entry.push_back(i);
      entry.push_back(dist.mass(x, i));
      mass.push_back(std::move(entry));
    }
  }
  return {{"features", features}, {"num_labels", dist.num_labels()}, {"mass", mass}};
}

json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void WriteJsonFile(const json& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

FiniteJointDistribution LoadDistribution(const std::filesystem::path& path) {
  try {
    return DistributionFromJson(ReadJsonFile(path));
  } catch (const json::exception& e) {
    throw InvalidArgument("invalid distribution " + path.string() + ": " + e.what());
  }
}

void SaveDistribution(const FiniteJointDistribution& dist,
                      const std::filesystem::path& path) {
  WriteJsonFile(DistributionToJson(dist), path);
}

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto last = item.find_last_not_of(" \t");
    out.push_back(item.substr(first, last - first + 1));
  }
  return out;
}

FeaturePartition ParsePartition(const FeatureSpace& space, const std::string& text) {
  if (text == "*") return FeaturePartition::Full(space);
  return FeaturePartition::FromFeatureNames(space, SplitList(text));
}

json CellKey(const FeaturePartition& partition, std::size_t cell) {
  if (!partition.features()) return cell;
  const auto& space = partition.space();
  const auto& features = *partition.features();
  json key = json::object();
  if (partition.members(cell).empty()) return key;
  const std::size_t x = partition.members(cell).front();
  for (std::size_t k : features) key[space.name(k)] = space.Coordinate(x, k);
  return key;
}

namespace {

json FeatureNames(const FeaturePartition& partition) {
  if (!partition.features()) return nullptr;
  json names = json::array();
  for (std::size_t k : *partition.features()) {
    names.push_back(partition.space().name(k));
  }
  return names;
}

json WitnessToJson(const Witness& witness, const FeaturePartition& partition) {
  json out = {{"partition_cell", CellKey(partition, witness.partition_cell)}};
  out["label"] = witness.label ? json(*witness.label) : json(nullptr);
  if (witness.feature_cell) {
    const auto& space = partition.space();
    json cell = json::object();
    const auto coords = space.Decode(*witness.feature_cell);
    for (std::size_t k = 0; k < coords.size(); ++k) cell[space.name(k)] = coords[k];
    out["feature_cell"] = cell;
  } else {
    out["feature_cell"] = nullptr;
  }
  return out;
}

}  // namespace

json VerdictToJson(const ShiftVerdict& verdict, const FeaturePartition& partition) {
  json out = {{"holds", verdict.holds},
              {"max_violation", Number(verdict.max_violation)},
              {"tolerance", verdict.tolerance},
              {"partition", FeatureNames(partition)}};
  out["witness"] =
      verdict.witness ? WitnessToJson(*verdict.witness, partition) : json(nullptr);
  if (verdict.alternate_violation) {
    out["density_spread"] = Number(*verdict.alternate_violation);
  }
  return out;
}

json VarianceVerdictToJson(const VarianceVerdict& verdict) {
  return {{"holds", verdict.holds},
          {"varies_somewhere", verdict.varies_somewhere},
          {"min_cell_spread", verdict.min_cell_spread},
          {"weakest_cell",
           verdict.weakest_cell ? json(*verdict.weakest_cell) : json(nullptr)},
          {"tolerance", verdict.tolerance}};
}

json RankReportToJson(const RankReport& report, const FeaturePartition& partition) {
  json cells = json::array();
  const std::size_t l = report.num_labels;
  for (std::size_t n = 0; n < report.per_cell_rank.size(); ++n) {
    json cell = {{"cell", CellKey(partition, n)},
                 {"positive_mass", static_cast<bool>(report.positive_mass[n])}};
    if (report.positive_mass[n]) {
      json matrix = json::array();
      for (std::size_t i = 0; i < l; ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < l; ++j) {
          row.push_back(report.per_cell_matrices[n][i * l + j]);
        }
        matrix.push_back(std::move(row));
      }
      cell["matrix"] = std::move(matrix);
      cell["rank"] = report.per_cell_rank[n];
      cell["singular_values"] = report.singular_values[n];
    }
    cells.push_back(std::move(cell));
  }
  return {{"identifiable", report.identifiable},
          {"num_labels", l},
          {"partition", FeatureNames(partition)},
          {"cells", cells}};
}

json TriangleToJson(const TriangleReport& report, const FeaturePartition& partition) {
  const auto full = FeaturePartition::Full(partition.space());
  return {{"sjs", VerdictToJson(report.sjs_verdict, partition)},
          {"cdi", VerdictToJson(report.cdi_verdict, partition)},
          {"csh", VerdictToJson(report.csh_verdict, full)},
          {"full_rank", report.full_rank},
          {"positive_posteriors", report.positive_posteriors},
          {"violations", report.violations}};
}

json FitToJson(const SjsFit& fit) {
  const std::size_t l = fit.num_labels;
  json cells = json::array();
  for (std::size_t n = 0; n < fit.partition.num_cells(); ++n) {
    json mass = json::array();
    json ratios = json::array();
    for (std::size_t i = 0; i < l; ++i) {
      mass.push_back(fit.cell_label_mass[n * l + i]);
      ratios.push_back(fit.f_ratios[n * l + i]);
    }
    cells.push_back({{"cell", CellKey(fit.partition, n)},
                     {"mass", mass},
                     {"f_ratios", ratios}});
  }
  const auto& d = fit.diagnostics;
  json diagnostics = {{"converged", d.converged},
                      {"iterations", d.iterations},
                      {"projected_gradient_norm", Number(d.projected_gradient_norm)},
                      {"objective", Number(d.objective)},
                      {"kl_residual", Number(d.kl_residual)},
                      {"underdetermined_cells", d.underdetermined_cells}};
  return {{"method", FitMethodName(fit.method)},
          {"shift_features", FeatureNames(fit.partition)},
          {"num_labels", l},
          {"target_priors", fit.target_priors},
          {"residual", Number(fit.residual)},
          {"cells", cells},
          {"diagnostics", diagnostics}};
}

StoredFit StoredFitFromJson(const json& doc, const FeatureSpace& space,
                            std::size_t num_labels) {
  StoredFit stored;
  try {
    if (doc.at("shift_features").is_null()) {
      throw InvalidArgument("fit was not built on a feature subset");
    }
    stored.shift_features = doc.at("shift_features").get<std::vector<std::string>>();
    if (doc.at("num_labels").get<std::size_t>() != num_labels) {
      throw InvalidArgument("fit and source disagree on the number of labels");
    }
    const auto f = FeaturePartition::FromFeatureNames(space, stored.shift_features);
    stored.cell_label_mass.assign(f.num_cells() * num_labels, 0.0);
    std::vector<bool> seen(f.num_cells(), false);
    for (const auto& cell : doc.at("cells")) {
      std::vector<std::size_t> coords;
      for (std::size_t k : *f.features()) {
        coords.push_back(cell.at("cell").at(space.name(k)).get<std::size_t>());
      }
      std::size_t n = 0;
      for (std::size_t c = 0; c < coords.size(); ++c) {
        const std::size_t card = space.cardinality((*f.features())[c]);
        if (coords[c] >= card) throw InvalidArgument("fit cell value out of range");
        n = n * card + coords[c];
      }
      if (seen[n]) throw InvalidArgument("duplicate cell in fit");
      seen[n] = true;
      const auto mass = cell.at("mass").get<std::vector<double>>();
      if (mass.size() != num_labels) throw InvalidArgument("bad mass row in fit");
      for (std::size_t i = 0; i < num_labels; ++i) {
        stored.cell_label_mass[n * num_labels + i] = mass[i];
      }
    }
    stored.target_priors = doc.at("target_priors").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("invalid fit JSON: ") + e.what());
  }
  return stored;
}

json PlantedInstanceToJson(const PlantedInstance& instance) {
  const auto& f = instance.shift_partition;
  const std::size_t l = instance.source.num_labels();
  json cells = json::array();
  for (std::size_t n = 0; n < f.num_cells(); ++n) {
    json mass = json::array();
    json ratios = json::array();
    for (std::size_t i = 0; i < l; ++i) {
      mass.push_back(instance.planted_cell_mass[n * l + i]);
      ratios.push_back(instance.planted_ratios[n * l + i]);
    }
    cells.push_back({{"cell", CellKey(f, n)}, {"mass", mass}, {"f_ratios", ratios}});
  }
  return {{"method", "planted"},
          {"shift_features", FeatureNames(f)},
          {"num_labels", l},
          {"target_priors", instance.planted_priors},
          {"seed", instance.seed},
          {"cells", cells}};
}

void WritePosteriorCsv(std::ostream& out, const ConditionalTable& posterior) {
  const auto& space = posterior.partition().space();
  const std::size_t l = posterior.num_labels();
  for (std::size_t k = 0; k < space.num_features(); ++k) out << space.name(k) << ',';
  for (std::size_t i = 0; i < l; ++i) out << 'p' << i << ',';
  out << "defined\n";
  for (std::size_t x = 0; x < space.num_cells(); ++x) {
    const std::size_t n = posterior.partition().cell_of(x);
    for (std::size_t c : space.Decode(x)) out << c << ',';
    for (std::size_t i = 0; i < l; ++i) out << FormatDouble(posterior.value(n, i)) << ',';
    out << (posterior.is_defined(n) ? 1 : 0) << '\n';
  }
}

}  // namespace sjs
