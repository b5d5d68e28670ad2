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

// sjslab: command-line front end.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error, 3 SEES-c did not
// converge, 4 the fit is underdetermined.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sjs/error.h"
#include "sjs/estimators.h"
#include "sjs/harness.h"
#include "sjs/io.h"
#include "sjs/oracle.h"
#include "sjs/shift_analysis.h"

namespace {

using nlohmann::json;

struct Globals {
  std::uint64_t seed = 0;
  double alpha = 0.0;
  std::optional<double> tol;
  std::string out;
};

void Emit(const json& doc, const std::string& out) {
  if (out.empty()) {
    std::cout << doc.dump(2) << '\n';
  } else {
    sjs::WriteJsonFile(doc, out);
  }
}

std::optional<sjs::DatasetSchema> MaybeSchema(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return sjs::DatasetSchema::FromJson(sjs::ReadJsonFile(path));
}

sjs::DatasetSchema SchemaOf(const std::optional<sjs::DatasetSchema>& schema,
                            const sjs::FiniteJointDistribution& p) {
  return schema ? *schema : sjs::DatasetSchema::FromSpace(p.space(), p.num_labels());
}

std::vector<double> ParseNumbers(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : sjs::SplitList(text)) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw sjs::InvalidArgument("not a number: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

// --- plant -----------------------------------------------------------------

struct PlantArgs {
  std::string source;
  std::string shift;
  std::string priors;
};

int Plant(const PlantArgs& args, const Globals& g) {
  const auto p = sjs::LoadDistribution(args.source);
  const auto f = sjs::ParsePartition(p.space(), args.shift);
  const auto instance = sjs::PlantSjs(p, f, ParseNumbers(args.priors), std::nullopt, g.seed);
  const std::filesystem::path dir = g.out.empty() ? "." : g.out;
  std::filesystem::create_directories(dir);
  sjs::SaveDistribution(instance.target, dir / "target.json");
  sjs::WriteJsonFile(sjs::PlantedInstanceToJson(instance), dir / "planted.json");
  return 0;
}

// --- simulate --------------------------------------------------------------

struct SimulateArgs {
  std::string kind;
  sjs::SyntheticParams params;
  std::string shift = "X1";
};

int Simulate(SimulateArgs args, const Globals& g) {
  args.params.shift_features = sjs::SplitList(args.shift);
  const auto kind = sjs::ParseSyntheticKind(args.kind);
  const auto instance = sjs::GenerateSynthetic(kind, args.params, g.seed);
  sjs::WriteSynthetic(instance, args.params, g.seed, g.out.empty() ? "." : g.out);
  return 0;
}

// --- check -----------------------------------------------------------------

struct CheckArgs {
  std::string source;
  std::string target;
  std::string schema;
  std::string hypothesis;
  std::string shift;
};

int Check(const CheckArgs& args, const Globals& g) {
  const auto schema = MaybeSchema(args.schema);
  const auto p = sjs::LoadSource(args.source, schema, g.alpha);
  const double tol = g.tol.value_or(sjs::kDefaultShiftTolerance);
  json doc = {{"hypothesis", args.hypothesis}};

  if (args.hypothesis == "cdi") {
    const auto f = sjs::ParsePartition(p.space(), args.shift);
    const auto q = sjs::LoadTargetMarginal(args.target, SchemaOf(schema, p), g.alpha);
    doc["verdict"] = sjs::VerdictToJson(sjs::CheckCdi(p.FeatureMarginal(), q, f, tol), f);
    Emit(doc, g.out);
    return 0;
  }
  if (args.hypothesis == "sufficiency") {
    const auto f = sjs::ParsePartition(p.space(), args.shift);
    doc["verdict"] = sjs::VerdictToJson(sjs::CheckSufficiency(p, f, tol), f);
    Emit(doc, g.out);
    return 0;
  }

  const auto q = sjs::LoadSource(args.target, schema, g.alpha);
  sjs::RequireCompatible(p, q);
  if (args.hypothesis == "sjs") {
    const auto f = sjs::ParsePartition(p.space(), args.shift);
    doc["verdict"] = sjs::VerdictToJson(sjs::CheckSjs(p, q, f, tol), f);
  } else if (args.hypothesis == "prior") {
    const auto f = sjs::FeaturePartition::Trivial(p.space());
    doc["verdict"] = sjs::VerdictToJson(sjs::CheckPriorShift(p, q, tol), f);
  } else if (args.hypothesis == "csh") {
    const auto f = sjs::ParsePartition(p.space(), args.shift.empty() ? "*" : args.shift);
    doc["verdict"] = sjs::VerdictToJson(sjs::CheckCovariateShift(p, q, f, tol), f);
  } else if (args.hypothesis == "triangle") {
    const auto f = sjs::ParsePartition(p.space(), args.shift);
    doc["report"] = sjs::TriangleToJson(sjs::CheckTriangle(p, q, f, std::nullopt, tol), f);
  } else {
    throw sjs::InvalidArgument("unknown hypothesis '" + args.hypothesis + "'");
  }
  Emit(doc, g.out);
  return 0;
}

// --- identifiability -------------------------------------------------------

struct IdentArgs {
  std::string source;
  std::string schema;
  std::string shift;
  std::string stats = "posterior";
  std::string classifier = "argmax";
  double rank_threshold = sjs::kDefaultRankThreshold;
};

int Identifiability(const IdentArgs& args, const Globals& g) {
  const auto p = sjs::LoadSource(args.source, MaybeSchema(args.schema), g.alpha);
  const auto f = sjs::ParsePartition(p.space(), args.shift);
  sjs::Statistics stats;
  if (args.stats == "posterior") {
    stats = sjs::PosteriorStatistics(p);
  } else if (args.stats == "classifier") {
    std::vector<std::size_t> assignment;
    if (args.classifier == "argmax") {
      const auto c = sjs::TrainArgmaxClassifier(p);
      assignment.assign(c.assignment().begin(), c.assignment().end());
    } else {
      assignment =
          sjs::ReadJsonFile(args.classifier).at("assignment").get<std::vector<std::size_t>>();
    }
    stats = sjs::ClassifierStatistics(assignment, p.num_labels());
  } else {
    throw sjs::InvalidArgument("--stats must be posterior or classifier");
  }
  json doc = sjs::RankReportToJson(sjs::RankMatrix(p, f, stats, args.rank_threshold), f);
  doc["statistics"] = args.stats;
  doc["total_expectation_error"] = sjs::VerifyTotalExpectation(p, f, stats);
  if (p.num_labels() == 2) {
    doc["variance_criterion"] = sjs::VarianceVerdictToJson(
        sjs::BinaryVarianceCriterion(p, f, g.tol.value_or(sjs::kDefaultShiftTolerance)));
  }
  Emit(doc, g.out);
  return 0;
}

// --- estimate --------------------------------------------------------------

struct EstimateArgs {
  std::string config;
  std::string source;
  std::string target;
  std::string target_features;
  std::string schema;
  std::string shift;
  std::string method = "sees-d";
  std::string h_prime;
  std::string classifier;
  std::optional<double> penalty;
};

int Estimate(const EstimateArgs& args, const Globals& g, const CLI::App& sub) {
  sjs::ExperimentConfig config;
  if (!args.config.empty()) {
    const std::filesystem::path path(args.config);
    config = sjs::ExperimentConfig::FromJson(sjs::ReadJsonFile(path), path.parent_path());
  } else {
    const std::string target = args.target.empty() ? args.target_features : args.target;
    if (args.source.empty() || target.empty()) {
      throw sjs::InvalidArgument("estimate needs --config or --source and --target");
    }
    config.source_path = args.source;
    config.target_path = target;
  }
  // Flags override the config file.
  if (!args.schema.empty()) config.schema_path = args.schema;
  if (sub.count("--shift-features")) config.shift_features = sjs::SplitList(args.shift);
  if (sub.count("--method")) config.method = sjs::ParseFitMethod(args.method);
  if (!args.h_prime.empty()) config.h_prime = sjs::SplitList(args.h_prime);
  if (!args.classifier.empty()) config.classifier = args.classifier;
  if (args.penalty) config.penalty = args.penalty;
  const auto& root = *sub.get_parent();
  if (root.count("--alpha")) config.smoothing_alpha = g.alpha;
  if (root.count("--seed")) config.seed = g.seed;
  if (g.tol) config.sees_c_tol = *g.tol;
  if (!g.out.empty()) config.output_dir = g.out;

  const auto result = sjs::RunExperiment(config);
  json summary = {{"target_priors", result.fit->target_priors},
                  {"method", sjs::FitMethodName(result.fit->method)},
                  {"residual", result.fit->residual},
                  {"exit_code", result.exit_code()},
                  {"output_dir", config.output_dir.string()}};
  std::cout << summary.dump(2) << '\n';
  if (result.status == sjs::RunStatus::kNotConverged) {
    std::cerr << "sjslab: SEES-c stopped before reaching the tolerance\n";
  } else if (result.status == sjs::RunStatus::kUnderdetermined) {
    std::cerr << "sjslab: the target joint is not uniquely determined\n";
  }
  return result.exit_code();
}

// --- correct ---------------------------------------------------------------

struct CorrectArgs {
  std::string source;
  std::string schema;
  std::string fit;
};

int Correct(const CorrectArgs& args, const Globals& g) {
  const auto p = sjs::LoadSource(args.source, MaybeSchema(args.schema), g.alpha);
  const auto stored = sjs::StoredFitFromJson(sjs::ReadJsonFile(args.fit), p.space(),
                                             p.num_labels());
  const auto f = sjs::FeaturePartition::FromFeatureNames(p.space(), stored.shift_features);
  const auto ratios = sjs::PriorRatiosOnPartition(p, f, stored.cell_label_mass);
  const auto posterior = sjs::PosteriorCorrect(p, ratios);
  if (g.out.empty()) {
    sjs::WritePosteriorCsv(std::cout, posterior);
  } else {
    std::ofstream out(g.out);
    if (!out) throw sjs::InvalidArgument("cannot write " + g.out);
    sjs::WritePosteriorCsv(out, posterior);
  }
  return 0;
}

// --- report ----------------------------------------------------------------

int Report(const std::string& run_dir, const Globals& g) {
  const std::filesystem::path dir(run_dir);
  const auto manifest = sjs::ReadJsonFile(dir / "manifest.json");
  const auto fit = sjs::ReadJsonFile(dir / "fit.json");
  const auto ident = sjs::ReadJsonFile(dir / "identifiability.json");

  std::ostringstream text;
  text << "run: " << dir.string() << "\n";
  text << "status: " << manifest.at("status").get<std::string>()
       << " (exit " << manifest.at("exit_code").get<int>() << ")\n";
  text << "method: " << fit.at("method").get<std::string>() << "\n";
  text << "shift features:";
  if (fit.at("shift_features").is_null()) {
    text << " (partition)";
  } else {
    for (const auto& name : fit.at("shift_features")) text << ' ' << name.get<std::string>();
  }
  text << "\ntarget priors:";
  for (const auto& v : fit.at("target_priors")) {
    text << ' ' << std::setprecision(10) << v.get<double>();
  }
  const auto& diag = fit.at("diagnostics");
  text << "\nkl residual: " << diag.at("kl_residual").dump() << "\n";
  text << "identifiable: " << (ident.at("identifiable").get<bool>() ? "yes" : "no") << "\n";
  if (!diag.at("underdetermined_cells").empty()) {
    text << "underdetermined cells: " << diag.at("underdetermined_cells").dump() << "\n";
  }
  text << "inputs:\n";
  for (const auto& [role, entry] : manifest.at("inputs").items()) {
    text << "  " << role << ' ' << entry.at("path").get<std::string>() << ' '
         << entry.at("fnv1a64").get<std::string>() << "\n";
  }
  if (g.out.empty()) {
    std::cout << text.str();
  } else {
    std::ofstream out(g.out);
    out << text.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse joint shift laboratory"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--alpha", g.alpha, "Additive smoothing for CSV inputs")->check(CLI::NonNegativeNumber);
  app.add_option("--tol", g.tol, "Tolerance override");
  app.add_option("--out", g.out, "Output file or directory");

  PlantArgs plant;
  auto* plant_cmd = app.add_subcommand("plant", "Plant an SJS target on a source table");
  plant_cmd->add_option("--source", plant.source, "Source distribution JSON")->required();
  plant_cmd->add_option("--shift-features", plant.shift, "Comma list of shifted features");
  plant_cmd->add_option("--priors", plant.priors, "Comma list of target priors")->required();

  SimulateArgs simulate;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic instance");
  sim_cmd->add_option("--kind", simulate.kind,
                      "sjs, prior_shift, covariate_shift, cdi_not_sjs or paper_example")
      ->required();
  sim_cmd->add_option("--features", simulate.params.num_features, "Number of features");
  sim_cmd->add_option("--cardinality", simulate.params.cardinality, "Values per feature");
  sim_cmd->add_option("--labels", simulate.params.num_labels, "Number of labels");
  sim_cmd->add_option("--shift-features", simulate.shift, "Comma list of shifted features");
  sim_cmd->add_option("--samples", simulate.params.sample_size, "Rows per sampled CSV");

  CheckArgs check;
  auto* check_cmd = app.add_subcommand("check", "Check a shift hypothesis");
  check_cmd->add_option("--source", check.source, "Source JSON or labeled CSV")->required();
  check_cmd->add_option("--target", check.target, "Target JSON or CSV");
  check_cmd->add_option("--schema", check.schema, "Schema JSON for CSV inputs");
  check_cmd->add_option("--hypothesis", check.hypothesis,
                        "sjs, prior, csh, cdi, sufficiency or triangle")
      ->required();
  check_cmd->add_option("--shift-features,--partition", check.shift, "Comma list; '*' for all");

  IdentArgs ident;
  auto* ident_cmd = app.add_subcommand("identifiability", "Rank condition on a partition");
  ident_cmd->add_option("--source", ident.source, "Source JSON or labeled CSV")->required();
  ident_cmd->add_option("--schema", ident.schema, "Schema JSON for CSV inputs");
  ident_cmd->add_option("--shift-features,--partition", ident.shift, "Comma list; '*' for all");
  ident_cmd->add_option("--stats", ident.stats, "posterior or classifier");
  ident_cmd->add_option("--classifier", ident.classifier, "argmax or assignment JSON");
  ident_cmd->add_option("--rank-threshold", ident.rank_threshold, "Relative singular value cutoff");

  EstimateArgs estimate;
  auto* est_cmd = app.add_subcommand("estimate", "Estimate target priors and posteriors");
  est_cmd->add_option("--config", estimate.config, "Experiment config JSON");
  est_cmd->add_option("--source", estimate.source, "Source JSON or labeled CSV");
  est_cmd->add_option("--target", estimate.target, "Target JSON or feature CSV");
  est_cmd->add_option("--target-features", estimate.target_features, "Target feature CSV");
  est_cmd->add_option("--schema", estimate.schema, "Schema JSON for CSV inputs");
  est_cmd->add_option("--shift-features", estimate.shift, "Comma list of shifted features");
  est_cmd->add_option("--method", estimate.method, "sees-c, sees-d or confusion");
  est_cmd->add_option("--h-prime", estimate.h_prime, "Refinement features for sees-d");
  est_cmd->add_option("--classifier", estimate.classifier, "argmax or assignment JSON");
  est_cmd->add_option("--penalty", estimate.penalty, "Sparsity penalty per feature");

  CorrectArgs correct;
  auto* correct_cmd = app.add_subcommand("correct", "Corrected posteriors from a stored fit");
  correct_cmd->add_option("--source", correct.source, "Source JSON or labeled CSV")->required();
  correct_cmd->add_option("--schema", correct.schema, "Schema JSON for CSV inputs");
  correct_cmd->add_option("--fit", correct.fit, "fit.json from estimate")->required();

  std::string run_dir;
  auto* report_cmd = app.add_subcommand("report", "Summarize an estimate run");
  report_cmd->add_option("--run", run_dir, "Output directory of estimate")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*plant_cmd) return Plant(plant, g);
    if (*sim_cmd) return Simulate(simulate, g);
    if (*check_cmd) return Check(check, g);
    if (*ident_cmd) return Identifiability(ident, g);
    if (*est_cmd) return Estimate(estimate, g, *est_cmd);
    if (*correct_cmd) return Correct(correct, g);
    if (*report_cmd) return Report(run_dir, g);
  } catch (const sjs::AbsoluteContinuityViolated& e) {
    std::cerr << "sjslab: error: " << e.what() << " [cell " << e.cell() << "]\n";
    return 2;
  } catch (const sjs::SchemaViolation& e) {
    std::cerr << "sjslab: error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "sjslab: error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
