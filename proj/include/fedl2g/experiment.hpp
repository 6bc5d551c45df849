/*
 * Copyright 2026 The FedL2G Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef FEDL2G_EXPERIMENT_HPP_
#define FEDL2G_EXPERIMENT_HPP_

// Config-driven experiment runner: builds the federated dataset once, runs
// one training per seed, writes per-round metric files and a summary.
//
// Configuration is a flat set of keys. Layers apply in order: built-in
// defaults, a JSON config file, FEDL2G_<KEY> environment variables, then
// command-line flags.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedl2g/data.hpp"
#include "fedl2g/federation.hpp"

namespace fedl2g {

inline constexpr const char* kEnvPrefix = "FEDL2G_";

struct DatasetSource {
  enum class Kind { kSynthetic, kFile };
  Kind kind = Kind::kSynthetic;
  SyntheticSpec synthetic;
  std::filesystem::path path;
};

struct ExperimentConfig {
  RunConfig run;  // run.seed is replaced per repeat
  std::vector<std::uint64_t> seeds;
  DatasetSource dataset;
  PartitionScheme partition;
  std::uint64_t data_seed = 1;
  double test_fraction = 0.25;
  bool stratified_quiz = true;
  double eta_s_scale = 1.0;
  std::filesystem::path out_dir = "runs";
  int checkpoint_at = 0;
  bool resume = false;

  int class_count() const { return dataset.synthetic.class_count; }
  int input_dim() const { return dataset.synthetic.input_dim; }
};

// Built-in defaults as a flat JSON object.
nlohmann::json DefaultConfigJson();

// Overlays `layer` onto `base`. Unknown keys are rejected.
void MergeConfig(nlohmann::json& base, const nlohmann::json& layer,
                 const std::string& origin);

// Sets one key from its textual form (flags and environment variables).
void SetConfigValue(nlohmann::json& config, const std::string& key,
                    const std::string& text, const std::string& origin);

// Applies FEDL2G_<KEY> overrides found in `env`.
void ApplyEnvironment(nlohmann::json& config,
                      const std::map<std::string, std::string>& env);

// Validates and converts; throws std::invalid_argument naming the field.
ExperimentConfig ConfigFromJson(const nlohmann::json& config);
nlohmann::json ConfigToJson(const ExperimentConfig& config);

// Defaults, then the file (if any), then the environment, then `overrides`
// in order.
ExperimentConfig LoadConfig(
    const std::optional<std::filesystem::path>& file,
    const std::map<std::string, std::string>& env,
    const std::vector<std::pair<std::string, std::string>>& overrides);

struct PreparedData {
  std::vector<ClientDataset> clients;
  int input_dim = 0;
  int class_count = 0;
};

// Dataset, partition and per-client splits; depends only on the data keys.
PreparedData PrepareData(const ExperimentConfig& config);

RunConfig RunConfigForSeed(const ExperimentConfig& config, std::uint64_t seed);

// Hex FNV-1a digests over canonical JSON.
std::string ConfigDigest(const ExperimentConfig& config);
std::string DataDigest(const ExperimentConfig& config);

struct SeedResult {
  std::uint64_t seed = 0;
  double final_accuracy = 0.0;
  double best_accuracy = 0.0;
  std::size_t convergence_round = 0;
  std::uint64_t upload_bytes = 0;
  std::uint64_t download_bytes = 0;
  double cumulative_loss_increase = 0.0;
  std::vector<double> final_client_accuracy;
  std::string metrics_file;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

MeanStd ComputeMeanStd(std::span<const double> values);

struct RunSummary {
  std::string method;
  std::string config_digest;
  std::string data_digest;
  nlohmann::json config;
  std::vector<SeedResult> seeds;
  MeanStd final_accuracy;
  MeanStd best_accuracy;
  std::uint64_t best_seed = 0;
  double mean_convergence_round = 0.0;
  double mean_total_bytes = 0.0;
  bool complete = true;
  std::string error;
};

nlohmann::json SummaryToJson(const RunSummary& summary);
RunSummary SummaryFromJson(const nlohmann::json& j);
RunSummary ReadSummary(const std::filesystem::path& path);

// The convergence round is searched for after the warm-up rounds and is
// reported as a round number, warm-up included.
SeedResult SummarizeSeed(std::uint64_t seed,
                         const std::vector<RoundMetrics>& history, int warmup = 0);
void FinalizeSummary(RunSummary& summary);

// Metric file: header then one row per round, reals printed with %.17g.
void WriteMetricsCsv(std::ostream& os, const std::vector<RoundMetrics>& history);
std::vector<RoundMetrics> ReadMetricsCsv(std::istream& is);
void WriteClientAccuracyCsv(std::ostream& os,
                            const std::vector<RoundMetrics>& history,
                            int clients);

std::string MetricsFileName(Method method, std::uint64_t seed);
std::string SummaryFileName(Method method);

// Runs every seed, writing files under config.out_dir. On failure the
// summary is still written, with complete = false, and the error rethrown.
RunSummary RunExperiment(const ExperimentConfig& config);

struct ComparisonRow {
  std::string method;
  MeanStd accuracy;
  double convergence_round = 0.0;
  double total_mb = 0.0;  // mean per seed, 1 MB = 10^6 bytes
};

// Rows sorted by mean final accuracy, descending. Throws when fewer than two
// summaries are given or their data digests differ.
std::vector<ComparisonRow> CompareRuns(std::span<const RunSummary> summaries);
std::string FormatComparisonText(const std::vector<ComparisonRow>& rows);
std::string FormatComparisonCsv(const std::vector<ComparisonRow>& rows);

}  // namespace fedl2g

#endif  // FEDL2G_EXPERIMENT_HPP_
