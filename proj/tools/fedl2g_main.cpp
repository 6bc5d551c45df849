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
// fedl2g run     [--config PATH] [--method NAME] ... [--out DIR]
// fedl2g compare SUMMARY.json SUMMARY.json... [--csv PATH]

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fedl2g/experiment.hpp"

extern char** environ;

namespace {

std::map<std::string, std::string> Environment() {
  std::map<std::string, std::string> env;
  const std::string prefix = fedl2g::kEnvPrefix;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    std::string entry(*e);
    if (entry.rfind(prefix, 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    env.emplace(entry.substr(0, eq), entry.substr(eq + 1));
  }
  return env;
}

struct Flag {
  const char* name;  // long flag without dashes
  const char* key;   // config key
  const char* help;
};

// Flags that map one-to-one onto config keys.
constexpr Flag kFlags[] = {
    {"method", "method", "fedl2g-l, fedl2g-f, fedproto, feddistill or local-only"},
    {"clients", "clients", "number of clients N"},
    {"rho", "rho", "client participation ratio in (0, 1]"},
    {"rounds", "rounds", "total rounds T"},
    {"warmup", "warmup", "warm-up rounds T'"},
    {"eta-c", "eta_c", "client learning rate"},
    {"eta-s", "eta_s", "server learning rate for guiding vectors"},
    {"partition", "partition", "dirichlet:BETA or pathological:CPC"},
    {"seed", "seeds", "training seed list S[,S...]"},
    {"out", "out", "output directory"},
    {"quiz-size", "quiz_size", "quiz batch size"},
    {"noise", "noise", "Gaussian noise on uploads, s:p"},
    {"batch-size", "batch_size", "client batch size"},
    {"workers", "workers", "client worker threads"},
    {"eval-every", "eval_every", "evaluate every k rounds"},
    {"dataset", "dataset", "synthetic or file:PATH"},
    {"data-seed", "data_seed", "seed for dataset and partition"},
    {"checkpoint-at", "checkpoint_at", "write a checkpoint after this round"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous federated learning simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run one method for every seed");
  std::string config_path;
  run->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  std::map<std::string, std::string> values;
  for (const auto& f : kFlags) {
    run->add_option(std::string("--") + f.name, values[f.key], f.help);
  }
  bool resume = false;
  bool print_config = false;
  run->add_flag("--resume", resume, "continue from checkpoints in the output directory");
  run->add_flag("--print-config", print_config, "print the resolved config and exit");

  auto* compare = app.add_subcommand("compare", "tabulate run summaries");
  std::vector<std::string> summaries;
  std::string csv_path;
  compare->add_option("summaries", summaries, "summary files")->required()->check(CLI::ExistingFile);
  compare->add_option("--csv", csv_path, "also write the table as CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      std::vector<std::pair<std::string, std::string>> overrides;
      for (const auto& f : kFlags) {
        if (run->count(std::string("--") + f.name) > 0) overrides.emplace_back(f.key, values[f.key]);
      }
      if (resume) overrides.emplace_back("resume", "true");
      std::optional<std::filesystem::path> file;
      if (!config_path.empty()) file = config_path;
      const auto config = fedl2g::LoadConfig(file, Environment(), overrides);
      if (print_config) {
        std::cout << fedl2g::ConfigToJson(config).dump(2) << '\n';
        return EXIT_SUCCESS;
      }
      const auto summary = fedl2g::RunExperiment(config);
      for (const auto& s : summary.seeds) {
        std::cout << "seed " << s.seed << ": final accuracy " << s.final_accuracy
                  << ", best " << s.best_accuracy << ", metrics "
                  << (config.out_dir / s.metrics_file).string() << '\n';
      }
      std::cout << summary.method << ": " << summary.final_accuracy.mean << " +- "
                << summary.final_accuracy.std << " over " << summary.seeds.size()
                << " seed(s)\n";
    } else {
      std::vector<fedl2g::RunSummary> loaded;
      for (const auto& p : summaries) loaded.push_back(fedl2g::ReadSummary(p));
      const auto rows = fedl2g::CompareRuns(loaded);
      std::cout << fedl2g::FormatComparisonText(rows);
      if (!csv_path.empty()) {
        std::ofstream os(csv_path);
        os << fedl2g::FormatComparisonCsv(rows);
        if (!os) throw std::runtime_error("cannot write " + csv_path);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "fedl2g: " << e.what() << '\n';
    return 2;
  }
  return EXIT_SUCCESS;
}
