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
#include "fedl2g/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fedl2g {
namespace {

using nlohmann::json;

constexpr const char* kSummaryFormat = "fedl2g-summary/1";
constexpr const char* kMetricsHeader =
    "round,accuracy,mean_ce,loss_increase,upload_bytes,download_bytes,grad_norm_sq";

std::string Trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> SplitList(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(Trim(item));
  return out;
}

[[noreturn]] void BadField(const std::string& field, const std::string& why) {
  throw std::invalid_argument(field + ": " + why);
}

template <typename T>
T Get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    BadField(key, "wrong type");
  }
}

std::string FormatReal(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double ParseReal(const std::string& s) {
  if (s == "nan") return std::nan("");
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("bad number: " + s);
  return v;
}

std::uint64_t Fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string Hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::pair<double, double> ParseNoise(const std::string& text) {
  if (text.empty()) return {0.0, 0.0};
  auto parts = SplitList(text, ':');
  if (parts.size() != 2) BadField("noise", "expected s:p");
  try {
    return {ParseReal(parts[0]), ParseReal(parts[1])};
  } catch (const std::exception&) {
    BadField("noise", "expected s:p with numeric s and p");
  }
}

}  // namespace

json DefaultConfigJson() {
  return json{
      {"method", "fedl2g-f"},
      {"clients", 20},
      {"rho", 1.0},
      {"rounds", 200},
      {"warmup", 50},
      {"eta_c", 0.01},
      {"eta_s", nullptr},
      {"eta_s_scale", 1.0},
      {"batch_size", 10},
      {"quiz_size", 10},
      {"test_fraction", 0.25},
      {"stratified_quiz", true},
      {"guiding_weight", 1.0},
      {"seeds", json::array({1, 2, 3})},
      {"workers", 1},
      {"eval_every", 1},
      {"noise", ""},
      {"partition", "dirichlet:0.1"},
      {"dataset", "synthetic"},
      {"classes", 10},
      {"dim", 32},
      {"samples_per_class", 200},
      {"spread", 1.0},
      {"data_seed", 1},
      {"feature_dim", 32},
      {"activation", "relu"},
      {"out", "runs"},
      {"checkpoint_at", 0},
      {"resume", false},
  };
}

void MergeConfig(json& base, const json& layer, const std::string& origin) {
  if (!layer.is_object()) throw std::invalid_argument(origin + ": config must be a JSON object");
  for (const auto& [key, value] : layer.items()) {
    if (!base.contains(key)) {
      throw std::invalid_argument(origin + ": unknown key '" + key + "'");
    }
    base[key] = value;
  }
}

void SetConfigValue(json& config, const std::string& key,
                    const std::string& text, const std::string& origin) {
  if (!config.contains(key)) {
    throw std::invalid_argument(origin + ": unknown key '" + key + "'");
  }
  const json defaults = DefaultConfigJson();
  const json& proto = defaults.at(key);
  try {
    if (key == "eta_s" || proto.is_number_float()) {
      config[key] = ParseReal(text);
    } else if (proto.is_number_integer()) {
      std::size_t used = 0;
      const long long v = std::stoll(text, &used);
      if (used != text.size()) throw std::invalid_argument("trailing");
      config[key] = v;
    } else if (proto.is_boolean()) {
      if (text == "true" || text == "1") {
        config[key] = true;
      } else if (text == "false" || text == "0") {
        config[key] = false;
      } else {
        throw std::invalid_argument("bool");
      }
    } else if (proto.is_array()) {
      json arr = json::array();
      for (const auto& item : SplitList(text, ',')) {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(item, &used);
        if (used != item.size()) throw std::invalid_argument("trailing");
        arr.push_back(v);
      }
      config[key] = arr;
    } else {
      config[key] = text;
    }
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument(origin + ": invalid value '" + text + "' for " + key);
  } catch (const std::out_of_range&) {
    throw std::invalid_argument(origin + ": value out of range for " + key);
  }
}

void ApplyEnvironment(json& config, const std::map<std::string, std::string>& env) {
  const json defaults = DefaultConfigJson();
  for (const auto& [key, unused] : defaults.items()) {
    std::string var = kEnvPrefix;
    for (char c : key) var += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    auto it = env.find(var);
    if (it != env.end()) SetConfigValue(config, key, it->second, var);
  }
}

ExperimentConfig ConfigFromJson(const json& j) {
  json full = DefaultConfigJson();
  MergeConfig(full, j, "config");

  ExperimentConfig c;
  RunConfig& r = c.run;
  try {
    r.method = ParseMethod(Get<std::string>(full, "method"));
  } catch (const std::invalid_argument& e) {
    BadField("method", e.what());
  }
  r.clients = Get<int>(full, "clients");
  r.rho = Get<double>(full, "rho");
  r.rounds = Get<int>(full, "rounds");
  r.warmup = Get<int>(full, "warmup");
  r.eta_c = Get<double>(full, "eta_c");
  c.eta_s_scale = Get<double>(full, "eta_s_scale");
  if (!(c.eta_s_scale > 0.0)) BadField("eta_s_scale", "must be > 0");
  r.eta_s = full.at("eta_s").is_null() ? DefaultServerRate(r.method, c.eta_s_scale)
                                       : Get<double>(full, "eta_s");
  r.batch_size = Get<int>(full, "batch_size");
  r.quiz_size = Get<int>(full, "quiz_size");
  r.guiding_weight = Get<double>(full, "guiding_weight");
  r.workers = Get<int>(full, "workers");
  r.eval_every = Get<int>(full, "eval_every");
  r.feature_dim = Get<int>(full, "feature_dim");
  try {
    r.activation = ParseActivation(Get<std::string>(full, "activation"));
  } catch (const std::invalid_argument& e) {
    BadField("activation", e.what());
  }
  const auto [scale, fraction] = ParseNoise(Get<std::string>(full, "noise"));
  r.noise.scale = scale;
  r.noise.fraction = fraction;
  if ((scale > 0.0 || fraction > 0.0) && !IsLearningToGuide(r.method)) {
    BadField("noise", "only applies to fedl2g-l and fedl2g-f");
  }
  if (!full.at("eta_s").is_null() && !IsLearningToGuide(r.method)) {
    BadField("eta_s", "only applies to fedl2g-l and fedl2g-f");
  }

  c.seeds = Get<std::vector<std::uint64_t>>(full, "seeds");
  if (c.seeds.empty()) BadField("seeds", "need at least one seed");
  r.seed = c.seeds.front();
  try {
    c.partition = PartitionScheme::Parse(Get<std::string>(full, "partition"));
  } catch (const std::invalid_argument& e) {
    BadField("partition", e.what());
  }
  const auto dataset = Get<std::string>(full, "dataset");
  if (dataset == "synthetic") {
    c.dataset.kind = DatasetSource::Kind::kSynthetic;
  } else if (dataset.rfind("file:", 0) == 0 && dataset.size() > 5) {
    c.dataset.kind = DatasetSource::Kind::kFile;
    c.dataset.path = dataset.substr(5);
  } else {
    BadField("dataset", "expected 'synthetic' or 'file:PATH'");
  }
  c.dataset.synthetic.class_count = Get<int>(full, "classes");
  c.dataset.synthetic.input_dim = Get<int>(full, "dim");
  c.dataset.synthetic.samples_per_class = Get<int>(full, "samples_per_class");
  c.dataset.synthetic.cluster_spread = Get<double>(full, "spread");
  if (c.class_count() < 2) BadField("classes", "need at least 2");
  if (c.input_dim() < 1) BadField("dim", "must be >= 1");
  if (c.dataset.synthetic.samples_per_class < 1) BadField("samples_per_class", "must be >= 1");
  if (c.dataset.synthetic.cluster_spread < 0.0) BadField("spread", "must be >= 0");
  c.data_seed = Get<std::uint64_t>(full, "data_seed");
  c.test_fraction = Get<double>(full, "test_fraction");
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) BadField("test_fraction", "must be in (0, 1)");
  c.stratified_quiz = Get<bool>(full, "stratified_quiz");
  c.out_dir = Get<std::string>(full, "out");
  c.checkpoint_at = Get<int>(full, "checkpoint_at");
  if (c.checkpoint_at < 0 || c.checkpoint_at >= r.rounds) {
    BadField("checkpoint_at", "must be in [0, rounds)");
  }
  c.resume = Get<bool>(full, "resume");
  r.Validate();
  return c;
}

json ConfigToJson(const ExperimentConfig& c) {
  json j = DefaultConfigJson();
  const RunConfig& r = c.run;
  j["method"] = std::string(ToString(r.method));
  j["clients"] = r.clients;
  j["rho"] = r.rho;
  j["rounds"] = r.rounds;
  j["warmup"] = r.warmup;
  j["eta_c"] = r.eta_c;
  j["eta_s"] = IsLearningToGuide(r.method) ? json(r.eta_s) : json(nullptr);
  j["eta_s_scale"] = c.eta_s_scale;
  j["batch_size"] = r.batch_size;
  j["quiz_size"] = r.quiz_size;
  j["test_fraction"] = c.test_fraction;
  j["stratified_quiz"] = c.stratified_quiz;
  j["guiding_weight"] = r.guiding_weight;
  j["seeds"] = c.seeds;
  j["workers"] = r.workers;
  j["eval_every"] = r.eval_every;
  j["noise"] = r.noise.scale > 0.0 || r.noise.fraction > 0.0
                   ? FormatReal(r.noise.scale) + ":" + FormatReal(r.noise.fraction)
                   : std::string();
  j["partition"] = c.partition.ToString();
  j["dataset"] = c.dataset.kind == DatasetSource::Kind::kSynthetic
                     ? std::string("synthetic")
                     : "file:" + c.dataset.path.string();
  j["classes"] = c.class_count();
  j["dim"] = c.input_dim();
  j["samples_per_class"] = c.dataset.synthetic.samples_per_class;
  j["spread"] = c.dataset.synthetic.cluster_spread;
  j["data_seed"] = c.data_seed;
  j["feature_dim"] = r.feature_dim;
  j["activation"] = std::string(ToString(r.activation));
  j["out"] = c.out_dir.string();
  j["checkpoint_at"] = c.checkpoint_at;
  j["resume"] = c.resume;
  return j;
}

ExperimentConfig LoadConfig(
    const std::optional<std::filesystem::path>& file,
    const std::map<std::string, std::string>& env,
    const std::vector<std::pair<std::string, std::string>>& overrides) {
  json config = DefaultConfigJson();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw std::invalid_argument("cannot read config " + file->string());
    json layer;
    try {
      layer = json::parse(in);
    } catch (const json::parse_error& e) {
      throw std::invalid_argument(file->string() + ": " + e.what());
    }
    MergeConfig(config, layer, file->string());
  }
  ApplyEnvironment(config, env);
  for (const auto& [key, value] : overrides) SetConfigValue(config, key, value, "--" + key);
  return ConfigFromJson(config);
}

PreparedData PrepareData(const ExperimentConfig& config) {
  Dataset ds;
  if (config.dataset.kind == DatasetSource::Kind::kSynthetic) {
    ds = GenerateSynthetic(config.dataset.synthetic, config.data_seed);
  } else {
    ds = LoadDelimited(config.dataset.path, {config.input_dim(), config.class_count()});
  }
  if (ds.size() < static_cast<std::size_t>(ds.class_count)) {
    throw std::invalid_argument("dataset has fewer samples than classes");
  }
  const auto min_samples = 2 * static_cast<std::size_t>(config.run.quiz_size);
  const PartitionPlan plan =
      Partition(ds, config.run.clients, config.partition, config.data_seed, min_samples);
  SplitOptions split;
  split.test_fraction = config.test_fraction;
  split.quiz_size = config.run.quiz_size;
  split.stratified_quiz = config.stratified_quiz;

  PreparedData out;
  out.input_dim = ds.input_dim();
  out.class_count = ds.class_count;
  for (int i = 0; i < config.run.clients; ++i) {
    out.clients.push_back(
        SplitClient(ds.Subset(plan.ClientRows(i)), split, config.data_seed, i));
  }
  return out;
}

RunConfig RunConfigForSeed(const ExperimentConfig& config, std::uint64_t seed) {
  RunConfig r = config.run;
  r.seed = seed;
  return r;
}

std::string ConfigDigest(const ExperimentConfig& config) {
  json j = ConfigToJson(config);
  j.erase("out");
  j.erase("workers");
  j.erase("checkpoint_at");
  j.erase("resume");
  return Hex(Fnv1a(j.dump()));
}

std::string DataDigest(const ExperimentConfig& config) {
  const json full = ConfigToJson(config);
  json j;
  for (const char* key : {"dataset", "classes", "dim", "samples_per_class", "spread",
                          "data_seed", "partition", "clients", "test_fraction",
                          "quiz_size", "stratified_quiz"}) {
    j[key] = full.at(key);
  }
  return Hex(Fnv1a(j.dump()));
}

MeanStd ComputeMeanStd(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean of empty list");
  MeanStd s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

SeedResult SummarizeSeed(std::uint64_t seed, const std::vector<RoundMetrics>& history,
                         int warmup) {
  SeedResult r;
  r.seed = seed;
  std::vector<double> acc;
  std::vector<double> trained;  // accuracy after the warm-up rounds
  std::vector<std::size_t> trained_rounds;
  for (const auto& m : history) {
    r.upload_bytes += m.upload_bytes;
    r.download_bytes += m.download_bytes;
    if (!m.evaluated) continue;
    acc.push_back(m.accuracy);
    r.cumulative_loss_increase += m.loss_increase;
    if (m.round > warmup) {
      trained.push_back(m.accuracy);
      trained_rounds.push_back(m.round);
    }
  }
  if (acc.empty()) throw std::invalid_argument("history has no evaluated rounds");
  r.final_accuracy = acc.back();
  r.best_accuracy = *std::max_element(acc.begin(), acc.end());
  // Accuracy is frozen while warming up, so that plateau is not convergence.
  const std::size_t k = trained.empty() ? 0 : ConvergenceRound(trained);
  r.convergence_round = k == 0 ? history.back().round : trained_rounds[k - 1];
  for (auto it = history.rbegin(); it != history.rend(); ++it) {
    if (it->evaluated) {
      r.final_client_accuracy = it->client_accuracy;
      break;
    }
  }
  return r;
}

void FinalizeSummary(RunSummary& s) {
  if (s.seeds.empty()) return;
  std::vector<double> finals;
  std::vector<double> bests;
  double conv = 0.0;
  double bytes = 0.0;
  double top = -1.0;
  for (const auto& r : s.seeds) {
    finals.push_back(r.final_accuracy);
    bests.push_back(r.best_accuracy);
    conv += static_cast<double>(r.convergence_round);
    bytes += static_cast<double>(r.upload_bytes + r.download_bytes);
    if (r.best_accuracy > top) {
      top = r.best_accuracy;
      s.best_seed = r.seed;
    }
  }
  s.final_accuracy = ComputeMeanStd(finals);
  s.best_accuracy = ComputeMeanStd(bests);
  s.mean_convergence_round = conv / static_cast<double>(s.seeds.size());
  s.mean_total_bytes = bytes / static_cast<double>(s.seeds.size());
}

json SummaryToJson(const RunSummary& s) {
  json seeds = json::array();
  for (const auto& r : s.seeds) {
    seeds.push_back({{"seed", r.seed},
                     {"final_accuracy", r.final_accuracy},
                     {"best_accuracy", r.best_accuracy},
                     {"convergence_round", r.convergence_round},
                     {"upload_bytes", r.upload_bytes},
                     {"download_bytes", r.download_bytes},
                     {"cumulative_loss_increase", r.cumulative_loss_increase},
                     {"final_client_accuracy", r.final_client_accuracy},
                     {"metrics_file", r.metrics_file}});
  }
  return json{{"format", kSummaryFormat},
              {"method", s.method},
              {"config_digest", s.config_digest},
              {"data_digest", s.data_digest},
              {"config", s.config},
              {"seeds", seeds},
              {"final_accuracy", {{"mean", s.final_accuracy.mean}, {"std", s.final_accuracy.std}}},
              {"best_accuracy",
               {{"mean", s.best_accuracy.mean}, {"std", s.best_accuracy.std}, {"best_seed", s.best_seed}}},
              {"mean_convergence_round", s.mean_convergence_round},
              {"mean_total_bytes", s.mean_total_bytes},
              {"status", s.complete ? "complete" : "partial"},
              {"error", s.error}};
}

RunSummary SummaryFromJson(const json& j) {
  try {
    if (j.at("format").get<std::string>() != kSummaryFormat) {
      throw std::invalid_argument("unsupported summary format");
    }
    RunSummary s;
    s.method = j.at("method").get<std::string>();
    s.config_digest = j.at("config_digest").get<std::string>();
    s.data_digest = j.at("data_digest").get<std::string>();
    s.config = j.at("config");
    for (const auto& r : j.at("seeds")) {
      SeedResult sr;
      sr.seed = r.at("seed").get<std::uint64_t>();
      sr.final_accuracy = r.at("final_accuracy").get<double>();
      sr.best_accuracy = r.at("best_accuracy").get<double>();
      sr.convergence_round = r.at("convergence_round").get<std::size_t>();
      sr.upload_bytes = r.at("upload_bytes").get<std::uint64_t>();
      sr.download_bytes = r.at("download_bytes").get<std::uint64_t>();
      sr.cumulative_loss_increase = r.at("cumulative_loss_increase").get<double>();
      sr.final_client_accuracy = r.at("final_client_accuracy").get<std::vector<double>>();
      sr.metrics_file = r.at("metrics_file").get<std::string>();
      s.seeds.push_back(std::move(sr));
    }
    s.final_accuracy = {j.at("final_accuracy").at("mean").get<double>(),
                        j.at("final_accuracy").at("std").get<double>()};
    s.best_accuracy = {j.at("best_accuracy").at("mean").get<double>(),
                       j.at("best_accuracy").at("std").get<double>()};
    s.best_seed = j.at("best_accuracy").at("best_seed").get<std::uint64_t>();
    s.mean_convergence_round = j.at("mean_convergence_round").get<double>();
    s.mean_total_bytes = j.at("mean_total_bytes").get<double>();
    s.complete = j.at("status").get<std::string>() == "complete";
    s.error = j.at("error").get<std::string>();
    return s;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed summary: ") + e.what());
  }
}

RunSummary ReadSummary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return SummaryFromJson(json::parse(in));
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void WriteMetricsCsv(std::ostream& os, const std::vector<RoundMetrics>& history) {
  os << kMetricsHeader << '\n';
  for (const auto& m : history) {
    os << m.round << ',' << FormatReal(m.accuracy) << ',' << FormatReal(m.mean_ce) << ','
       << FormatReal(m.loss_increase) << ',' << m.upload_bytes << ',' << m.download_bytes
       << ',' << FormatReal(m.grad_norm_sq) << '\n';
  }
}

std::vector<RoundMetrics> ReadMetricsCsv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kMetricsHeader) {
    throw std::runtime_error("metrics file: missing or wrong header");
  }
  std::vector<RoundMetrics> out;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = SplitList(line, ',');
    if (f.size() != 7) {
      throw std::runtime_error("metrics file line " + std::to_string(line_no) +
                               ": expected 7 fields");
    }
    try {
      RoundMetrics m;
      m.round = std::stoi(f[0]);
      m.accuracy = ParseReal(f[1]);
      m.mean_ce = ParseReal(f[2]);
      m.loss_increase = ParseReal(f[3]);
      m.upload_bytes = std::stoull(f[4]);
      m.download_bytes = std::stoull(f[5]);
      m.grad_norm_sq = ParseReal(f[6]);
      m.evaluated = !std::isnan(m.accuracy);
      out.push_back(std::move(m));
    } catch (const std::logic_error&) {
      throw std::runtime_error("metrics file line " + std::to_string(line_no) +
                               ": malformed value");
    }
  }
  return out;
}

void WriteClientAccuracyCsv(std::ostream& os, const std::vector<RoundMetrics>& history,
                            int clients) {
  os << "round";
  for (int i = 0; i < clients; ++i) os << ",client_" << i;
  os << '\n';
  for (const auto& m : history) {
    if (!m.evaluated) continue;
    os << m.round;
    for (double a : m.client_accuracy) os << ',' << FormatReal(a);
    os << '\n';
  }
}

std::string MetricsFileName(Method method, std::uint64_t seed) {
  return std::string(ToString(method)) + "_seed" + std::to_string(seed) + ".csv";
}

std::string SummaryFileName(Method method) {
  return std::string(ToString(method)) + "_summary.json";
}

RunSummary RunExperiment(const ExperimentConfig& config) {
  std::filesystem::create_directories(config.out_dir);
  RunSummary summary;
  summary.method = std::string(ToString(config.run.method));
  summary.config_digest = ConfigDigest(config);
  summary.data_digest = DataDigest(config);
  summary.config = ConfigToJson(config);

  auto write_summary = [&] {
    std::ofstream os(config.out_dir / SummaryFileName(config.run.method));
    os << SummaryToJson(summary).dump(2) << '\n';
    if (!os) throw std::runtime_error("cannot write summary in " + config.out_dir.string());
  };

  try {
    const PreparedData data = PrepareData(config);
    for (std::uint64_t seed : config.seeds) {
      const RunConfig run = RunConfigForSeed(config, seed);
      TrainingOptions options;
      const std::string stem =
          std::string(ToString(run.method)) + "_seed" + std::to_string(seed);
      const auto ckpt = config.out_dir / (stem + ".ckpt");
      if (config.checkpoint_at > 0) {
        options.checkpoint_round = config.checkpoint_at;
        options.checkpoint_path = ckpt;
      }
      if (config.resume && std::filesystem::exists(ckpt)) options.resume_from = ckpt;

      TrainingResult result =
          RunTraining(run, data.clients, data.input_dim, data.class_count, options);

      SeedResult sr = SummarizeSeed(seed, result.history,
                                    IsLearningToGuide(run.method) ? run.warmup : 0);
      sr.metrics_file = MetricsFileName(run.method, seed);
      {
        std::ofstream os(config.out_dir / sr.metrics_file);
        WriteMetricsCsv(os, result.history);
        if (!os) throw std::runtime_error("cannot write " + sr.metrics_file);
      }
      {
        std::ofstream os(config.out_dir / (stem + "_clients.csv"));
        WriteClientAccuracyCsv(os, result.history, run.clients);
      }
      summary.seeds.push_back(std::move(sr));
    }
  } catch (const std::exception& e) {
    summary.complete = false;
    summary.error = e.what();
    FinalizeSummary(summary);
    write_summary();
    throw;
  }
  FinalizeSummary(summary);
  write_summary();
  return summary;
}

std::vector<ComparisonRow> CompareRuns(std::span<const RunSummary> summaries) {
  if (summaries.size() < 2) throw std::invalid_argument("compare needs at least two summaries");
  for (const auto& s : summaries) {
    if (s.data_digest != summaries.front().data_digest) {
      throw std::invalid_argument("summaries for " + summaries.front().method + " and " +
                                  s.method + " use different datasets or partitions");
    }
  }
  std::vector<ComparisonRow> rows;
  for (const auto& s : summaries) {
    ComparisonRow r;
    r.method = s.method;
    r.accuracy = s.final_accuracy;
    r.convergence_round = s.mean_convergence_round;
    r.total_mb = s.mean_total_bytes / 1e6;
    rows.push_back(r);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.accuracy.mean > b.accuracy.mean;
  });
  return rows;
}

std::string FormatComparisonText(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "method" << std::right << std::setw(18)
     << "accuracy (%)" << std::setw(14) << "conv. round" << std::setw(14) << "comm. (MB)"
     << '\n';
  for (const auto& r : rows) {
    std::ostringstream acc;
    acc << std::fixed << std::setprecision(2) << 100.0 * r.accuracy.mean << " +- "
        << 100.0 * r.accuracy.std;
    os << std::left << std::setw(12) << r.method << std::right << std::setw(18) << acc.str()
       << std::setw(14) << std::fixed << std::setprecision(1) << r.convergence_round
       << std::setw(14) << std::setprecision(3) << r.total_mb << '\n';
  }
  return os.str();
}

std::string FormatComparisonCsv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << "method,accuracy_mean,accuracy_std,convergence_round,total_mb\n";
  for (const auto& r : rows) {
    os << r.method << ',' << FormatReal(r.accuracy.mean) << ',' << FormatReal(r.accuracy.std)
       << ',' << FormatReal(r.convergence_round) << ',' << FormatReal(r.total_mb) << '\n';
  }
  return os.str();
}

}  // namespace fedl2g
