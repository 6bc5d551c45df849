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
#ifndef FEDL2G_FEDERATION_HPP_
#define FEDL2G_FEDERATION_HPP_

// Round orchestration. Each round the server samples participants and sends
// them the shared payload; participants work in parallel; the server reduces
// their uploads in ascending client order and then every client is
// evaluated.
//
// Randomness is keyed by (seed, purpose, client, round), so results do not
// depend on the worker count or on the order clients finish in.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fedl2g/baselines.hpp"
#include "fedl2g/data.hpp"
#include "fedl2g/guidance.hpp"
#include "fedl2g/method.hpp"
#include "fedl2g/metrics.hpp"
#include "fedl2g/nn.hpp"

namespace fedl2g {

struct NoiseConfig {
  double scale = 0.0;
  double fraction = 0.0;

  bool enabled() const { return scale > 0.0 && fraction > 0.0; }
};

// Hidden widths of the heterogeneous MLP family; client i gets entry
// i mod size.
std::vector<std::vector<int>> DefaultModelFamily();

// 0.1 for the logit variant and 100 for the feature variant, times `scale`.
// Baselines and local-only have no server rate and get 1.
double DefaultServerRate(Method method, double scale = 1.0);

struct RunConfig {
  Method method = Method::kFedL2GFeature;
  int clients = 20;
  double rho = 1.0;
  int rounds = 200;
  int warmup = 50;
  double eta_c = 0.01;
  double eta_s = 100.0;
  int batch_size = 10;
  int quiz_size = 10;
  double guiding_weight = 1.0;
  std::uint64_t seed = 1;
  int workers = 1;
  int eval_every = 1;
  NoiseConfig noise;
  std::vector<std::vector<int>> model_family = DefaultModelFamily();
  int feature_dim = 32;
  Activation activation = Activation::kRelu;

  // Throws std::invalid_argument naming the offending field.
  void Validate() const;
  ModelSpec SpecFor(int client, int input_dim, int class_count) const;
};

using ServerPayload = std::variant<std::monostate, GuidingVectorSet, PrototypeSet>;

struct ServerState {
  int round = 0;  // completed rounds
  ServerPayload payload;
};

struct ClientState {
  int index = 0;
  ModelSpec spec;
  ModelParams params;
  ClientDataset data;
};

// Uniform subset of size max(1, round(rho * N)) in ascending order.
std::vector<int> SampleParticipants(std::uint64_t seed, int round, int clients,
                                    double rho);

ServerState InitServer(const RunConfig& config, int class_count);
std::vector<ClientState> InitClients(const RunConfig& config,
                                     std::vector<ClientDataset> data,
                                     int input_dim, int class_count);

// Executes round server.round + 1. `history` holds the metrics of all
// earlier rounds (used for the loss-increase column).
RoundMetrics RunRound(ServerState& server, std::vector<ClientState>& clients,
                      const RunConfig& config,
                      const std::vector<RoundMetrics>& history);

struct TrainingOptions {
  // Write a checkpoint after this many completed rounds (0 = never).
  int checkpoint_round = 0;
  std::filesystem::path checkpoint_path;
  // Continue from this checkpoint instead of starting fresh.
  std::optional<std::filesystem::path> resume_from;
  // Stop after this many completed rounds (0 = config.rounds).
  int stop_after = 0;
};

struct TrainingResult {
  std::vector<RoundMetrics> history;
  ServerState server;
  std::vector<ClientState> clients;
};

TrainingResult RunTraining(const RunConfig& config,
                           std::vector<ClientDataset> data, int input_dim,
                           int class_count, const TrainingOptions& options = {});

// Binary snapshot, little-endian, 64-bit floats. See docs/formats.md.
void SaveCheckpoint(const std::filesystem::path& path, const RunConfig& config,
                    const ServerState& server,
                    const std::vector<ClientState>& clients,
                    const std::vector<RoundMetrics>& history);

// Restores server state, client params and history into already initialized
// clients. Throws std::runtime_error when the file is malformed or does not
// belong to this configuration.
void LoadCheckpoint(const std::filesystem::path& path, const RunConfig& config,
                    ServerState& server, std::vector<ClientState>& clients,
                    std::vector<RoundMetrics>& history);

}  // namespace fedl2g

#endif  // FEDL2G_FEDERATION_HPP_
