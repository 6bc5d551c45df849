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
#include "fedl2g/federation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "fedl2g/rng.hpp"

namespace fedl2g {
namespace {

// Runs fn(0..n-1) on up to `workers` threads. The first failure is rethrown
// after all threads join, prefixed with the failing index.
void ParallelFor(std::size_t n, int workers,
                 const std::function<void(std::size_t)>& fn,
                 const std::function<int(std::size_t)>& label) {
  std::vector<std::exception_ptr> errors(n);
  auto guarded = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t threads =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) guarded(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) guarded(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw std::runtime_error("client " + std::to_string(label(i)) + ": " + e.what());
    }
  }
}

struct ClientOutcome {
  ModelParams params;
  std::optional<GuidanceGradient> guidance;
  std::optional<LocalPrototypes> prototypes;
  int uploaded_rows = 0;
};

// Loss used for local training and the gradient-norm diagnostic. Null guide
// means plain cross-entropy.
std::optional<GuideTarget> SharedTarget(const ServerPayload& payload,
                                        double weight) {
  if (const auto* g = std::get_if<GuidingVectorSet>(&payload)) {
    return g->AsTarget(weight);
  }
  if (const auto* p = std::get_if<PrototypeSet>(&payload)) {
    return p->AsTarget(weight);
  }
  return std::nullopt;
}

MiniBatch SamplePseudoBatch(const Dataset& study, int batch_size, Engine& rng) {
  std::vector<std::size_t> rows(study.size());
  std::iota(rows.begin(), rows.end(), 0);
  const std::size_t take =
      std::min(rows.size(), static_cast<std::size_t>(batch_size));
  for (std::size_t k = 0; k < take; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, rows.size() - 1);
    std::swap(rows[k], rows[pick(rng)]);
  }
  rows.resize(take);
  return study.Batch(rows);
}

ClientOutcome ClientWork(const ClientState& client, const ServerPayload& payload,
                         const RunConfig& config, int round) {
  const auto idx = static_cast<std::uint64_t>(client.index);
  const auto t = static_cast<std::uint64_t>(round);
  ClientOutcome out;
  out.params = client.params;

  if (config.method == Method::kLocalOnly) {
    Engine rng = MakeStream(config.seed, StreamPurpose::kLocalTrain, idx, t);
    out.params = LocalOnlyUpdate(client.spec, client.params, client.data.study,
                                 config.eta_c, config.batch_size, rng);
    return out;
  }

  if (IsPrototypeBaseline(config.method)) {
    const auto& protos = std::get<PrototypeSet>(payload);
    const GuideTarget target = protos.AsTarget(config.guiding_weight);
    Engine rng = MakeStream(config.seed, StreamPurpose::kLocalTrain, idx, t);
    out.params = LocalTrainEpoch(client.spec, client.params, client.data.study,
                                 {&target}, config.eta_c, config.batch_size, rng);
    out.prototypes = ComputeLocalPrototypes(client.spec, out.params,
                                            client.data.study, protos.space);
    out.uploaded_rows = static_cast<int>(std::count_if(
        out.prototypes->counts.begin(), out.prototypes->counts.end(),
        [](long n) { return n > 0; }));
    return out;
  }

  const auto& guide = std::get<GuidingVectorSet>(payload);
  if (round > config.warmup) {
    const GuideTarget target = guide.AsTarget(config.guiding_weight);
    Engine rng = MakeStream(config.seed, StreamPurpose::kLocalTrain, idx, t);
    out.params = LocalTrainEpoch(client.spec, client.params, client.data.study,
                                 {&target}, config.eta_c, config.batch_size, rng);
  }
  Engine batch_rng = MakeStream(config.seed, StreamPurpose::kPseudoBatch, idx, t);
  const MiniBatch batch =
      SamplePseudoBatch(client.data.study, config.batch_size, batch_rng);
  GuidanceGradient grad =
      ComputeGuidanceGradient(client.spec, out.params, batch, client.data.quiz,
                              guide, config.eta_c, config.guiding_weight);
  if (config.noise.enabled()) {
    Engine noise_rng = MakeStream(config.seed, StreamPurpose::kPrivacyNoise, idx, t);
    grad = AddPrivacyNoise(grad, config.noise.scale, config.noise.fraction, noise_rng);
  }
  out.uploaded_rows = grad.PresentCount();
  out.guidance = std::move(grad);
  return out;
}

int PayloadDim(const ServerPayload& payload, int class_count) {
  if (const auto* g = std::get_if<GuidingVectorSet>(&payload)) return g->dim();
  if (const auto* p = std::get_if<PrototypeSet>(&payload)) {
    return static_cast<int>(p->vectors.cols());
  }
  return class_count;
}

}  // namespace

std::vector<std::vector<int>> DefaultModelFamily() {
  return {{16}, {32}, {32, 16}, {64, 32}, {64, 32, 16}};
}

double DefaultServerRate(Method method, double scale) {
  switch (method) {
    case Method::kFedL2GLogit: return 0.1 * scale;
    case Method::kFedL2GFeature: return 100.0 * scale;
    default: return 1.0;
  }
}

void RunConfig::Validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument(field + ": " + why);
  };
  if (clients < 2) fail("clients", "need at least 2");
  if (!(rho > 0.0 && rho <= 1.0)) fail("rho", "must be in (0, 1]");
  if (rounds < 1) fail("rounds", "must be >= 1");
  if (warmup < 0 || warmup >= rounds) fail("warmup", "must be in [0, rounds)");
  if (!(eta_c > 0.0)) fail("eta_c", "must be > 0");
  if (IsLearningToGuide(method) && !(eta_s > 0.0)) fail("eta_s", "must be > 0");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (quiz_size < 1) fail("quiz_size", "must be >= 1");
  if (!(guiding_weight >= 0.0)) fail("guiding_weight", "must be >= 0");
  if (workers < 1) fail("workers", "must be >= 1");
  if (eval_every < 1) fail("eval_every", "must be >= 1");
  if (noise.scale < 0.0) fail("noise", "scale must be >= 0");
  if (noise.fraction < 0.0 || noise.fraction > 1.0) fail("noise", "fraction must be in [0, 1]");
  if (model_family.empty()) fail("model_family", "must not be empty");
  for (const auto& widths : model_family) {
    if (widths.empty()) fail("model_family", "every entry needs a hidden layer");
    for (int w : widths) {
      if (w < 1) fail("model_family", "widths must be positive");
    }
  }
  if (feature_dim < 1) fail("feature_dim", "must be >= 1");
}

ModelSpec RunConfig::SpecFor(int client, int input_dim, int class_count) const {
  ModelSpec s;
  s.input_dim = input_dim;
  s.hidden_widths =
      model_family[static_cast<std::size_t>(client) % model_family.size()];
  s.feature_dim = feature_dim;
  s.class_count = class_count;
  s.activation = activation;
  return s;
}

std::vector<int> SampleParticipants(std::uint64_t seed, int round, int clients,
                                    double rho) {
  if (clients < 1) throw std::invalid_argument("no clients to sample");
  if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("rho must be in (0, 1]");
  const int k = std::clamp(
      static_cast<int>(std::lround(rho * static_cast<double>(clients))), 1, clients);
  std::vector<int> ids(static_cast<std::size_t>(clients));
  std::iota(ids.begin(), ids.end(), 0);
  if (k < clients) {
    Engine rng = MakeStream(seed, StreamPurpose::kParticipants,
                            static_cast<std::uint64_t>(round));
    for (int i = 0; i < k; ++i) {
      std::uniform_int_distribution<int> pick(i, clients - 1);
      std::swap(ids[static_cast<std::size_t>(i)],
                ids[static_cast<std::size_t>(pick(rng))]);
    }
    ids.resize(static_cast<std::size_t>(k));
    std::sort(ids.begin(), ids.end());
  }
  return ids;
}

ServerState InitServer(const RunConfig& config, int class_count) {
  ServerState s;
  const GuidedSpace space = SpaceOf(config.method);
  const int dim = space == GuidedSpace::kLogit ? class_count : config.feature_dim;
  if (IsLearningToGuide(config.method)) {
    s.payload = InitGuidingVectors(class_count, dim, space, config.seed);
  } else if (IsPrototypeBaseline(config.method)) {
    s.payload = EmptyPrototypes(class_count, dim, space);
  }
  return s;
}

std::vector<ClientState> InitClients(const RunConfig& config,
                                     std::vector<ClientDataset> data,
                                     int input_dim, int class_count) {
  if (data.size() != static_cast<std::size_t>(config.clients)) {
    throw std::invalid_argument("expected " + std::to_string(config.clients) +
                                " client datasets, got " + std::to_string(data.size()));
  }
  std::vector<ClientState> clients;
  clients.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    ClientState c;
    c.index = static_cast<int>(i);
    c.spec = config.SpecFor(c.index, input_dim, class_count);
    Engine rng = MakeStream(config.seed, StreamPurpose::kModelInit, i);
    c.params = InitParams(c.spec, rng);
    c.data = std::move(data[i]);
    if (c.data.study.size() == 0 || c.data.quiz.size() == 0 || c.data.test.size() == 0) {
      throw std::invalid_argument("client " + std::to_string(i) +
                                  " needs non-empty study, quiz and test sets");
    }
    clients.push_back(std::move(c));
  }
  return clients;
}

RoundMetrics RunRound(ServerState& server, std::vector<ClientState>& clients,
                      const RunConfig& config,
                      const std::vector<RoundMetrics>& history) {
  const auto start = std::chrono::steady_clock::now();
  const int round = server.round + 1;
  if (round > config.rounds) throw std::logic_error("all rounds already executed");

  RoundMetrics m;
  m.round = round;
  m.trace.participants =
      SampleParticipants(config.seed, round, static_cast<int>(clients.size()), config.rho);
  const auto& participants = m.trace.participants;

  std::vector<ClientOutcome> outcomes(participants.size());
  ParallelFor(
      participants.size(), config.workers,
      [&](std::size_t k) {
        const auto& client = clients[static_cast<std::size_t>(participants[k])];
        outcomes[k] = ClientWork(client, server.payload, config, round);
      },
      [&](std::size_t k) { return participants[k]; });

  // Ordered reduction.
  for (std::size_t k = 0; k < participants.size(); ++k) {
    m.trace.uploaded_rows.push_back(outcomes[k].uploaded_rows);
  }
  if (auto* guide = std::get_if<GuidingVectorSet>(&server.payload)) {
    std::vector<GuidanceGradient> grads;
    grads.reserve(outcomes.size());
    for (auto& o : outcomes) grads.push_back(std::move(*o.guidance));
    *guide = ServerUpdate(*guide, grads, config.eta_s);
  } else if (auto* protos = std::get_if<PrototypeSet>(&server.payload)) {
    std::vector<LocalPrototypes> locals;
    locals.reserve(outcomes.size());
    for (auto& o : outcomes) locals.push_back(std::move(*o.prototypes));
    *protos = AggregatePrototypes(locals, protos->space);
  }
  for (std::size_t k = 0; k < participants.size(); ++k) {
    clients[static_cast<std::size_t>(participants[k])].params =
        std::move(outcomes[k].params);
  }
  server.round = round;

  const int class_count = clients.front().spec.class_count;
  const ByteCount bytes = AccountBytes(m.trace, config.method, class_count,
                                       PayloadDim(server.payload, class_count));
  m.upload_bytes = bytes.upload;
  m.download_bytes = bytes.download;

  m.evaluated = round % config.eval_every == 0 || round == config.rounds;
  if (m.evaluated) {
    const std::optional<GuideTarget> target =
        SharedTarget(server.payload, config.guiding_weight);
    std::vector<ClientEvaluation> evals(clients.size());
    std::vector<double> norms(clients.size());
    ParallelFor(
        clients.size(), config.workers,
        [&](std::size_t i) {
          const auto& c = clients[i];
          evals[i] = EvaluateClient(c.spec, c.params, c.data);
          LossConfig loss;
          if (target) loss.guide = &*target;
          norms[i] = ParamGradient(c.spec, c.params, c.data.study.AsBatch(), loss)
                         .squaredNorm();
        },
        [&](std::size_t i) { return static_cast<int>(i); });
    const Evaluation ev = Evaluate(evals);
    m.accuracy = ev.accuracy;
    m.client_accuracy = ev.client_accuracy;
    m.mean_ce = ev.mean_ce;
    m.grad_norm_sq = std::accumulate(norms.begin(), norms.end(), 0.0) /
                     static_cast<double>(norms.size());
    double best = std::numeric_limits<double>::infinity();
    for (const auto& h : history) {
      if (h.evaluated) best = std::min(best, h.mean_ce);
    }
    m.loss_increase = std::isfinite(best) ? std::max(0.0, m.mean_ce - best) : 0.0;
  } else {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    m.accuracy = m.mean_ce = m.loss_increase = m.grad_norm_sq = nan;
  }
  m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return m;
}

TrainingResult RunTraining(const RunConfig& config,
                           std::vector<ClientDataset> data, int input_dim,
                           int class_count, const TrainingOptions& options) {
  config.Validate();
  TrainingResult r;
  r.server = InitServer(config, class_count);
  r.clients = InitClients(config, std::move(data), input_dim, class_count);
  if (options.resume_from) {
    LoadCheckpoint(*options.resume_from, config, r.server, r.clients, r.history);
  }
  const int stop = options.stop_after > 0 ? std::min(options.stop_after, config.rounds)
                                          : config.rounds;
  while (r.server.round < stop) {
    r.history.push_back(RunRound(r.server, r.clients, config, r.history));
    if (options.checkpoint_round > 0 && r.server.round == options.checkpoint_round) {
      SaveCheckpoint(options.checkpoint_path, config, r.server, r.clients, r.history);
    }
  }
  return r;
}

}  // namespace fedl2g
