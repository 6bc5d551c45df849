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
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "fedl2g/experiment.hpp"
#include "fedl2g/federation.hpp"

namespace fedl2g {
namespace {

// Six clients on a small synthetic task; a few seconds at most.
ExperimentConfig SmallConfig(Method method) {
  ExperimentConfig c = ConfigFromJson({{"method", std::string(ToString(method))},
                                       {"clients", 6},
                                       {"rounds", 8},
                                       {"warmup", 3},
                                       {"samples_per_class", 30},
                                       {"classes", 4},
                                       {"dim", 6},
                                       {"partition", "dirichlet:0.5"},
                                       {"quiz_size", 4},
                                       {"batch_size", 5},
                                       {"feature_dim", 5}});
  return c;
}

TrainingResult Train(const ExperimentConfig& c, const TrainingOptions& options = {},
                     int workers = 1) {
  const PreparedData data = PrepareData(c);
  RunConfig run = RunConfigForSeed(c, c.seeds.front());
  run.workers = workers;
  return RunTraining(run, data.clients, data.input_dim, data.class_count, options);
}

std::string MetricsText(const std::vector<RoundMetrics>& h) {
  std::ostringstream os;
  WriteMetricsCsv(os, h);
  return os.str();
}

class TempDir {
 public:
  TempDir() : path_(std::filesystem::temp_directory_path() /
                    ("fedl2g_fed_test_" + std::to_string(::getpid()) + "_" +
                     std::to_string(counter_++))) {
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

TEST(ParticipantsTest, SizeOrderAndDeterminism) {
  const auto a = SampleParticipants(3, 7, 20, 0.25);
  EXPECT_EQ(a.size(), 5u);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(std::set<int>(a.begin(), a.end()).size(), 5u);
  EXPECT_EQ(a, SampleParticipants(3, 7, 20, 0.25));
  EXPECT_EQ(SampleParticipants(3, 7, 20, 1.0).size(), 20u);
  EXPECT_EQ(SampleParticipants(3, 7, 20, 0.01).size(), 1u);
  EXPECT_THROW(SampleParticipants(3, 7, 20, 0.0), std::invalid_argument);
}

TEST(ParticipantsTest, PartialParticipationVariesByRound) {
  std::set<std::vector<int>> seen;
  for (int t = 1; t <= 10; ++t) seen.insert(SampleParticipants(1, t, 20, 0.5));
  EXPECT_GT(seen.size(), 1u);
}

TEST(RunConfigTest, ValidationNamesTheField) {
  RunConfig c;
  c.rho = 0.0;
  try {
    c.Validate();
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_EQ(std::string(e.what()).rfind("rho", 0), 0u) << e.what();
  }
  c = RunConfig{};
  c.warmup = c.rounds;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
  c = RunConfig{};
  c.method = Method::kFedL2GLogit;
  c.eta_s = 0.0;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
}

TEST(RunConfigTest, ModelFamilyCyclesByClient) {
  RunConfig c;
  const auto family = DefaultModelFamily();
  for (int i = 0; i < 12; ++i) {
    const ModelSpec s = c.SpecFor(i, 32, 10);
    EXPECT_EQ(s.hidden_widths, family[static_cast<std::size_t>(i) % family.size()]);
    EXPECT_EQ(s.feature_dim, 32);
  }
}

TEST(FederationTest, WorkerCountDoesNotChangeResults) {
  for (Method m : {Method::kFedL2GFeature, Method::kFedProto}) {
    auto c = SmallConfig(m);
    c.run.rho = 0.5;
    const auto one = Train(c, {}, 1);
    const auto four = Train(c, {}, 4);
    EXPECT_EQ(MetricsText(one.history), MetricsText(four.history));
    for (std::size_t i = 0; i < one.clients.size(); ++i) {
      EXPECT_EQ(one.clients[i].params.flat, four.clients[i].params.flat);
    }
  }
}

TEST(FederationTest, CheckpointResumeIsBitExact) {
  TempDir dir;
  for (Method m : {Method::kFedL2GLogit, Method::kFedDistill, Method::kLocalOnly}) {
    const auto c = SmallConfig(m);
    const auto ckpt = dir.path() / "state.ckpt";
    TrainingOptions save;
    save.checkpoint_round = 5;
    save.checkpoint_path = ckpt;
    const auto full = Train(c, save);
    TrainingOptions resume;
    resume.resume_from = ckpt;
    const auto resumed = Train(c, resume);
    EXPECT_EQ(MetricsText(full.history), MetricsText(resumed.history));
    for (std::size_t i = 0; i < full.clients.size(); ++i) {
      EXPECT_EQ(full.clients[i].params.flat, resumed.clients[i].params.flat);
    }
  }
}

TEST(FederationTest, CheckpointRejectsForeignConfig) {
  TempDir dir;
  const auto c = SmallConfig(Method::kFedL2GFeature);
  TrainingOptions save;
  save.checkpoint_round = 2;
  save.checkpoint_path = dir.path() / "a.ckpt";
  save.stop_after = 2;
  Train(c, save);
  auto other = c;
  other.run.method = Method::kFedProto;
  TrainingOptions resume;
  resume.resume_from = save.checkpoint_path;
  EXPECT_THROW(Train(other, resume), std::runtime_error);
  auto reseeded = c;
  reseeded.seeds = {99};
  EXPECT_THROW(Train(reseeded, resume), std::runtime_error);
  std::ofstream(dir.path() / "junk.ckpt") << "not a checkpoint";
  resume.resume_from = dir.path() / "junk.ckpt";
  EXPECT_THROW(Train(c, resume), std::runtime_error);
}

TEST(FederationTest, WarmupLeavesParametersUntouched) {
  const auto c = SmallConfig(Method::kFedL2GFeature);
  const PreparedData data = PrepareData(c);
  const RunConfig run = RunConfigForSeed(c, 1);
  ServerState server = InitServer(run, data.class_count);
  auto clients = InitClients(run, data.clients, data.input_dim, data.class_count);
  std::vector<Eigen::VectorXd> initial;
  for (const auto& cl : clients) initial.push_back(cl.params.flat);
  std::vector<RoundMetrics> history;
  const Eigen::MatrixXd g0 = std::get<GuidingVectorSet>(server.payload).vectors;
  for (int t = 1; t <= run.warmup; ++t) {
    history.push_back(RunRound(server, clients, run, history));
    for (std::size_t i = 0; i < clients.size(); ++i) {
      EXPECT_EQ(clients[i].params.flat, initial[i]) << "round " << t;
    }
  }
  EXPECT_NE(std::get<GuidingVectorSet>(server.payload).vectors, g0);
  history.push_back(RunRound(server, clients, run, history));
  EXPECT_NE(clients[0].params.flat, initial[0]);
}

TEST(FederationTest, LocalOnlySendsNothing) {
  const auto r = Train(SmallConfig(Method::kLocalOnly));
  for (const auto& m : r.history) {
    EXPECT_EQ(m.upload_bytes, 0u);
    EXPECT_EQ(m.download_bytes, 0u);
  }
}

TEST(FederationTest, BytesFollowTheTrace) {
  for (Method m : {Method::kFedL2GFeature, Method::kFedProto, Method::kFedL2GLogit,
                   Method::kFedDistill}) {
    const auto c = SmallConfig(m);
    const auto r = Train(c);
    const int dim = SpaceOf(m) == GuidedSpace::kLogit ? 4 : 5;
    for (const auto& h : r.history) {
      EXPECT_EQ(AccountBytes(h.trace, m, 4, dim), (ByteCount{h.upload_bytes, h.download_bytes}));
      EXPECT_EQ(h.trace.participants.size(), 6u);
    }
  }
}

TEST(FederationTest, EvaluationCadenceLeavesGaps) {
  auto c = SmallConfig(Method::kFedProto);
  c.run.eval_every = 3;
  const auto r = Train(c);
  for (const auto& h : r.history) {
    const bool expected = h.round % 3 == 0 || h.round == c.run.rounds;
    EXPECT_EQ(h.evaluated, expected);
    EXPECT_EQ(std::isnan(h.accuracy), !expected);
  }
}

TEST(FederationTest, MetricsStayInRange) {
  const auto r = Train(SmallConfig(Method::kFedL2GFeature));
  for (const auto& h : r.history) {
    EXPECT_GE(h.accuracy, 0.0);
    EXPECT_LE(h.accuracy, 1.0);
    EXPECT_GE(h.loss_increase, 0.0);
    EXPECT_GE(h.grad_norm_sq, 0.0);
    EXPECT_EQ(h.client_accuracy.size(), 6u);
  }
}

TEST(FederationTest, ClientErrorsNameTheClient) {
  const auto c = SmallConfig(Method::kFedL2GFeature);
  PreparedData data = PrepareData(c);
  data.clients[2].quiz.labels[0] = 99;
  const RunConfig run = RunConfigForSeed(c, 1);
  try {
    RunTraining(run, data.clients, data.input_dim, data.class_count);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("client 2"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace fedl2g
