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
#ifndef FEDL2G_DATA_HPP_
#define FEDL2G_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fedl2g/nn.hpp"

namespace fedl2g {

struct Dataset {
  Eigen::MatrixXd inputs;  // n x d
  std::vector<int> labels;
  int class_count = 0;

  std::size_t size() const { return labels.size(); }
  int input_dim() const { return static_cast<int>(inputs.cols()); }

  Dataset Subset(const std::vector<std::size_t>& rows) const;
  MiniBatch Batch(const std::vector<std::size_t>& rows) const;
  MiniBatch AsBatch() const { return {inputs, labels}; }
  // Sorted distinct labels.
  std::vector<int> Classes() const;
};

struct SyntheticSpec {
  int class_count = 10;
  int input_dim = 32;
  int samples_per_class = 200;
  double cluster_spread = 1.0;
};

// Class-conditional Gaussian clusters around random unit-norm means.
Dataset GenerateSynthetic(const SyntheticSpec& spec, std::uint64_t seed);

struct DelimitedSchema {
  int input_dim = 0;
  int class_count = 0;
};

// Comma-separated rows of input_dim reals followed by one integer label, no
// header. Throws std::runtime_error naming the offending line.
Dataset LoadDelimited(const std::filesystem::path& path,
                      const DelimitedSchema& schema);

struct PartitionScheme {
  enum class Kind { kDirichlet, kPathological };
  Kind kind = Kind::kDirichlet;
  double beta = 0.1;
  int classes_per_client = 2;

  // "dirichlet:0.1" or "pathological:2".
  static PartitionScheme Parse(std::string_view text);
  std::string ToString() const;
};

struct PartitionPlan {
  std::vector<int> assignment;  // client index per sample
  int client_count = 0;
  PartitionScheme scheme;
  std::uint64_t seed = 0;

  std::vector<std::size_t> ClientRows(int client) const;
};

// Per class, client shares ~ Dirichlet(beta * 1_N) turned into counts by
// largest-remainder rounding. Plans leaving a client with fewer than
// min_client_samples are redrawn up to 100 times.
PartitionPlan PartitionDirichlet(const Dataset& ds, int clients, double beta,
                                 std::uint64_t seed,
                                 std::size_t min_client_samples);

// Every client gets exactly classes_per_client classes; each class is split
// into non-empty shards of Dirichlet(1) sizes among the clients holding it.
PartitionPlan PartitionPathological(const Dataset& ds, int clients,
                                    int classes_per_client, std::uint64_t seed,
                                    std::size_t min_client_samples);

PartitionPlan Partition(const Dataset& ds, int clients,
                        const PartitionScheme& scheme, std::uint64_t seed,
                        std::size_t min_client_samples);

struct SplitOptions {
  double test_fraction = 0.25;
  int quiz_size = 10;
  bool stratified_quiz = true;
};

struct ClientDataset {
  int client_index = 0;
  Dataset study;
  MiniBatch quiz;
  Dataset test;
  std::vector<int> label_inventory;  // classes present in study
};

// Disjoint test (floor(n * test_fraction), at least 1), quiz (exactly
// quiz_size) and study (the remainder, non-empty) sets.
ClientDataset SplitClient(const Dataset& local, const SplitOptions& options,
                          std::uint64_t seed, int client_index);

}  // namespace fedl2g

#endif  // FEDL2G_DATA_HPP_
