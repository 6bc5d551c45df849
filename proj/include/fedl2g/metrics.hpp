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
#ifndef FEDL2G_METRICS_HPP_
#define FEDL2G_METRICS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "fedl2g/data.hpp"
#include "fedl2g/method.hpp"
#include "fedl2g/nn.hpp"

namespace fedl2g {

// Wire price of one transmitted real or class index.
inline constexpr std::uint64_t kBytesPerValue = 4;

// Who took part in a round and how many per-class rows each one uploaded.
struct RoundTrace {
  std::vector<int> participants;   // ascending client indices
  std::vector<int> uploaded_rows;  // parallel to participants

  bool operator==(const RoundTrace&) const = default;
};

struct RoundMetrics {
  int round = 0;
  bool evaluated = false;
  double accuracy = 0.0;
  std::vector<double> client_accuracy;
  double mean_ce = 0.0;
  double loss_increase = 0.0;
  std::uint64_t upload_bytes = 0;
  std::uint64_t download_bytes = 0;
  // Mean over clients of ||grad_theta L_study(theta, shared payload)||^2.
  double grad_norm_sq = 0.0;
  double wall_seconds = 0.0;
  RoundTrace trace;
};

struct ClientEvaluation {
  std::size_t correct = 0;
  std::size_t test_size = 0;
  double study_ce = 0.0;  // mean CE over the study set

  double accuracy() const {
    return test_size == 0 ? 0.0
                          : static_cast<double>(correct) /
                                static_cast<double>(test_size);
  }
};

struct Evaluation {
  double accuracy = 0.0;  // total correct / total test samples
  std::vector<double> client_accuracy;
  double mean_ce = 0.0;   // unweighted mean of per-client study CE
};

ClientEvaluation EvaluateClient(const ModelSpec& spec,
                                const ModelParams& params,
                                const ClientDataset& data);

Evaluation Evaluate(std::span<const ClientEvaluation> clients);

// max(0, h[t] - min_{tau < t} h[tau]); zero at t = 0.
std::vector<double> LossIncrease(std::span<const double> mean_ce_history);

struct ByteCount {
  std::uint64_t upload = 0;
  std::uint64_t download = 0;

  bool operator==(const ByteCount&) const = default;
};

// upload   = sum over participants of rows * (M * 4 + 4)
// download = participants * C * M * 4
// Local-only transmits nothing.
ByteCount AccountBytes(const RoundTrace& trace, Method method, int class_count,
                       int dim);

// First round t (counting from 1 = after the first round) at which the best
// accuracy over the next `window` rounds beats the best so far by less than
// `tol`; the history length when that never happens.
std::size_t ConvergenceRound(std::span<const double> accuracy,
                             std::size_t window = 20, double tol = 0.002);

struct SeparabilityStats {
  double min_distance = 0.0;
  double mean_distance = 0.0;
  double mean_row_norm = 0.0;

  // Mean pairwise distance divided by the mean row norm.
  double normalized_mean() const {
    return mean_row_norm > 0.0 ? mean_distance / mean_row_norm : 0.0;
  }
};

// Pairwise Euclidean distances over the valid rows. Throws when fewer than
// two rows are valid. An empty mask means all rows are valid.
SeparabilityStats Separability(const Eigen::MatrixXd& rows,
                               const std::vector<bool>& valid = {});

}  // namespace fedl2g

#endif  // FEDL2G_METRICS_HPP_
