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
#include "fedl2g/metrics.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

namespace fedl2g {

std::string_view ToString(Method m) {
  switch (m) {
    case Method::kFedL2GLogit: return "fedl2g-l";
    case Method::kFedL2GFeature: return "fedl2g-f";
    case Method::kFedProto: return "fedproto";
    case Method::kFedDistill: return "feddistill";
    case Method::kLocalOnly: return "local-only";
  }
  return "unknown";
}

Method ParseMethod(std::string_view name) {
  for (Method m : {Method::kFedL2GLogit, Method::kFedL2GFeature, Method::kFedProto,
                   Method::kFedDistill, Method::kLocalOnly}) {
    if (name == ToString(m)) return m;
  }
  throw std::invalid_argument("unknown method: " + std::string(name));
}

ClientEvaluation EvaluateClient(const ModelSpec& spec,
                                const ModelParams& params,
                                const ClientDataset& data) {
  ClientEvaluation e;
  e.test_size = data.test.size();
  if (e.test_size > 0) {
    const BatchOutput out = ForwardBatch(spec, params, data.test.inputs);
    for (std::size_t i = 0; i < e.test_size; ++i) {
      Eigen::Index best = 0;
      out.logits.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
      if (best == data.test.labels[i]) ++e.correct;
    }
  }
  if (data.study.size() > 0) {
    e.study_ce = BatchLoss(spec, params, data.study.AsBatch(), {});
  }
  return e;
}

Evaluation Evaluate(std::span<const ClientEvaluation> clients) {
  if (clients.empty()) throw std::invalid_argument("nothing to evaluate");
  Evaluation ev;
  std::size_t correct = 0;
  std::size_t total = 0;
  double ce = 0.0;
  for (const auto& c : clients) {
    if (c.test_size == 0) throw std::invalid_argument("client with empty test set");
    correct += c.correct;
    total += c.test_size;
    ce += c.study_ce;
    ev.client_accuracy.push_back(c.accuracy());
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  ev.mean_ce = ce / static_cast<double>(clients.size());
  return ev;
}

std::vector<double> LossIncrease(std::span<const double> history) {
  if (history.empty()) throw std::invalid_argument("empty loss history");
  std::vector<double> out(history.size(), 0.0);
  double best = history[0];
  for (std::size_t t = 1; t < history.size(); ++t) {
    out[t] = std::max(0.0, history[t] - best);
    best = std::min(best, history[t]);
  }
  return out;
}

ByteCount AccountBytes(const RoundTrace& trace, Method method, int class_count,
                       int dim) {
  if (method == Method::kLocalOnly) return {};
  if (trace.uploaded_rows.size() != trace.participants.size()) {
    throw std::invalid_argument("round trace: rows and participants differ in length");
  }
  const auto m = static_cast<std::uint64_t>(dim);
  ByteCount b;
  for (int rows : trace.uploaded_rows) {
    b.upload += static_cast<std::uint64_t>(rows) * (m * kBytesPerValue + kBytesPerValue);
  }
  b.download = static_cast<std::uint64_t>(trace.participants.size()) *
               static_cast<std::uint64_t>(class_count) * m * kBytesPerValue;
  return b;
}

std::size_t ConvergenceRound(std::span<const double> accuracy,
                             std::size_t window, double tol) {
  if (window == 0) throw std::invalid_argument("window must be positive");
  const std::size_t n = accuracy.size();
  for (std::size_t t = window; t + window <= n; ++t) {
    const double before = *std::max_element(accuracy.begin(), accuracy.begin() + static_cast<long>(t));
    const double after = *std::max_element(accuracy.begin() + static_cast<long>(t),
                                           accuracy.begin() + static_cast<long>(t + window));
    if (after - before < tol) return t;
  }
  return n;
}

SeparabilityStats Separability(const Eigen::MatrixXd& rows,
                               const std::vector<bool>& valid) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index y = 0; y < rows.rows(); ++y) {
    if (valid.empty() || valid[static_cast<std::size_t>(y)]) keep.push_back(y);
  }
  if (keep.size() < 2) {
    throw std::invalid_argument("separability needs at least two valid rows");
  }
  SeparabilityStats s;
  s.min_distance = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < keep.size(); ++a) {
    s.mean_row_norm += rows.row(keep[a]).norm();
    for (std::size_t b = a + 1; b < keep.size(); ++b) {
      const double d = (rows.row(keep[a]) - rows.row(keep[b])).norm();
      s.min_distance = std::min(s.min_distance, d);
      sum += d;
      ++pairs;
    }
  }
  s.mean_distance = sum / static_cast<double>(pairs);
  s.mean_row_norm /= static_cast<double>(keep.size());
  return s;
}

}  // namespace fedl2g
