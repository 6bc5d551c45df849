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
#include "fedl2g/baselines.hpp"

#include <algorithm>
#include <stdexcept>

#include "fedl2g/guidance.hpp"

namespace fedl2g {

int PrototypeSet::ValidCount() const {
  return static_cast<int>(
      std::count_if(counts.begin(), counts.end(), [](long n) { return n > 0; }));
}

std::vector<bool> PrototypeSet::ValidMask() const {
  std::vector<bool> mask(counts.size());
  for (std::size_t y = 0; y < counts.size(); ++y) mask[y] = counts[y] > 0;
  return mask;
}

GuideTarget PrototypeSet::AsTarget(double weight) const {
  GuideTarget t;
  t.space = space;
  t.vectors = vectors;
  t.valid = ValidMask();
  t.weight = weight;
  return t;
}

PrototypeSet EmptyPrototypes(int class_count, int dim, GuidedSpace space) {
  PrototypeSet p;
  p.vectors = Eigen::MatrixXd::Zero(class_count, dim);
  p.counts.assign(static_cast<std::size_t>(class_count), 0);
  p.space = space;
  return p;
}

LocalPrototypes ComputeLocalPrototypes(const ModelSpec& spec,
                                       const ModelParams& params,
                                       const Dataset& study,
                                       GuidedSpace space) {
  if (study.size() == 0) throw std::invalid_argument("empty study set");
  const BatchOutput out = ForwardBatch(spec, params, study.inputs);
  const Eigen::MatrixXd& guided =
      space == GuidedSpace::kLogit ? out.logits : out.features;
  LocalPrototypes p;
  p.vectors = Eigen::MatrixXd::Zero(spec.class_count, guided.cols());
  p.counts.assign(static_cast<std::size_t>(spec.class_count), 0);
  for (std::size_t i = 0; i < study.size(); ++i) {
    const int y = study.labels[i];
    p.vectors.row(y) += guided.row(static_cast<Eigen::Index>(i));
    ++p.counts[static_cast<std::size_t>(y)];
  }
  for (int y = 0; y < spec.class_count; ++y) {
    const long n = p.counts[static_cast<std::size_t>(y)];
    if (n > 0) p.vectors.row(y) /= static_cast<double>(n);
  }
  return p;
}

PrototypeSet AggregatePrototypes(std::span<const LocalPrototypes> locals,
                                 GuidedSpace space) {
  if (locals.empty()) throw std::invalid_argument("no prototypes to aggregate");
  const Eigen::Index c = locals.front().vectors.rows();
  const Eigen::Index m = locals.front().vectors.cols();
  PrototypeSet global = EmptyPrototypes(static_cast<int>(c), static_cast<int>(m), space);
  for (const auto& l : locals) {
    if (l.vectors.rows() != c || l.vectors.cols() != m ||
        l.counts.size() != static_cast<std::size_t>(c)) {
      throw std::invalid_argument("local prototypes disagree in shape");
    }
    for (std::size_t y = 0; y < l.counts.size(); ++y) {
      if (l.counts[y] > 0) global.counts[y] += l.counts[y];
    }
  }
  // Weights n / total rather than a sum divided at the end, so a single
  // contributor reproduces its prototype bit for bit.
  for (const auto& l : locals) {
    for (Eigen::Index y = 0; y < c; ++y) {
      const long n = l.counts[static_cast<std::size_t>(y)];
      if (n <= 0) continue;
      const double w = static_cast<double>(n) /
                       static_cast<double>(global.counts[static_cast<std::size_t>(y)]);
      global.vectors.row(y) += w * l.vectors.row(y);
    }
  }
  return global;
}

double BaselineClientLoss(const ModelSpec& spec, const ModelParams& params,
                          const MiniBatch& batch, const PrototypeSet& protos) {
  const GuideTarget target = protos.AsTarget();
  return BatchLoss(spec, params, batch, {&target});
}

ModelParams LocalOnlyUpdate(const ModelSpec& spec, const ModelParams& params,
                            const Dataset& study, double eta_c, int batch_size,
                            Engine& rng) {
  return LocalTrainEpoch(spec, params, study, {}, eta_c, batch_size, rng);
}

}  // namespace fedl2g
