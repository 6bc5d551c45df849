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
#ifndef FEDL2G_BASELINES_HPP_
#define FEDL2G_BASELINES_HPP_

// Prototype-sharing comparison methods. FedProto shares per-class feature
// means, FedDistill per-class logit means; both regularize local training
// towards the count-weighted global prototypes.

#include <span>
#include <vector>

#include <Eigen/Core>

#include "fedl2g/data.hpp"
#include "fedl2g/nn.hpp"
#include "fedl2g/rng.hpp"

namespace fedl2g {

struct LocalPrototypes {
  Eigen::MatrixXd vectors;  // C x M, zero rows for absent classes
  std::vector<long> counts;
};

struct PrototypeSet {
  Eigen::MatrixXd vectors;  // C x M
  std::vector<long> counts;  // rows with count 0 are invalid
  GuidedSpace space = GuidedSpace::kFeature;

  bool RowValid(int y) const { return counts[static_cast<std::size_t>(y)] > 0; }
  int ValidCount() const;
  GuideTarget AsTarget(double weight = 1.0) const;
  std::vector<bool> ValidMask() const;
};

// Empty set: every row invalid.
PrototypeSet EmptyPrototypes(int class_count, int dim, GuidedSpace space);

LocalPrototypes ComputeLocalPrototypes(const ModelSpec& spec,
                                       const ModelParams& params,
                                       const Dataset& study,
                                       GuidedSpace space);

// Count-weighted mean per class over the clients holding it.
PrototypeSet AggregatePrototypes(std::span<const LocalPrototypes> locals,
                                 GuidedSpace space);

// Mean CE plus MSE to the class prototype, skipping invalid rows.
double BaselineClientLoss(const ModelSpec& spec, const ModelParams& params,
                          const MiniBatch& batch, const PrototypeSet& protos);

// One epoch of plain cross-entropy SGD.
ModelParams LocalOnlyUpdate(const ModelSpec& spec, const ModelParams& params,
                            const Dataset& study, double eta_c, int batch_size,
                            Engine& rng);

}  // namespace fedl2g

#endif  // FEDL2G_BASELINES_HPP_
