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
#ifndef FEDL2G_GUIDANCE_HPP_
#define FEDL2G_GUIDANCE_HPP_

// Learning-to-guide: trainable per-class guiding vectors that are updated on
// the server from the gradient of each client's quiz loss taken through one
// pseudo-train step.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "fedl2g/data.hpp"
#include "fedl2g/nn.hpp"
#include "fedl2g/rng.hpp"

namespace fedl2g {

struct GuidingVectorSet {
  Eigen::MatrixXd vectors;  // C x M
  GuidedSpace space = GuidedSpace::kLogit;
  int version = 0;

  int class_count() const { return static_cast<int>(vectors.rows()); }
  int dim() const { return static_cast<int>(vectors.cols()); }
  GuideTarget AsTarget(double weight = 1.0) const;
};

// Per-class feedback from one client. Rows whose class did not occur in the
// pseudo-train batch are zero and flagged absent; only present rows are sent.
struct GuidanceGradient {
  Eigen::MatrixXd per_class;  // C x M
  std::vector<bool> present;

  int PresentCount() const;
};

struct GuidanceConfig {
  double eta_c = 0.01;
  double eta_s = 0.1;
  GuidedSpace space = GuidedSpace::kLogit;
  double guiding_weight = 1.0;
  int quiz_size = 10;

  void Validate() const;
};

// Mean over the batch of CE(logits, y) + MSE(guided output, v^y).
double ClientTotalLoss(const ModelSpec& spec, const ModelParams& params,
                       const MiniBatch& batch, const GuidingVectorSet& guide);

// floor(|study| / batch_size) SGD steps over a shuffled pass of the study set.
ModelParams LocalTrainEpoch(const ModelSpec& spec, const ModelParams& params,
                            const Dataset& study, const LossConfig& loss,
                            double eta_c, int batch_size, Engine& rng);

// theta' = theta - eta_c * grad L_B(theta, G). Never written back.
ModelParams PseudoTrain(const ModelSpec& spec, const ModelParams& params,
                        const MiniBatch& study_batch,
                        const GuidingVectorSet& guide, double eta_c,
                        double guiding_weight = 1.0);

// Exact gradient of the mean quiz cross-entropy at theta'(G) with respect to
// every guiding vector, using only first-order derivatives:
//   d      = grad_theta mean CE(quiz; theta')
//   pi^y   = 2 eta_c w / (M |B|) * sum_{b in B, y_b = y} J_g(x_b; theta) d
GuidanceGradient ComputeGuidanceGradient(const ModelSpec& spec,
                                         const ModelParams& params,
                                         const MiniBatch& study_batch,
                                         const MiniBatch& quiz,
                                         const GuidingVectorSet& guide,
                                         double eta_c,
                                         double guiding_weight = 1.0);

// v^y <- v^y - eta_s * mean of pi^y over the clients reporting class y.
GuidingVectorSet ServerUpdate(const GuidingVectorSet& guide,
                              std::span<const GuidanceGradient> grads,
                              double eta_s);

// Entries 0.1 * N(0, 1).
GuidingVectorSet InitGuidingVectors(int class_count, int dim,
                                    GuidedSpace space, std::uint64_t seed);

// Adds N(0, scale^2) to round(fraction * M) randomly chosen coordinates of
// each present row.
GuidanceGradient AddPrivacyNoise(const GuidanceGradient& grad, double scale,
                                 double fraction, Engine& rng);

}  // namespace fedl2g

#endif  // FEDL2G_GUIDANCE_HPP_
