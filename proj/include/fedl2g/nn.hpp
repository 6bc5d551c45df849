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
#ifndef FEDL2G_NN_HPP_
#define FEDL2G_NN_HPP_

// Small dense networks with exact reverse-mode parameter gradients and
// forward-mode directional derivatives.
//
// A model is an extractor (one activated affine layer per hidden width, then
// an activated affine layer to the feature dimension K) followed by a single
// affine head from K to the class count C. All parameters live in one flat
// vector; each layer stores its weight matrix column-major (out x in)
// followed by its bias.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fedl2g/rng.hpp"

namespace fedl2g {

enum class Activation { kRelu, kTanh };

// Where the guiding loss acts: on the logits (M = C) or on the extractor
// output (M = K).
enum class GuidedSpace { kLogit, kFeature };

std::string_view ToString(Activation a);
std::string_view ToString(GuidedSpace s);
Activation ParseActivation(std::string_view name);
GuidedSpace ParseGuidedSpace(std::string_view name);

struct ModelSpec {
  int input_dim = 0;
  std::vector<int> hidden_widths;
  int feature_dim = 0;
  int class_count = 0;
  Activation activation = Activation::kRelu;

  // Throws std::invalid_argument when a dimension is not positive or the
  // hidden list is empty.
  void Validate() const;

  int GuidedDim(GuidedSpace space) const {
    return space == GuidedSpace::kLogit ? class_count : feature_dim;
  }

  bool operator==(const ModelSpec&) const = default;
};

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool Contains(std::size_t i) const { return i >= begin && i < end; }
  bool operator==(const IndexRange&) const = default;
};

struct LayerLayout {
  int in = 0;
  int out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
  bool activated = true;

  bool operator==(const LayerLayout&) const = default;
};

struct ParamLayout {
  // Extractor layers first; the last entry is the head.
  std::vector<LayerLayout> layers;
  IndexRange extractor;
  IndexRange head;
  std::size_t size = 0;

  std::size_t extractor_layer_count() const { return layers.size() - 1; }
  bool operator==(const ParamLayout&) const = default;
};

ParamLayout MakeLayout(const ModelSpec& spec);

struct ModelParams {
  Eigen::VectorXd flat;
  ParamLayout layout;
};

// Uniform in +-sqrt(6 / (fan_in + fan_out)) per layer, zero biases.
ModelParams InitParams(const ModelSpec& spec, Engine& rng);

struct MiniBatch {
  Eigen::MatrixXd inputs;  // batch x input_dim
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

struct ForwardOutput {
  Eigen::VectorXd features;
  Eigen::VectorXd logits;
};

struct BatchOutput {
  Eigen::MatrixXd features;  // batch x K
  Eigen::MatrixXd logits;    // batch x C
};

ForwardOutput Forward(const ModelSpec& spec, const ModelParams& params,
                      const Eigen::VectorXd& x);
BatchOutput ForwardBatch(const ModelSpec& spec, const ModelParams& params,
                         const Eigen::MatrixXd& inputs);

// -log softmax(logits)[label], log-sum-exp stabilized.
double CrossEntropy(const Eigen::Ref<const Eigen::VectorXd>& logits,
                    int label);

// (1/M) * sum_m (pred_m - target_m)^2.
double MeanSquaredError(const Eigen::Ref<const Eigen::VectorXd>& pred,
                        const Eigen::Ref<const Eigen::VectorXd>& target);

// Per-class targets for the guiding loss term.
struct GuideTarget {
  GuidedSpace space = GuidedSpace::kLogit;
  Eigen::MatrixXd vectors;  // C x M
  // Rows flagged false are skipped. Empty means every row is usable.
  std::vector<bool> valid;
  double weight = 1.0;

  bool RowUsable(int y) const {
    return valid.empty() || valid[static_cast<std::size_t>(y)];
  }
};

// Cross-entropy alone when `guide` is null, otherwise cross-entropy plus
// weight * MSE(guided output, target row of the sample's class).
struct LossConfig {
  const GuideTarget* guide = nullptr;
};

// Mean loss over the batch.
double BatchLoss(const ModelSpec& spec, const ModelParams& params,
                 const MiniBatch& batch, const LossConfig& loss);

// Exact gradient of BatchLoss with respect to params.flat.
Eigen::VectorXd ParamGradient(const ModelSpec& spec, const ModelParams& params,
                              const MiniBatch& batch, const LossConfig& loss);

// Directional derivative J_g(x, params) * direction of the guided map
// g = logits (logit space) or g = features (feature space), one row per
// input row.
Eigen::MatrixXd GuidedJvpBatch(const ModelSpec& spec,
                               const ModelParams& params,
                               const Eigen::MatrixXd& inputs,
                               const Eigen::VectorXd& direction,
                               GuidedSpace space);
Eigen::VectorXd GuidedJvp(const ModelSpec& spec, const ModelParams& params,
                          const Eigen::VectorXd& x,
                          const Eigen::VectorXd& direction, GuidedSpace space);

// Returns params - eta * gradient; the input is left untouched.
ModelParams SgdStep(const ModelParams& params, const Eigen::VectorXd& gradient,
                    double eta);

}  // namespace fedl2g

#endif  // FEDL2G_NN_HPP_
