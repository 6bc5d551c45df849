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
#ifndef FEDL2G_TESTS_ORACLES_HPP_
#define FEDL2G_TESTS_ORACLES_HPP_

// Test-only reference computations. Nothing here calls the analytic
// derivative code: every derivative is a central finite difference of a
// loss that is evaluated with forward passes only.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

#include <Eigen/Core>

#include "fedl2g/guidance.hpp"
#include "fedl2g/nn.hpp"
#include "fedl2g/rng.hpp"

namespace fedl2g::testing {

// Central difference of f along every coordinate of x.
inline Eigen::VectorXd CentralDifference(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// max |a - b| / max |b|, with an absolute floor so an all-zero reference
// does not divide by zero.
inline double MaxRelativeError(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                               double floor = 1e-12) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), floor);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

// Forward-only loss, written independently of the library's training code.
inline double ReferenceLoss(const ModelSpec& spec, const ModelParams& params,
                            const MiniBatch& batch, const GuideTarget* guide) {
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const ForwardOutput out =
        Forward(spec, params, batch.inputs.row(static_cast<Eigen::Index>(b)).transpose());
    const int y = batch.labels[b];
    const double top = out.logits.maxCoeff();
    const double lse = top + std::log((out.logits.array() - top).exp().sum());
    total += lse - out.logits[y];
    if (guide != nullptr && guide->RowUsable(y)) {
      const Eigen::VectorXd& g =
          guide->space == GuidedSpace::kLogit ? out.logits : out.features;
      const Eigen::VectorXd diff = g - guide->vectors.row(y).transpose();
      total += guide->weight * diff.squaredNorm() / static_cast<double>(diff.size());
    }
  }
  return total / static_cast<double>(batch.size());
}

// Small random instance shared by the oracle tests.
struct Instance {
  ModelSpec spec;
  ModelParams params;
  MiniBatch study;
  MiniBatch quiz;
};

inline MiniBatch RandomBatch(int n, int dim, int classes, Engine& rng) {
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> label(0, classes - 1);
  MiniBatch b;
  b.inputs.resize(n, dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) b.inputs(i, j) = normal(rng);
    b.labels.push_back(label(rng));
  }
  return b;
}

// Nets stay under 500 parameters. Uses tanh half the time so that relu
// kinks do not land inside a finite-difference stencil.
inline Instance RandomInstance(std::uint64_t seed, int classes, int feature_dim,
                               bool smooth) {
  Engine rng = MakeStream(seed, StreamPurpose::kTest, 17);
  std::uniform_int_distribution<int> width(2, 8);
  std::uniform_int_distribution<int> depth(1, 2);
  std::uniform_int_distribution<int> in(2, 6);
  Instance inst;
  inst.spec.input_dim = in(rng);
  const int layers = depth(rng);
  for (int l = 0; l < layers; ++l) inst.spec.hidden_widths.push_back(width(rng));
  inst.spec.feature_dim = feature_dim;
  inst.spec.class_count = classes;
  inst.spec.activation = smooth ? Activation::kTanh : Activation::kRelu;
  inst.params = InitParams(inst.spec, rng);
  // Nonzero biases so every layer's bias gradient is exercised.
  std::normal_distribution<double> normal(0.0, 0.3);
  for (const auto& layer : inst.params.layout.layers) {
    for (int k = 0; k < layer.out; ++k) {
      inst.params.flat[static_cast<Eigen::Index>(layer.bias_offset) + k] = normal(rng);
    }
  }
  inst.study = RandomBatch(6, inst.spec.input_dim, classes, rng);
  inst.quiz = RandomBatch(5, inst.spec.input_dim, classes, rng);
  return inst;
}

inline GuidingVectorSet RandomGuide(int classes, int dim, GuidedSpace space,
                                    std::uint64_t seed) {
  Engine rng = MakeStream(seed, StreamPurpose::kTest, 23);
  std::normal_distribution<double> normal;
  GuidingVectorSet g;
  g.space = space;
  g.vectors.resize(classes, dim);
  for (int i = 0; i < classes; ++i) {
    for (int j = 0; j < dim; ++j) g.vectors(i, j) = normal(rng);
  }
  return g;
}

// Instance `seed` of the guidance oracle: both spaces, K in {3, 8}, relu and
// tanh. Returns the max relative error against central differences of
// v -> mean quiz CE(PseudoTrain(theta, v)).
inline double GuidanceOracleError(std::uint64_t seed) {
  const bool logit = seed % 2 == 0;
  const int k = seed % 4 < 2 ? 3 : 8;
  const Instance inst = RandomInstance(seed, 3, k, seed % 3 != 0);
  const GuidedSpace space = logit ? GuidedSpace::kLogit : GuidedSpace::kFeature;
  const GuidingVectorSet guide = RandomGuide(3, inst.spec.GuidedDim(space), space, seed);
  const double eta_c = 0.5;
  const double h = 1e-5;
  const GuidanceGradient analytic =
      ComputeGuidanceGradient(inst.spec, inst.params, inst.study, inst.quiz, guide, eta_c);
  Eigen::MatrixXd numeric(guide.vectors.rows(), guide.vectors.cols());
  GuidingVectorSet probe = guide;
  auto quiz_loss = [&] {
    const ModelParams stepped = PseudoTrain(inst.spec, inst.params, inst.study, probe, eta_c);
    return ReferenceLoss(inst.spec, stepped, inst.quiz, nullptr);
  };
  for (Eigen::Index y = 0; y < numeric.rows(); ++y) {
    for (Eigen::Index j = 0; j < numeric.cols(); ++j) {
      const double v = guide.vectors(y, j);
      probe.vectors(y, j) = v + h;
      const double up = quiz_loss();
      probe.vectors(y, j) = v - h;
      const double down = quiz_loss();
      probe.vectors(y, j) = v;
      numeric(y, j) = (up - down) / (2 * h);
    }
  }
  return MaxRelativeError(analytic.per_class, numeric);
}

// Instance `seed` of the parameter-gradient oracle, cycling through plain
// CE, logit guidance and feature guidance.
inline double ParamGradientOracleError(std::uint64_t seed) {
  const Instance inst = RandomInstance(seed, 3, seed % 2 == 0 ? 3 : 8, seed % 4 < 2);
  const int mode = static_cast<int>(seed % 3);
  GuideTarget g;
  const GuideTarget* guide = nullptr;
  if (mode > 0) {
    const GuidedSpace space = mode == 1 ? GuidedSpace::kLogit : GuidedSpace::kFeature;
    g = RandomGuide(3, inst.spec.GuidedDim(space), space, seed).AsTarget(0.7);
    guide = &g;
  }
  const Eigen::VectorXd analytic = ParamGradient(inst.spec, inst.params, inst.study, {guide});
  auto f = [&](const Eigen::VectorXd& flat) {
    return ReferenceLoss(inst.spec, {flat, inst.params.layout}, inst.study, guide);
  };
  return MaxRelativeError(analytic, CentralDifference(f, inst.params.flat, 1e-6));
}

// Instance `seed` of the JVP oracle: directional differences of the batch
// forward pass along a random parameter direction.
inline double JvpOracleError(std::uint64_t seed) {
  const Instance inst = RandomInstance(seed, 3, seed % 2 == 0 ? 3 : 8, seed % 4 < 2);
  Engine rng = MakeStream(seed, StreamPurpose::kTest, 5);
  std::normal_distribution<double> normal;
  Eigen::VectorXd d(inst.params.flat.size());
  for (auto& v : d) v = normal(rng);
  const GuidedSpace space = seed % 3 == 0 ? GuidedSpace::kLogit : GuidedSpace::kFeature;
  const double h = 1e-6;
  const Eigen::MatrixXd analytic =
      GuidedJvpBatch(inst.spec, inst.params, inst.study.inputs, d, space);
  const auto plus = ForwardBatch(inst.spec, {inst.params.flat + h * d, inst.params.layout},
                                 inst.study.inputs);
  const auto minus = ForwardBatch(inst.spec, {inst.params.flat - h * d, inst.params.layout},
                                  inst.study.inputs);
  const Eigen::MatrixXd numeric =
      space == GuidedSpace::kLogit ? Eigen::MatrixXd((plus.logits - minus.logits) / (2 * h))
                                   : Eigen::MatrixXd((plus.features - minus.features) / (2 * h));
  return MaxRelativeError(analytic, numeric);
}

}  // namespace fedl2g::testing

#endif  // FEDL2G_TESTS_ORACLES_HPP_
