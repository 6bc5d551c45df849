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
#include <cmath>

#include <gtest/gtest.h>

#include "fedl2g/nn.hpp"
#include "oracles.hpp"

namespace fedl2g {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using testing::CentralDifference;
using testing::MaxRelativeError;
using testing::RandomGuide;
using testing::RandomInstance;
using testing::ReferenceLoss;

ModelSpec TinySpec() {
  ModelSpec s;
  s.input_dim = 3;
  s.hidden_widths = {4};
  s.feature_dim = 2;
  s.class_count = 3;
  return s;
}

TEST(LayoutTest, OffsetsAreContiguousAndHeadIsLast) {
  ModelSpec s = TinySpec();
  s.hidden_widths = {4, 5};
  const ParamLayout l = MakeLayout(s);
  ASSERT_EQ(l.layers.size(), 4u);
  std::size_t expect = 0;
  for (const auto& layer : l.layers) {
    EXPECT_EQ(layer.weight_offset, expect);
    expect += static_cast<std::size_t>(layer.in * layer.out);
    EXPECT_EQ(layer.bias_offset, expect);
    expect += static_cast<std::size_t>(layer.out);
  }
  EXPECT_EQ(l.size, expect);
  EXPECT_EQ(l.extractor.begin, 0u);
  EXPECT_EQ(l.extractor.end, l.head.begin);
  EXPECT_EQ(l.head.end, l.size);
  EXPECT_EQ(l.head.size(), static_cast<std::size_t>(2 * 3 + 3));
  EXPECT_FALSE(l.layers.back().activated);
  EXPECT_EQ(l.extractor_layer_count(), 3u);
}

TEST(LayoutTest, RejectsEmptyOrNonPositiveDims) {
  ModelSpec s = TinySpec();
  s.hidden_widths.clear();
  EXPECT_THROW(MakeLayout(s), std::invalid_argument);
  s = TinySpec();
  s.feature_dim = 0;
  EXPECT_THROW(MakeLayout(s), std::invalid_argument);
  s = TinySpec();
  s.hidden_widths = {3, -1};
  EXPECT_THROW(MakeLayout(s), std::invalid_argument);
}

TEST(InitTest, GlorotBoundsAndZeroBiases) {
  ModelSpec s = TinySpec();
  Engine rng(3);
  const ModelParams p = InitParams(s, rng);
  for (const auto& l : p.layout.layers) {
    const double bound = std::sqrt(6.0 / (l.in + l.out));
    for (int k = 0; k < l.in * l.out; ++k) {
      EXPECT_LE(std::abs(p.flat[static_cast<Eigen::Index>(l.weight_offset) + k]), bound);
    }
    for (int k = 0; k < l.out; ++k) {
      EXPECT_EQ(p.flat[static_cast<Eigen::Index>(l.bias_offset) + k], 0.0);
    }
  }
}

TEST(ForwardTest, ZeroWeightsGiveBiasOutputs) {
  ModelSpec s = TinySpec();
  ModelParams p{VectorXd::Zero(static_cast<Eigen::Index>(MakeLayout(s).size)), MakeLayout(s)};
  const auto& head = p.layout.layers.back();
  p.flat.segment(static_cast<Eigen::Index>(head.bias_offset), 3) << 0.5, -1.0, 2.0;
  const auto& feat = p.layout.layers[1];
  p.flat.segment(static_cast<Eigen::Index>(feat.bias_offset), 2) << 0.25, -0.5;
  const ForwardOutput out = Forward(s, p, VectorXd::Constant(3, 7.0));
  EXPECT_DOUBLE_EQ(out.features[0], 0.25);
  EXPECT_DOUBLE_EQ(out.features[1], 0.0);  // relu of the negative bias
  EXPECT_DOUBLE_EQ(out.logits[0], 0.5);
  EXPECT_DOUBLE_EQ(out.logits[1], -1.0);
  EXPECT_DOUBLE_EQ(out.logits[2], 2.0);
}

TEST(ForwardTest, IdentityLayersPassFirstColumnToLogits) {
  // input 2 -> hidden 2 -> features 2 -> 2 classes, all weights identity,
  // biases zero: x = e_1 gives logits equal to the head's first column.
  ModelSpec s;
  s.input_dim = 2;
  s.hidden_widths = {2};
  s.feature_dim = 2;
  s.class_count = 2;
  ModelParams p{VectorXd::Zero(static_cast<Eigen::Index>(MakeLayout(s).size)), MakeLayout(s)};
  for (const auto& l : p.layout.layers) {
    const auto w = static_cast<Eigen::Index>(l.weight_offset);
    p.flat[w] = 1.0;      // (0,0)
    p.flat[w + 3] = 1.0;  // (1,1), column-major 2x2
  }
  const auto& head = p.layout.layers.back();
  p.flat[static_cast<Eigen::Index>(head.weight_offset) + 1] = 0.75;  // W(1,0)
  const ForwardOutput out = Forward(s, p, VectorXd::Unit(2, 0));
  EXPECT_DOUBLE_EQ(out.logits[0], 1.0);
  EXPECT_DOUBLE_EQ(out.logits[1], 0.75);
}

TEST(LossTest, CrossEntropyMatchesClosedForm) {
  VectorXd z(3);
  z << 1.0, 2.0, 3.0;
  const double expected = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)) - 2.0;
  EXPECT_NEAR(CrossEntropy(z, 1), expected, 1e-14);
  // Stable for large logits.
  z << 1000.0, 0.0, -1000.0;
  EXPECT_NEAR(CrossEntropy(z, 0), 0.0, 1e-12);
  EXPECT_THROW(CrossEntropy(z, 3), std::invalid_argument);
}

TEST(LossTest, BatchLossMatchesReference) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto inst = RandomInstance(seed, 3, 4, seed % 2 == 0);
    for (GuidedSpace space : {GuidedSpace::kLogit, GuidedSpace::kFeature}) {
      GuideTarget g = RandomGuide(3, inst.spec.GuidedDim(space), space, seed).AsTarget();
      g.valid = {true, false, true};
      const LossConfig cfg{&g};
      EXPECT_NEAR(BatchLoss(inst.spec, inst.params, inst.study, cfg),
                  ReferenceLoss(inst.spec, inst.params, inst.study, &g), 1e-12);
    }
  }
}

TEST(LossTest, RejectsBadLabelsAndShapes) {
  const auto inst = RandomInstance(1, 3, 4, true);
  MiniBatch bad = inst.study;
  bad.labels[0] = 3;
  EXPECT_THROW(BatchLoss(inst.spec, inst.params, bad, {}), std::invalid_argument);
  GuideTarget g;
  g.vectors = MatrixXd::Zero(3, 5);
  g.space = GuidedSpace::kFeature;
  EXPECT_THROW(BatchLoss(inst.spec, inst.params, inst.study, {&g}), std::invalid_argument);
  MiniBatch wide = inst.study;
  wide.inputs = MatrixXd::Zero(6, inst.spec.input_dim + 1);
  EXPECT_THROW(BatchLoss(inst.spec, inst.params, wide, {}), std::invalid_argument);
}

// grad_params against central differences, all three loss forms.
TEST(GradientOracleTest, ParamGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    EXPECT_LE(testing::ParamGradientOracleError(seed), 1e-6) << "seed " << seed;
  }
}

TEST(GradientOracleTest, JvpMatchesDirectionalDifferences) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    EXPECT_LE(testing::JvpOracleError(seed), 1e-6) << "seed " << seed;
  }
}

TEST(GradientOracleTest, FeatureJvpIgnoresHeadDirection) {
  const auto inst = RandomInstance(7, 3, 4, true);
  VectorXd d = VectorXd::Zero(inst.params.flat.size());
  const auto head = inst.params.layout.head;
  d.segment(static_cast<Eigen::Index>(head.begin), static_cast<Eigen::Index>(head.size())).setOnes();
  const MatrixXd j = GuidedJvpBatch(inst.spec, inst.params, inst.study.inputs, d,
                                    GuidedSpace::kFeature);
  EXPECT_EQ(j.cwiseAbs().maxCoeff(), 0.0);
}

TEST(GradientOracleTest, ReluSlopeAtZeroIsZero) {
  // A single input at exactly zero pre-activation contributes no gradient
  // to the first layer's weights.
  ModelSpec s;
  s.input_dim = 1;
  s.hidden_widths = {1};
  s.feature_dim = 1;
  s.class_count = 2;
  ModelParams p{VectorXd::Ones(static_cast<Eigen::Index>(MakeLayout(s).size)), MakeLayout(s)};
  MiniBatch b{MatrixXd::Zero(1, 1), {0}};
  p.flat[p.layout.layers[0].bias_offset] = 0.0;
  const VectorXd g = ParamGradient(s, p, b, {});
  EXPECT_EQ(g[static_cast<Eigen::Index>(p.layout.layers[0].bias_offset)], 0.0);
}

TEST(SgdTest, StepIsPure) {
  const auto inst = RandomInstance(2, 3, 4, true);
  const VectorXd before = inst.params.flat;
  const VectorXd g = VectorXd::Ones(before.size());
  const ModelParams next = SgdStep(inst.params, g, 0.5);
  EXPECT_EQ(inst.params.flat, before);
  EXPECT_TRUE(next.flat.isApprox(before - 0.5 * g));
  EXPECT_THROW(SgdStep(inst.params, VectorXd::Ones(3), 0.1), std::invalid_argument);
}

}  // namespace
}  // namespace fedl2g
