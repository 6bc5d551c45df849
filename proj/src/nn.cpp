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
#include "fedl2g/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace fedl2g {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ConstMatMap = Eigen::Map<const MatrixXd>;
using ConstVecMap = Eigen::Map<const VectorXd>;
using MatMap = Eigen::Map<MatrixXd>;
using VecMap = Eigen::Map<VectorXd>;

ConstMatMap Weights(const ModelParams& p, const LayerLayout& l) {
  return ConstMatMap(p.flat.data() + l.weight_offset, l.out, l.in);
}
ConstVecMap Bias(const ModelParams& p, const LayerLayout& l) {
  return ConstVecMap(p.flat.data() + l.bias_offset, l.out);
}
ConstMatMap Weights(const VectorXd& v, const LayerLayout& l) {
  return ConstMatMap(v.data() + l.weight_offset, l.out, l.in);
}
ConstVecMap Bias(const VectorXd& v, const LayerLayout& l) {
  return ConstVecMap(v.data() + l.bias_offset, l.out);
}

MatrixXd Activate(const MatrixXd& z, Activation a) {
  if (a == Activation::kRelu) return z.cwiseMax(0.0);
  return z.array().tanh().matrix();
}

// Elementwise derivative of the activation at z. ReLU'(0) is taken as 0.
MatrixXd ActivationSlope(const MatrixXd& z, const MatrixXd& activated,
                         Activation a) {
  if (a == Activation::kRelu) {
    return (z.array() > 0.0).cast<double>().matrix();
  }
  return (1.0 - activated.array().square()).matrix();
}

// Pre-activations and activations of every layer for a batch. act[0] is the
// input, act[l + 1] the output of layer l; the head is never activated so
// act.back() holds the logits.
struct Trace {
  std::vector<MatrixXd> pre;
  std::vector<MatrixXd> act;

  const MatrixXd& features() const { return act[act.size() - 2]; }
  const MatrixXd& logits() const { return act.back(); }
};

void CheckParams(const ModelSpec& spec, const ModelParams& params) {
  if (static_cast<std::size_t>(params.flat.size()) != params.layout.size) {
    throw std::invalid_argument("parameter vector length does not match layout");
  }
  if (params.layout.layers.empty() ||
      params.layout.layers.front().in != spec.input_dim ||
      params.layout.layers.back().out != spec.class_count) {
    throw std::invalid_argument("parameter layout does not match model spec");
  }
}

void CheckInputs(const ModelSpec& spec, const MatrixXd& inputs) {
  if (inputs.cols() != spec.input_dim) {
    throw std::invalid_argument("input dimension " +
                                std::to_string(inputs.cols()) +
                                " does not match model input_dim " +
                                std::to_string(spec.input_dim));
  }
}

Trace Run(const ModelSpec& spec, const ModelParams& params,
          const MatrixXd& inputs) {
  CheckParams(spec, params);
  CheckInputs(spec, inputs);
  Trace t;
  const auto& layers = params.layout.layers;
  t.pre.reserve(layers.size());
  t.act.reserve(layers.size() + 1);
  t.act.push_back(inputs);
  for (const auto& layer : layers) {
    MatrixXd z = t.act.back() * Weights(params, layer).transpose();
    z.rowwise() += Bias(params, layer).transpose();
    t.act.push_back(layer.activated ? Activate(z, spec.activation) : z);
    t.pre.push_back(std::move(z));
  }
  return t;
}

void CheckBatch(const ModelSpec& spec, const MiniBatch& batch) {
  if (batch.size() == 0) throw std::invalid_argument("empty batch");
  if (static_cast<std::size_t>(batch.inputs.rows()) != batch.size()) {
    throw std::invalid_argument("batch inputs and labels differ in length");
  }
  for (int y : batch.labels) {
    if (y < 0 || y >= spec.class_count) {
      throw std::invalid_argument("label " + std::to_string(y) +
                                  " outside [0, C)");
    }
  }
}

void CheckGuide(const ModelSpec& spec, const GuideTarget& g) {
  if (g.vectors.rows() != spec.class_count ||
      g.vectors.cols() != spec.GuidedDim(g.space)) {
    throw std::invalid_argument("guide target shape does not match model");
  }
  if (!g.valid.empty() &&
      g.valid.size() != static_cast<std::size_t>(spec.class_count)) {
    throw std::invalid_argument("guide validity mask has wrong length");
  }
}

}  // namespace

std::string_view ToString(Activation a) {
  return a == Activation::kRelu ? "relu" : "tanh";
}

std::string_view ToString(GuidedSpace s) {
  return s == GuidedSpace::kLogit ? "logit" : "feature";
}

Activation ParseActivation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw std::invalid_argument("unknown activation: " + std::string(name));
}

GuidedSpace ParseGuidedSpace(std::string_view name) {
  if (name == "logit") return GuidedSpace::kLogit;
  if (name == "feature") return GuidedSpace::kFeature;
  throw std::invalid_argument("unknown guided space: " + std::string(name));
}

void ModelSpec::Validate() const {
  if (input_dim <= 0 || feature_dim <= 0 || class_count <= 0) {
    throw std::invalid_argument(
        "model dimensions (input_dim, feature_dim, class_count) must be "
        "positive");
  }
  if (hidden_widths.empty()) {
    throw std::invalid_argument("model needs at least one hidden layer");
  }
  for (int w : hidden_widths) {
    if (w <= 0) throw std::invalid_argument("hidden widths must be positive");
  }
}

ParamLayout MakeLayout(const ModelSpec& spec) {
  spec.Validate();
  ParamLayout layout;
  std::size_t offset = 0;
  auto add = [&](int in, int out, bool activated) {
    LayerLayout l;
    l.in = in;
    l.out = out;
    l.weight_offset = offset;
    offset += static_cast<std::size_t>(in) * static_cast<std::size_t>(out);
    l.bias_offset = offset;
    offset += static_cast<std::size_t>(out);
    l.activated = activated;
    layout.layers.push_back(l);
  };
  int in = spec.input_dim;
  for (int w : spec.hidden_widths) {
    add(in, w, true);
    in = w;
  }
  add(in, spec.feature_dim, true);
  layout.extractor = {0, offset};
  add(spec.feature_dim, spec.class_count, false);
  layout.head = {layout.extractor.end, offset};
  layout.size = offset;
  return layout;
}

ModelParams InitParams(const ModelSpec& spec, Engine& rng) {
  ModelParams p;
  p.layout = MakeLayout(spec);
  p.flat = VectorXd::Zero(static_cast<Eigen::Index>(p.layout.size));
  for (const auto& l : p.layout.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    const std::size_t n = static_cast<std::size_t>(l.in) * l.out;
    for (std::size_t k = 0; k < n; ++k) {
      p.flat[static_cast<Eigen::Index>(l.weight_offset + k)] = dist(rng);
    }
  }
  return p;
}

ForwardOutput Forward(const ModelSpec& spec, const ModelParams& params,
                      const VectorXd& x) {
  BatchOutput out = ForwardBatch(spec, params, x.transpose());
  return {out.features.row(0).transpose(), out.logits.row(0).transpose()};
}

BatchOutput ForwardBatch(const ModelSpec& spec, const ModelParams& params,
                         const MatrixXd& inputs) {
  Trace t = Run(spec, params, inputs);
  return {t.features(), t.logits()};
}

double CrossEntropy(const Eigen::Ref<const VectorXd>& logits, int label) {
  if (label < 0 || label >= logits.size()) {
    throw std::invalid_argument("label outside [0, C)");
  }
  const double top = logits.maxCoeff();
  const double lse = top + std::log((logits.array() - top).exp().sum());
  return lse - logits[label];
}

double MeanSquaredError(const Eigen::Ref<const VectorXd>& pred,
                        const Eigen::Ref<const VectorXd>& target) {
  if (pred.size() != target.size() || pred.size() == 0) {
    throw std::invalid_argument("MSE operands differ in length");
  }
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

double BatchLoss(const ModelSpec& spec, const ModelParams& params,
                 const MiniBatch& batch, const LossConfig& loss) {
  CheckBatch(spec, batch);
  if (loss.guide) CheckGuide(spec, *loss.guide);
  Trace t = Run(spec, params, batch.inputs);
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto row = static_cast<Eigen::Index>(b);
    const int y = batch.labels[b];
    total += CrossEntropy(t.logits().row(row).transpose(), y);
    if (loss.guide && loss.guide->RowUsable(y)) {
      const MatrixXd& guided = loss.guide->space == GuidedSpace::kLogit
                                   ? t.logits()
                                   : t.features();
      total += loss.guide->weight *
               MeanSquaredError(guided.row(row).transpose(),
                                loss.guide->vectors.row(y).transpose());
    }
  }
  return total / static_cast<double>(batch.size());
}

VectorXd ParamGradient(const ModelSpec& spec, const ModelParams& params,
                       const MiniBatch& batch, const LossConfig& loss) {
  CheckBatch(spec, batch);
  if (loss.guide) CheckGuide(spec, *loss.guide);
  Trace t = Run(spec, params, batch.inputs);
  const auto& layers = params.layout.layers;
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  // Softmax minus one-hot, scaled by the batch mean.
  MatrixXd upstream = t.logits();
  for (Eigen::Index b = 0; b < upstream.rows(); ++b) {
    auto row = upstream.row(b);
    const double top = row.maxCoeff();
    row = (row.array() - top).exp().matrix();
    row /= row.sum();
    row[batch.labels[static_cast<std::size_t>(b)]] -= 1.0;
  }
  upstream *= inv_b;

  auto add_guide_term = [&](MatrixXd& grad_out, const MatrixXd& out) {
    const GuideTarget& g = *loss.guide;
    const double scale = g.weight * 2.0 / static_cast<double>(out.cols()) * inv_b;
    for (Eigen::Index b = 0; b < out.rows(); ++b) {
      const int y = batch.labels[static_cast<std::size_t>(b)];
      if (!g.RowUsable(y)) continue;
      grad_out.row(b) += scale * (out.row(b) - g.vectors.row(y));
    }
  };
  if (loss.guide && loss.guide->space == GuidedSpace::kLogit) {
    add_guide_term(upstream, t.logits());
  }

  VectorXd grad = VectorXd::Zero(params.flat.size());
  for (std::size_t li = layers.size(); li-- > 0;) {
    const LayerLayout& l = layers[li];
    // upstream holds dLoss/d(layer output); convert to dLoss/d(pre-activation).
    if (l.activated) {
      upstream = upstream.cwiseProduct(
          ActivationSlope(t.pre[li], t.act[li + 1], spec.activation));
    }
    MatMap(grad.data() + l.weight_offset, l.out, l.in) =
        upstream.transpose() * t.act[li];
    VecMap(grad.data() + l.bias_offset, l.out) =
        upstream.colwise().sum().transpose();
    if (li == 0) break;
    upstream = upstream * Weights(params, l);
    if (li == layers.size() - 1 && loss.guide &&
        loss.guide->space == GuidedSpace::kFeature) {
      add_guide_term(upstream, t.features());
    }
  }
  return grad;
}

MatrixXd GuidedJvpBatch(const ModelSpec& spec, const ModelParams& params,
                        const MatrixXd& inputs, const VectorXd& direction,
                        GuidedSpace space) {
  if (static_cast<std::size_t>(direction.size()) != params.layout.size) {
    throw std::invalid_argument("JVP direction length does not match params");
  }
  Trace t = Run(spec, params, inputs);
  const auto& layers = params.layout.layers;
  const std::size_t last =
      space == GuidedSpace::kLogit ? layers.size() : layers.size() - 1;

  MatrixXd tangent = MatrixXd::Zero(inputs.rows(), inputs.cols());
  for (std::size_t li = 0; li < last; ++li) {
    const LayerLayout& l = layers[li];
    MatrixXd dz = tangent * Weights(params, l).transpose() +
                  t.act[li] * Weights(direction, l).transpose();
    dz.rowwise() += Bias(direction, l).transpose();
    if (l.activated) {
      dz = dz.cwiseProduct(
          ActivationSlope(t.pre[li], t.act[li + 1], spec.activation));
    }
    tangent = std::move(dz);
  }
  return tangent;
}

VectorXd GuidedJvp(const ModelSpec& spec, const ModelParams& params,
                   const VectorXd& x, const VectorXd& direction,
                   GuidedSpace space) {
  return GuidedJvpBatch(spec, params, x.transpose(), direction, space)
      .row(0)
      .transpose();
}

ModelParams SgdStep(const ModelParams& params, const VectorXd& gradient,
                    double eta) {
  if (gradient.size() != params.flat.size()) {
    throw std::invalid_argument("gradient length does not match params");
  }
  ModelParams next = params;
  next.flat -= eta * gradient;
  return next;
}

}  // namespace fedl2g
