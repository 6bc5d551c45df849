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
#include "fedl2g/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace fedl2g {

GuideTarget GuidingVectorSet::AsTarget(double weight) const {
  GuideTarget t;
  t.space = space;
  t.vectors = vectors;
  t.weight = weight;
  return t;
}

int GuidanceGradient::PresentCount() const {
  return static_cast<int>(std::count(present.begin(), present.end(), true));
}

void GuidanceConfig::Validate() const {
  if (!(eta_c > 0.0)) throw std::invalid_argument("eta_c must be > 0");
  if (!(eta_s > 0.0)) throw std::invalid_argument("eta_s must be > 0");
  if (quiz_size < 1) throw std::invalid_argument("quiz_size must be >= 1");
}

double ClientTotalLoss(const ModelSpec& spec, const ModelParams& params,
                       const MiniBatch& batch, const GuidingVectorSet& guide) {
  const GuideTarget target = guide.AsTarget();
  return BatchLoss(spec, params, batch, {&target});
}

ModelParams LocalTrainEpoch(const ModelSpec& spec, const ModelParams& params,
                            const Dataset& study, const LossConfig& loss,
                            double eta_c, int batch_size, Engine& rng) {
  if (study.size() == 0) throw std::invalid_argument("empty study set");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  const std::size_t bs = static_cast<std::size_t>(batch_size);
  const std::size_t steps = study.size() / bs;
  std::vector<std::size_t> order(study.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  ModelParams current = params;
  std::vector<std::size_t> rows(bs);
  for (std::size_t s = 0; s < steps; ++s) {
    std::copy_n(order.begin() + static_cast<long>(s * bs), bs, rows.begin());
    const MiniBatch batch = study.Batch(rows);
    current.flat -= eta_c * ParamGradient(spec, current, batch, loss);
  }
  return current;
}

ModelParams PseudoTrain(const ModelSpec& spec, const ModelParams& params,
                        const MiniBatch& study_batch,
                        const GuidingVectorSet& guide, double eta_c,
                        double guiding_weight) {
  const GuideTarget target = guide.AsTarget(guiding_weight);
  return SgdStep(params, ParamGradient(spec, params, study_batch, {&target}),
                 eta_c);
}

GuidanceGradient ComputeGuidanceGradient(const ModelSpec& spec,
                                         const ModelParams& params,
                                         const MiniBatch& study_batch,
                                         const MiniBatch& quiz,
                                         const GuidingVectorSet& guide,
                                         double eta_c, double guiding_weight) {
  if (quiz.size() == 0) throw std::invalid_argument("empty quiz set");
  if (study_batch.size() == 0) throw std::invalid_argument("empty study batch");
  const int c = spec.class_count;
  const int m = spec.GuidedDim(guide.space);
  if (guide.class_count() != c || guide.dim() != m) {
    throw std::invalid_argument("guiding vectors do not match model shape");
  }

  // Stage 1: quiz direction at the pseudo-trained parameters.
  const ModelParams stepped =
      PseudoTrain(spec, params, study_batch, guide, eta_c, guiding_weight);
  const Eigen::VectorXd direction = ParamGradient(spec, stepped, quiz, {});

  // Stage 2: study-batch Jacobians at the pre-step parameters.
  const Eigen::MatrixXd jvp =
      GuidedJvpBatch(spec, params, study_batch.inputs, direction, guide.space);

  GuidanceGradient out;
  out.per_class = Eigen::MatrixXd::Zero(c, m);
  out.present.assign(static_cast<std::size_t>(c), false);
  const double scale = 2.0 * eta_c * guiding_weight /
                       (static_cast<double>(m) *
                        static_cast<double>(study_batch.size()));
  for (std::size_t b = 0; b < study_batch.size(); ++b) {
    const int y = study_batch.labels[b];
    out.per_class.row(y) += jvp.row(static_cast<Eigen::Index>(b));
    out.present[static_cast<std::size_t>(y)] = true;
  }
  out.per_class *= scale;
  return out;
}

GuidingVectorSet ServerUpdate(const GuidingVectorSet& guide,
                              std::span<const GuidanceGradient> grads,
                              double eta_s) {
  if (grads.empty()) throw std::invalid_argument("server update needs at least one gradient");
  const Eigen::Index c = guide.vectors.rows();
  const Eigen::Index m = guide.vectors.cols();
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].per_class.rows() != c || grads[i].per_class.cols() != m ||
        grads[i].present.size() != static_cast<std::size_t>(c)) {
      throw std::invalid_argument("guidance gradient " + std::to_string(i) +
                                  " has the wrong shape");
    }
  }
  GuidingVectorSet next = guide;
  for (Eigen::Index y = 0; y < c; ++y) {
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(m);
    int reporters = 0;
    for (const auto& g : grads) {
      if (!g.present[static_cast<std::size_t>(y)]) continue;
      sum += g.per_class.row(y);
      ++reporters;
    }
    if (reporters == 0) continue;
    next.vectors.row(y) -= eta_s * (sum / static_cast<double>(reporters));
  }
  ++next.version;
  return next;
}

GuidingVectorSet InitGuidingVectors(int class_count, int dim,
                                    GuidedSpace space, std::uint64_t seed) {
  if (class_count < 1 || dim < 1) {
    throw std::invalid_argument("guiding vectors need C, M >= 1");
  }
  Engine rng = MakeStream(seed, StreamPurpose::kGuideInit);
  std::normal_distribution<double> normal(0.0, 1.0);
  GuidingVectorSet g;
  g.space = space;
  g.vectors.resize(class_count, dim);
  for (int y = 0; y < class_count; ++y) {
    for (int j = 0; j < dim; ++j) g.vectors(y, j) = 0.1 * normal(rng);
  }
  return g;
}

GuidanceGradient AddPrivacyNoise(const GuidanceGradient& grad, double scale,
                                 double fraction, Engine& rng) {
  if (scale < 0.0) throw std::invalid_argument("noise scale must be >= 0");
  if (fraction < 0.0 || fraction > 1.0) {
    throw std::invalid_argument("perturbation fraction must be in [0, 1]");
  }
  GuidanceGradient out = grad;
  if (scale == 0.0 || fraction == 0.0) return out;
  const auto m = static_cast<std::size_t>(grad.per_class.cols());
  const auto count = static_cast<std::size_t>(
      std::lround(fraction * static_cast<double>(m)));
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<std::size_t> coords(m);
  for (std::size_t y = 0; y < grad.present.size(); ++y) {
    if (!grad.present[y]) continue;
    std::iota(coords.begin(), coords.end(), 0);
    std::shuffle(coords.begin(), coords.end(), rng);
    for (std::size_t k = 0; k < count; ++k) {
      out.per_class(static_cast<Eigen::Index>(y),
                    static_cast<Eigen::Index>(coords[k])) += normal(rng);
    }
  }
  return out;
}

}  // namespace fedl2g
