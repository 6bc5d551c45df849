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
#ifndef FEDL2G_METHOD_HPP_
#define FEDL2G_METHOD_HPP_

#include <string_view>

#include "fedl2g/nn.hpp"

namespace fedl2g {

enum class Method { kFedL2GLogit, kFedL2GFeature, kFedProto, kFedDistill, kLocalOnly };

std::string_view ToString(Method m);
// Accepts fedl2g-l, fedl2g-f, fedproto, feddistill, local-only.
Method ParseMethod(std::string_view name);

constexpr bool IsLearningToGuide(Method m) {
  return m == Method::kFedL2GLogit || m == Method::kFedL2GFeature;
}

constexpr bool IsPrototypeBaseline(Method m) {
  return m == Method::kFedProto || m == Method::kFedDistill;
}

// Space the method's shared vectors live in. Local-only shares nothing and
// reports the logit space.
constexpr GuidedSpace SpaceOf(Method m) {
  return (m == Method::kFedL2GFeature || m == Method::kFedProto)
             ? GuidedSpace::kFeature
             : GuidedSpace::kLogit;
}

}  // namespace fedl2g

#endif  // FEDL2G_METHOD_HPP_
