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
#ifndef FEDL2G_RNG_HPP_
#define FEDL2G_RNG_HPP_

#include <cstdint>
#include <random>

namespace fedl2g {

// Every random draw in the simulator comes from a stream keyed by
// (seed, purpose, a, b). Streams hold no state that outlives a call site, so
// a round's randomness depends only on the key and never on execution order.
enum class StreamPurpose : std::uint64_t {
  kSynthetic = 1,
  kPartition = 2,
  kSplit = 3,
  kModelInit = 4,
  kGuideInit = 5,
  kParticipants = 6,
  kLocalTrain = 7,
  kPseudoBatch = 8,
  kPrivacyNoise = 9,
  kTest = 99,
};

using Engine = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t StreamKey(std::uint64_t seed, StreamPurpose purpose,
                                  std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t k = Mix64(seed);
  k = Mix64(k ^ static_cast<std::uint64_t>(purpose));
  k = Mix64(k ^ a);
  k = Mix64(k ^ (b + 0x632BE59BD9B4E019ULL));
  return k;
}

inline Engine MakeStream(std::uint64_t seed, StreamPurpose purpose,
                         std::uint64_t a = 0, std::uint64_t b = 0) {
  return Engine(StreamKey(seed, purpose, a, b));
}

}  // namespace fedl2g

#endif  // FEDL2G_RNG_HPP_
