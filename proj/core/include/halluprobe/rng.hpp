/*
 * Copyright 2026 The halluprobe Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace halluprobe {

// All randomness in a run derives from one global seed. Each consumer asks
// for a named sub-stream ("init", "shuffle", "sampling", "injection", ...)
// so adding a consumer never perturbs the draws of another.
std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view stream);
std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view stream,
                         std::uint64_t index);

using Rng = std::mt19937_64;

inline Rng MakeRng(std::uint64_t seed, std::string_view stream) {
  return Rng(DeriveSeed(seed, stream));
}

// Uniform double in [0, 1) built from the top 53 bits; unlike
// std::uniform_real_distribution its output is fixed across standard libraries.
inline double UniformUnit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller on UniformUnit, for the same reason.
double StandardNormal(Rng& rng);

// Uniform integer in [0, n). n must be > 0.
std::uint64_t UniformIndex(Rng& rng, std::uint64_t n);

// Fisher-Yates over UniformIndex.
template <typename T>
void Shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(UniformIndex(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace halluprobe
