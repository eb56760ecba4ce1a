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

#include <cstddef>
#include <cstdint>
#include <vector>

#include "halluprobe/corpus.hpp"

namespace halluprobe {

// Synthetic long-form corpus with a planted task: background text is
// lowercase without digits, and each entity is a number or a capitalized
// name. Hallucinated entities draw their digits from 5-9 and their initial
// from {Q, X, Z, V, J}; supported ones use 0-4 and {A, B, C, D, M}. The
// label is therefore readable from token identity alone.
struct ToyCorpusOptions {
  std::size_t samples = 200;
  std::size_t entities_per_sample = 3;
  double hallucination_rate = 0.5;
  std::uint64_t seed = 0;
};

// Tokenized samples with aligned spans, ids "toy-0000", "toy-0001", ...
std::vector<LabeledSample> MakeToyCorpus(const ToyCorpusOptions& options);

}  // namespace halluprobe
