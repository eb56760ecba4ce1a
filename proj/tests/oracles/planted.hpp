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

// Planted-signal fixtures: per-token hidden states h = N(0, I) + y * 3 * v
// packaged as samples and traces so the production training path can run on
// them. The labels are drawn here, so the generator is the ground truth.

#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "halluprobe/corpus.hpp"
#include "halluprobe/tokenizer.hpp"
#include "halluprobe/trace.hpp"
#include "oracles.hpp"

namespace oracle {

struct PlantedCorpus {
  std::vector<halluprobe::LabeledSample> samples;
  std::vector<halluprobe::ActivationTrace> traces;
  std::vector<int> token_labels;  // concatenated over samples
};

// Every hallucinated token is its own not_supported span; every other
// negative token is a supported span, the rest are background.
inline PlantedCorpus MakePlantedCorpus(std::size_t n_samples, std::size_t tokens_per_sample,
                                       const std::vector<double>& v, double strength,
                                       std::mt19937_64& rng, const std::string& prefix) {
  using namespace halluprobe;
  PlantedCorpus c;
  const std::size_t d = v.size();
  for (std::size_t s = 0; s < n_samples; ++s) {
    auto set = MakePlanted(tokens_per_sample, v, strength, rng);
    LabeledSample sample;
    sample.id = prefix + std::to_string(s);
    sample.completion = std::string(tokens_per_sample, 'x');
    sample.tokens = ByteTokenizer{}.Encode(sample.completion);
    ActivationTrace t;
    t.sample_id = sample.id;
    t.layer = 3;
    t.d = static_cast<std::uint32_t>(d);
    t.n = static_cast<std::uint32_t>(tokens_per_sample);
    bool mark_negative = false;
    for (std::size_t i = 0; i < tokens_per_sample; ++i) {
      const int y = set.y[i];
      c.token_labels.push_back(y);
      for (double x : set.h[i]) t.hidden.push_back(static_cast<float>(x));
      t.chosen_logprob.push_back(-1.0);
      t.next_token_entropy.push_back(1.0);
      if (y == 0) mark_negative = !mark_negative;
      if (y == 1 || mark_negative) {
        EntitySpan sp;
        sp.text = "x";
        sp.char_start = i;
        sp.char_end = i + 1;
        sp.token_start = i;
        sp.token_end = i;
        sp.label = y == 1 ? VerificationLabel::kNotSupported : VerificationLabel::kSupported;
        sample.spans.push_back(sp);
      }
    }
    c.samples.push_back(std::move(sample));
    c.traces.push_back(std::move(t));
  }
  return c;
}

// Bayes-optimal token AUC for two unit-variance Gaussians whose means differ
// by `strength`: Phi(strength / sqrt(2)).
inline double PlantedAucCeiling(double strength) {
  return 0.5 * std::erfc(-strength / 2.0);
}

}  // namespace oracle
