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

#include "halluprobe/toy.hpp"

#include <cstdio>

#include "halluprobe/error.hpp"
#include "halluprobe/rng.hpp"

namespace halluprobe {

namespace {

constexpr const char* kPrompts[] = {
    "describe the records of the northern site.",
    "summarize what the archive says about the harbor.",
    "write a short note on the survey results.",
    "explain what the field notes report.",
};
constexpr const char* kSubjects[] = {"the survey", "the old ledger", "a field note",
                                     "the archive", "the harbor log", "our summary"};
constexpr const char* kVerbs[] = {"mentions", "records", "lists", "cites", "notes"};
constexpr const char* kLinks[] = {" near ", " beside ", " with ", " after "};
constexpr const char* kSyllables[] = {"ar", "en", "ol", "ik", "un", "es", "ta", "ri"};
constexpr char kTrueInitials[] = {'A', 'B', 'C', 'D', 'M'};
constexpr char kFalseInitials[] = {'Q', 'X', 'Z', 'V', 'J'};

template <typename T, std::size_t N>
const T& Pick(const T (&items)[N], Rng& rng) {
  return items[UniformIndex(rng, N)];
}

std::string MakeEntity(bool hallucinated, Rng& rng) {
  std::string s;
  if (UniformIndex(rng, 2) == 0) {
    const char base = hallucinated ? '5' : '0';
    for (int i = 0; i < 3; ++i) s.push_back(static_cast<char>(base + UniformIndex(rng, 5)));
  } else {
    s.push_back(hallucinated ? Pick(kFalseInitials, rng) : Pick(kTrueInitials, rng));
    for (int i = 0; i < 2; ++i) s += Pick(kSyllables, rng);
  }
  return s;
}

}  // namespace

std::vector<LabeledSample> MakeToyCorpus(const ToyCorpusOptions& options) {
  if (!(options.hallucination_rate >= 0.0 && options.hallucination_rate <= 1.0)) {
    ThrowUsage("hallucination_rate must lie in [0, 1]");
  }
  if (options.entities_per_sample == 0) ThrowUsage("entities_per_sample must be >= 1");
  auto rng = MakeRng(options.seed, "toy");
  const ByteTokenizer tokenizer;
  std::vector<LabeledSample> out;
  out.reserve(options.samples);
  for (std::size_t n = 0; n < options.samples; ++n) {
    LabeledSample s;
    char id[32];
    std::snprintf(id, sizeof(id), "toy-%04zu", n);
    s.id = id;
    s.prompt = Pick(kPrompts, rng);
    s.source_tag = "toy";
    for (std::size_t e = 0; e < options.entities_per_sample; ++e) {
      if (e % 2 == 0) {
        if (e > 0) s.completion += " ";
        s.completion += Pick(kSubjects, rng);
        s.completion += " ";
        s.completion += Pick(kVerbs, rng);
        s.completion += " ";
      } else {
        s.completion += Pick(kLinks, rng);
      }
      const bool hallucinated = UniformUnit(rng) < options.hallucination_rate;
      EntitySpan span;
      span.text = MakeEntity(hallucinated, rng);
      span.char_start = s.completion.size();
      s.completion += span.text;
      span.char_end = s.completion.size();
      if (hallucinated) {
        span.label = UniformIndex(rng, 4) == 0 ? VerificationLabel::kInsufficientInformation
                                               : VerificationLabel::kNotSupported;
      } else {
        span.label = VerificationLabel::kSupported;
      }
      s.spans.push_back(std::move(span));
      if (e % 2 == 1 || e + 1 == options.entities_per_sample) s.completion += ".";
    }
    Tokenize(s, tokenizer);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace halluprobe
