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

#include <algorithm>

#include "halluprobe/error.hpp"
#include "halluprobe/evalproto.hpp"

namespace halluprobe {

Protocol ParseProtocol(const std::string& name) {
  if (name == "longform") return Protocol::kLongForm;
  if (name == "shortform") return Protocol::kShortForm;
  if (name == "reasoning") return Protocol::kReasoning;
  ThrowUsage("unknown protocol \"" + name + "\" (expected longform, shortform or reasoning)");
}

const char* ProtocolName(Protocol p) {
  switch (p) {
    case Protocol::kLongForm:
      return "longform";
    case Protocol::kShortForm:
      return "shortform";
    case Protocol::kReasoning:
      return "reasoning";
  }
  return "longform";
}

namespace {

double SpanMax(std::span<const double> scores, const EntitySpan& span,
               const std::string& sample_id) {
  if (!span.aligned() || *span.token_end >= scores.size() ||
      *span.token_start > *span.token_end) {
    ThrowData("sample " + sample_id + ": span '" + span.text +
              "' is not aligned to the scored tokens");
  }
  return *std::max_element(scores.begin() + static_cast<std::ptrdiff_t>(*span.token_start),
                           scores.begin() + static_cast<std::ptrdiff_t>(*span.token_end) + 1);
}

}  // namespace

std::vector<ScoredSpan> ScoreSpans(std::span<const double> token_scores,
                                   const LabeledSample& sample, Protocol protocol,
                                   const std::string& method) {
  if (token_scores.size() != sample.tokens.size()) {
    ThrowData("sample " + sample.id + ": " + std::to_string(token_scores.size()) +
              " scores for " + std::to_string(sample.tokens.size()) + " tokens");
  }
  std::vector<ScoredSpan> out;
  switch (protocol) {
    case Protocol::kLongForm:
      for (std::size_t s = 0; s < sample.spans.size(); ++s) {
        out.push_back({sample.id, std::to_string(s), method,
                       SpanMax(token_scores, sample.spans[s], sample.id),
                       sample.spans[s].binary_label()});
      }
      break;
    case Protocol::kShortForm:
      if (sample.spans.size() != 1) {
        ThrowData("sample " + sample.id + ": short-form protocol needs exactly one answer span, found " +
                  std::to_string(sample.spans.size()));
      }
      out.push_back({sample.id, "0", method,
                     SpanMax(token_scores, sample.spans[0], sample.id),
                     sample.spans[0].binary_label()});
      break;
    case Protocol::kReasoning:
      if (!sample.completion_label) {
        ThrowData("sample " + sample.id + ": reasoning protocol needs completion_label");
      }
      if (token_scores.empty()) ThrowData("sample " + sample.id + ": empty completion");
      out.push_back({sample.id, "completion", method,
                     *std::max_element(token_scores.begin(), token_scores.end()),
                     *sample.completion_label});
      break;
  }
  return out;
}

}  // namespace halluprobe
