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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "halluprobe/tokenizer.hpp"

namespace halluprobe {

enum class VerificationLabel {
  kSupported,
  kNotSupported,
  kInsufficientInformation,
};

// not_supported and insufficient_information both count as hallucinated.
inline bool IsHallucinated(VerificationLabel label) {
  return label != VerificationLabel::kSupported;
}

// Snake-case wire name ("supported", "not_supported", ...).
const char* LabelName(VerificationLabel label);

// Accepts the snake-case names and the judge's display names
// ("Supported", "Not Supported", "Insufficient Information").
std::optional<VerificationLabel> ParseLabel(std::string_view text);

// An entity annotation. Character offsets are byte offsets into the
// completion (half-open). Token indices are inclusive and unset until the
// span has been aligned against a tokenization.
struct EntitySpan {
  std::string text;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  std::optional<std::size_t> token_start;
  std::optional<std::size_t> token_end;
  VerificationLabel label = VerificationLabel::kSupported;
  std::string note;

  bool aligned() const { return token_start.has_value() && token_end.has_value(); }
  int binary_label() const { return IsHallucinated(label) ? 1 : 0; }
  std::size_t token_count() const { return *token_end - *token_start + 1; }

  bool operator==(const EntitySpan&) const = default;
};

// A judge annotation before it has been located in the completion.
struct RawAnnotation {
  std::string text;
  VerificationLabel label = VerificationLabel::kSupported;
  std::string note;

  bool operator==(const RawAnnotation&) const = default;
};

struct LabeledSample {
  std::string id;
  std::string prompt;
  std::string completion;
  std::vector<TokenOffset> tokens;
  std::vector<EntitySpan> spans;
  // Annotations that still need align_span (stored with null offsets).
  std::vector<RawAnnotation> pending;
  std::string source_tag;
  // Reasoning protocol: 1 when the final answer was judged incorrect.
  std::optional<int> completion_label;

  bool operator==(const LabeledSample&) const = default;
};

struct TokenTargets {
  std::vector<std::uint8_t> y;
  std::vector<double> w;
  std::vector<std::uint8_t> entity_mask;
};

struct AlignResult {
  std::optional<EntitySpan> span;
  std::string rejection;  // set when span is empty

  bool accepted() const { return span.has_value(); }
};

// Locates annotations inside one completion. Repeated span texts consume
// occurrences left to right in the order annotations are presented, with
// occurrences on word boundaries taken before ones embedded in a word.
class SpanAligner {
 public:
  SpanAligner(std::string_view completion, std::span<const TokenOffset> tokens);

  AlignResult Align(const RawAnnotation& raw);

  // Records an already-located span so later annotations skip its occurrence.
  void MarkConsumed(const EntitySpan& span);

 private:
  std::string_view completion_;
  std::span<const TokenOffset> tokens_;
  std::vector<std::pair<std::string, std::size_t>> consumed_;
};

// One-shot alignment with no prior consumption.
AlignResult AlignSpan(std::string_view completion,
                      std::span<const TokenOffset> tokens,
                      const RawAnnotation& raw);

// Inclusive token range covering every token whose byte interval intersects
// [char_start, char_end). Returns nullopt when no token intersects.
std::optional<std::pair<std::size_t, std::size_t>> TokenRangeForChars(
    std::span<const TokenOffset> tokens, std::size_t char_start,
    std::size_t char_end);

// True when offset falls on a UTF-8 character boundary of text.
bool IsCharBoundary(std::string_view text, std::size_t offset);

// Empty when the span is consistent with the completion; otherwise a reason.
std::string CheckSpanAgainstCompletion(std::string_view completion,
                                       const EntitySpan& span);

// Merges spans that share a token range. On a label conflict the
// hallucinated label wins (not_supported before insufficient_information).
std::vector<EntitySpan> MergeDuplicateSpans(std::vector<EntitySpan> spans);

// Re-tokenizes the completion and recomputes token ranges for spans.
void Tokenize(LabeledSample& sample, const ByteTokenizer& tokenizer);

struct AlignStats {
  std::size_t aligned = 0;
  std::size_t rejected = 0;
  std::vector<std::string> rejections;
};

// Aligns every pending annotation of a tokenized sample, merges duplicates
// and clears the pending list.
AlignStats AlignPending(LabeledSample& sample);

TokenTargets BuildTargets(const LabeledSample& sample, double alpha);

// Short-form split construction: keep only questions whose five judged
// generations agree, then downsample the majority class.
struct ShortformQuestion {
  std::string id;
  std::string question;
  std::string completion;
  std::string answer_text;    // designated answer span inside completion
  std::vector<int> verdicts;  // 1 = judged correct
};

struct ShortformReport {
  std::size_t input = 0;
  std::size_t unanimous_correct = 0;
  std::size_t unanimous_incorrect = 0;
  std::size_t dropped_mixed = 0;
  std::size_t dropped_unalignable = 0;
  std::size_t output = 0;
};

std::vector<LabeledSample> BuildShortformSplit(
    std::span<const ShortformQuestion> questions, std::uint64_t seed,
    ShortformReport* report = nullptr);

}  // namespace halluprobe
