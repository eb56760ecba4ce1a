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

#include "halluprobe/corpus.hpp"

#include <cctype>
#include <algorithm>
#include <map>

#include "halluprobe/error.hpp"
#include "halluprobe/rng.hpp"

namespace halluprobe {

const char* LabelName(VerificationLabel label) {
  switch (label) {
    case VerificationLabel::kSupported:
      return "supported";
    case VerificationLabel::kNotSupported:
      return "not_supported";
    case VerificationLabel::kInsufficientInformation:
      return "insufficient_information";
  }
  return "supported";
}

std::optional<VerificationLabel> ParseLabel(std::string_view text) {
  if (text == "supported" || text == "Supported") {
    return VerificationLabel::kSupported;
  }
  if (text == "not_supported" || text == "Not Supported") {
    return VerificationLabel::kNotSupported;
  }
  if (text == "insufficient_information" ||
      text == "Insufficient Information") {
    return VerificationLabel::kInsufficientInformation;
  }
  return std::nullopt;
}

bool IsCharBoundary(std::string_view text, std::size_t offset) {
  if (offset == 0 || offset == text.size()) return true;
  if (offset > text.size()) return false;
  const auto byte = static_cast<unsigned char>(text[offset]);
  return (byte & 0xC0) != 0x80;
}

std::optional<std::pair<std::size_t, std::size_t>> TokenRangeForChars(
    std::span<const TokenOffset> tokens, std::size_t char_start,
    std::size_t char_end) {
  if (char_end <= char_start) return std::nullopt;
  // First token ending after char_start.
  auto first = std::partition_point(
      tokens.begin(), tokens.end(),
      [&](const TokenOffset& t) { return t.char_end <= char_start; });
  // One past the last token starting before char_end.
  auto last = std::partition_point(
      tokens.begin(), tokens.end(),
      [&](const TokenOffset& t) { return t.char_start < char_end; });
  if (first == tokens.end() || first >= last) return std::nullopt;
  return std::make_pair(static_cast<std::size_t>(first - tokens.begin()),
                        static_cast<std::size_t>(last - tokens.begin()) - 1);
}

std::string CheckSpanAgainstCompletion(std::string_view completion,
                                       const EntitySpan& span) {
  if (span.char_start >= span.char_end) return "empty or inverted char range";
  if (span.char_end > completion.size()) return "char range past end of completion";
  if (completion.substr(span.char_start, span.char_end - span.char_start) !=
      span.text) {
    return "completion bytes at offsets do not match span text";
  }
  if (!IsCharBoundary(completion, span.char_start) ||
      !IsCharBoundary(completion, span.char_end)) {
    return "span does not fall on UTF-8 character boundaries";
  }
  return {};
}

SpanAligner::SpanAligner(std::string_view completion,
                         std::span<const TokenOffset> tokens)
    : completion_(completion), tokens_(tokens) {}

void SpanAligner::MarkConsumed(const EntitySpan& span) {
  consumed_.emplace_back(span.text, span.char_start);
}

AlignResult SpanAligner::Align(const RawAnnotation& raw) {
  AlignResult result;
  if (raw.text.empty()) {
    result.rejection = "empty span text";
    return result;
  }
  auto is_consumed = [&](std::size_t pos) {
    return std::find(consumed_.begin(), consumed_.end(),
                     std::make_pair(raw.text, pos)) != consumed_.end();
  };
  // Prefer an occurrence that is not glued to surrounding alphanumerics, so
  // "7" does not land inside "1957"; fall back to the first free occurrence.
  auto is_word = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
  };
  auto standalone = [&](std::size_t at) {
    const std::size_t stop = at + raw.text.size();
    const bool left = at == 0 || !is_word(completion_[at - 1]) || !is_word(raw.text.front());
    const bool right = stop == completion_.size() || !is_word(completion_[stop]) ||
                       !is_word(raw.text.back());
    return left && right;
  };
  std::size_t pos = std::string_view::npos;
  std::size_t fallback = std::string_view::npos;
  bool seen_any = false;
  for (std::size_t at = completion_.find(raw.text); at != std::string_view::npos;
       at = completion_.find(raw.text, at + 1)) {
    if (is_consumed(at)) {
      seen_any = true;
      continue;
    }
    if (fallback == std::string_view::npos) fallback = at;
    if (standalone(at)) {
      pos = at;
      break;
    }
  }
  if (pos == std::string_view::npos) pos = fallback;
  if (pos == std::string_view::npos) {
    result.rejection = seen_any ? "every verbatim occurrence already consumed"
                                : "no verbatim occurrence in completion";
    return result;
  }
  const std::size_t end = pos + raw.text.size();
  if (!IsCharBoundary(completion_, pos) || !IsCharBoundary(completion_, end)) {
    result.rejection = "span does not fall on UTF-8 character boundaries";
    return result;
  }
  auto range = TokenRangeForChars(tokens_, pos, end);
  if (!range) {
    result.rejection = "no token covers the span";
    return result;
  }
  EntitySpan span;
  span.text = raw.text;
  span.char_start = pos;
  span.char_end = end;
  span.token_start = range->first;
  span.token_end = range->second;
  span.label = raw.label;
  span.note = raw.note;
  consumed_.emplace_back(raw.text, pos);
  result.span = std::move(span);
  return result;
}

AlignResult AlignSpan(std::string_view completion,
                      std::span<const TokenOffset> tokens,
                      const RawAnnotation& raw) {
  SpanAligner aligner(completion, tokens);
  return aligner.Align(raw);
}

namespace {

int LabelSeverity(VerificationLabel label) {
  switch (label) {
    case VerificationLabel::kSupported:
      return 0;
    case VerificationLabel::kInsufficientInformation:
      return 1;
    case VerificationLabel::kNotSupported:
      return 2;
  }
  return 0;
}

}  // namespace

std::vector<EntitySpan> MergeDuplicateSpans(std::vector<EntitySpan> spans) {
  std::vector<EntitySpan> out;
  out.reserve(spans.size());
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> index;
  for (auto& span : spans) {
    if (!span.aligned()) {
      out.push_back(std::move(span));
      continue;
    }
    const auto key = std::make_pair(*span.token_start, *span.token_end);
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, out.size());
      out.push_back(std::move(span));
      continue;
    }
    EntitySpan& kept = out[it->second];
    if (LabelSeverity(span.label) > LabelSeverity(kept.label)) {
      kept.label = span.label;
    }
    if (!span.note.empty() && span.note != kept.note) {
      kept.note = kept.note.empty() ? span.note : kept.note + " | " + span.note;
    }
  }
  return out;
}

void Tokenize(LabeledSample& sample, const ByteTokenizer& tokenizer) {
  sample.tokens = tokenizer.Encode(sample.completion);
  for (auto& span : sample.spans) {
    auto range = CheckSpanAgainstCompletion(sample.completion, span).empty()
                     ? TokenRangeForChars(sample.tokens, span.char_start,
                                          span.char_end)
                     : std::nullopt;
    if (range) {
      span.token_start = range->first;
      span.token_end = range->second;
    } else {
      span.token_start.reset();
      span.token_end.reset();
    }
  }
}

AlignStats AlignPending(LabeledSample& sample) {
  AlignStats stats;
  SpanAligner aligner(sample.completion, sample.tokens);
  for (const auto& span : sample.spans) aligner.MarkConsumed(span);
  for (const auto& raw : sample.pending) {
    auto result = aligner.Align(raw);
    if (result.accepted()) {
      sample.spans.push_back(std::move(*result.span));
      ++stats.aligned;
    } else {
      ++stats.rejected;
      stats.rejections.push_back(raw.text + ": " + result.rejection);
    }
  }
  sample.pending.clear();
  std::stable_sort(sample.spans.begin(), sample.spans.end(),
                   [](const EntitySpan& a, const EntitySpan& b) {
                     return a.char_start < b.char_start;
                   });
  sample.spans = MergeDuplicateSpans(std::move(sample.spans));
  return stats;
}

TokenTargets BuildTargets(const LabeledSample& sample, double alpha) {
  if (!(alpha > 0.0)) ThrowUsage("alpha must be positive");
  const std::size_t n = sample.tokens.size();
  TokenTargets t;
  t.y.assign(n, 0);
  t.entity_mask.assign(n, 0);
  for (const auto& span : sample.spans) {
    if (!span.aligned()) {
      ThrowData("sample " + sample.id + ": span '" + span.text +
                "' is not aligned to tokens");
    }
    if (*span.token_end >= n || *span.token_start > *span.token_end) {
      ThrowData("sample " + sample.id + ": span '" + span.text +
                "' has an invalid token range");
    }
    const std::uint8_t y = static_cast<std::uint8_t>(span.binary_label());
    for (std::size_t i = *span.token_start; i <= *span.token_end; ++i) {
      t.entity_mask[i] = 1;
      t.y[i] = std::max(t.y[i], y);
    }
  }
  t.w.resize(n);
  for (std::size_t i = 0; i < n; ++i) t.w[i] = t.entity_mask[i] ? alpha : 1.0;
  return t;
}

std::vector<LabeledSample> BuildShortformSplit(
    std::span<const ShortformQuestion> questions, std::uint64_t seed,
    ShortformReport* report) {
  ShortformReport rep;
  rep.input = questions.size();
  ByteTokenizer tokenizer;
  std::vector<LabeledSample> correct;
  std::vector<LabeledSample> incorrect;
  for (const auto& q : questions) {
    if (q.verdicts.size() != 5) {
      ThrowData("question " + q.id + ": expected exactly 5 verdicts, got " +
                std::to_string(q.verdicts.size()));
    }
    const auto n_correct = std::count(q.verdicts.begin(), q.verdicts.end(), 1);
    if (n_correct != 5 && n_correct != 0) {
      ++rep.dropped_mixed;
      continue;
    }
    LabeledSample s;
    s.id = q.id;
    s.prompt = q.question;
    s.completion = q.completion;
    s.source_tag = "shortform";
    s.tokens = tokenizer.Encode(s.completion);
    RawAnnotation answer{q.answer_text,
                         n_correct == 5 ? VerificationLabel::kSupported
                                        : VerificationLabel::kNotSupported,
                         "answer span"};
    auto aligned = AlignSpan(s.completion, s.tokens, answer);
    if (!aligned.accepted()) {
      ++rep.dropped_unalignable;
      continue;
    }
    s.spans.push_back(std::move(*aligned.span));
    (n_correct == 5 ? correct : incorrect).push_back(std::move(s));
  }
  rep.unanimous_correct = correct.size();
  rep.unanimous_incorrect = incorrect.size();

  // Downsample the majority class; keep the survivors in input order.
  auto& majority = correct.size() > incorrect.size() ? correct : incorrect;
  const std::size_t keep = std::min(correct.size(), incorrect.size());
  std::vector<std::size_t> order(majority.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto rng = MakeRng(seed, "shortform");
  Shuffle(order, rng);
  order.resize(keep);
  std::sort(order.begin(), order.end());
  std::vector<LabeledSample> kept;
  kept.reserve(keep);
  for (auto i : order) kept.push_back(std::move(majority[i]));
  majority = std::move(kept);

  // Interleave back into input order.
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < questions.size(); ++i) position[questions[i].id] = i;
  std::vector<LabeledSample> out;
  out.reserve(correct.size() + incorrect.size());
  for (auto& s : correct) out.push_back(std::move(s));
  for (auto& s : incorrect) out.push_back(std::move(s));
  std::stable_sort(out.begin(), out.end(),
                   [&](const LabeledSample& a, const LabeledSample& b) {
                     return position[a.id] < position[b.id];
                   });
  rep.output = out.size();
  if (report) *report = rep;
  return out;
}

}  // namespace halluprobe
