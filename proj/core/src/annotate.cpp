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

#include "halluprobe/annotate.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "halluprobe/error.hpp"

namespace halluprobe {

const char* const kJudgeSystemPrompt =
    R"PROMPT(You are a fact-checker. Your task is to fact-check a model's completion to some given
instruction.

Here's the instruction:
<instruction>{instruction}</instruction>

Here's the completion you'll have to fact-check:
<completion>{completion}</completion>

Focus on verifying:
- People (names, affiliations)
- Organizations
- Locations
- Dates and events
- Specific quantities/statistics
- Citations and references

For each entity:
1. Extract the minimal text span (just the entity itself, not surrounding context)
2. Use web search to verify if it's real
3. Label as:
   - "Supported": Verified as correct
   - "Not Supported": Appears to be fabricated or incorrect
   - "Insufficient Information": Cannot verify with available information

Guidelines:
- An entity is correct not only if it is real and it exists (i.e. it isn't fabricated)
but also if it's correct in the context of the sentence and the instruction
- We're interested, not in spotting errors due to small technicalities, but rather in
finding things that the model has clearly bullshitted
- Be skeptical and cautious about highly specific or obscure claims: if you cannot
recall the fact with confidence from your own knowledge or the sources, do not guess;
use "Insufficient Information."
- The extracted span should contain only the specific name, number, citation, etc.
Please do not include anything else within the sentence in the extracted spans
- The spans you extract (the "text" field) should match word-for-word with the original
span in the completion.

Return the output strictly as a JSON array of objects (ordered by the index in which
they appear in the text) following this schema:
```json
[
  {
    "text": "The minimal span containing just the entity (e.g., 'Sarah Chen',
    not 'Dr. Sarah Chen from MIT')",
    "label": "Whether the entity/fact is verified as real, fabricated, or unverifiable",
    "verification_note": "Brief explanation of the verification result"
  },
  ...
]
```)PROMPT";

std::string RenderJudgePrompt(const std::string& instruction,
                              const std::string& completion) {
  std::string s = kJudgeSystemPrompt;
  // The completion is substituted after the instruction so that braces in
  // the instruction text cannot capture the second placeholder.
  const auto ipos = s.find("{instruction}");
  s.replace(ipos, 13, instruction);
  const auto cpos = s.find("{completion}", ipos + instruction.size());
  s.replace(cpos, 12, completion);
  return s;
}

std::string JudgeRequest::ToJson() const {
  nlohmann::json j = {{"system_prompt", system_prompt},
                      {"instruction", instruction},
                      {"completion", completion}};
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string HttpJudgeClient::Complete(const JudgeRequest& request) {
  return PostJson(endpoint_, request.ToJson());
}

ParsedJudgeResponse ParseJudgeResponse(const std::string& payload) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(payload);
  } catch (const nlohmann::json::exception& e) {
    ThrowExternal(std::string("judge returned a non-JSON payload: ") + e.what());
  }
  if (!j.is_array()) ThrowExternal("judge payload is not a JSON array");
  ParsedJudgeResponse out;
  auto drop = [&](std::size_t i, const std::string& why) {
    ++out.dropped;
    out.drop_reasons.push_back("entry " + std::to_string(i) + ": " + why);
  };
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    if (!e.is_object()) {
      drop(i, "not an object");
      continue;
    }
    if (!e.contains("text") || !e["text"].is_string() || e["text"].get<std::string>().empty()) {
      drop(i, "missing or empty text");
      continue;
    }
    if (!e.contains("label") || !e["label"].is_string()) {
      drop(i, "missing label");
      continue;
    }
    const auto label = ParseLabel(e["label"].get<std::string>());
    if (!label) {
      drop(i, "unknown label \"" + e["label"].get<std::string>() + "\"");
      continue;
    }
    RawAnnotation a;
    a.text = e["text"].get<std::string>();
    a.label = *label;
    if (e.contains("verification_note") && e["verification_note"].is_string()) {
      a.note = e["verification_note"].get<std::string>();
    }
    out.annotations.push_back(std::move(a));
  }
  return out;
}

AnnotationResult AnnotateCompletion(const std::string& instruction,
                                    const std::string& completion,
                                    JudgeClient& client) {
  JudgeRequest req{RenderJudgePrompt(instruction, completion), instruction, completion};
  const auto t0 = std::chrono::steady_clock::now();
  const std::string payload = client.Complete(req);
  AnnotationResult r;
  r.latency_ms = std::chrono::duration<double, std::milli>(
                     std::chrono::steady_clock::now() - t0)
                     .count();
  r.parsed = ParseJudgeResponse(payload);
  return r;
}

AttachReport AttachAnnotations(LabeledSample& sample,
                               std::span<const RawAnnotation> raw) {
  if (sample.tokens.empty() && !sample.completion.empty()) {
    Tokenize(sample, ByteTokenizer{});
  }
  AttachReport report;
  SpanAligner aligner(sample.completion, sample.tokens);
  for (const auto& s : sample.spans) aligner.MarkConsumed(s);
  for (const auto& a : raw) {
    AlignResult r = aligner.Align(a);
    if (r.accepted()) {
      sample.spans.push_back(std::move(*r.span));
      ++report.attached;
      continue;
    }
    // A surplus annotation of an already attached text is a second judgment
    // of that span: merge it into the last such span instead of dropping it.
    auto dup = std::find_if(sample.spans.rbegin(), sample.spans.rend(),
                            [&](const EntitySpan& s) { return s.text == a.text; });
    if (dup != sample.spans.rend()) {
      EntitySpan copy = *dup;
      copy.label = a.label;
      copy.note = a.note;
      sample.spans.push_back(std::move(copy));
      ++report.merged;
      continue;
    }
    ++report.rejected;
    report.rejections.push_back("\"" + a.text + "\": " + r.rejection);
  }
  std::stable_sort(sample.spans.begin(), sample.spans.end(),
                   [](const EntitySpan& x, const EntitySpan& y) {
                     return x.char_start < y.char_start;
                   });
  sample.spans = MergeDuplicateSpans(std::move(sample.spans));
  return report;
}

std::string AnnotationLedgerRow::ToJsonLine(bool include_latency) const {
  nlohmann::json j = {{"sample_id", sample_id},
                      {"spans_returned", spans_returned},
                      {"dropped", dropped},
                      {"rejected", rejected}};
  if (include_latency) j["latency_ms"] = latency_ms;
  return j.dump() + "\n";
}

std::vector<AnnotationLedgerRow> AnnotateSamples(std::vector<LabeledSample>& samples,
                                                 JudgeClient& client,
                                                 std::size_t max_in_flight) {
  if (max_in_flight == 0) ThrowUsage("max_in_flight must be >= 1");
  const std::size_t n = samples.size();
  std::vector<AnnotationResult> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        results[i] = AnnotateCompletion(samples[i].prompt, samples[i].completion, client);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(max_in_flight, n);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return samples[a].id < samples[b].id;
  });
  std::vector<AnnotationLedgerRow> ledger;
  for (auto i : order) {
    AttachReport rep = AttachAnnotations(samples[i], results[i].parsed.annotations);
    AnnotationLedgerRow row;
    row.sample_id = samples[i].id;
    row.spans_returned = results[i].parsed.annotations.size() + results[i].parsed.dropped;
    row.dropped = results[i].parsed.dropped;
    row.rejected = rep.rejected;
    row.latency_ms = results[i].latency_ms;
    ledger.push_back(std::move(row));
  }
  return ledger;
}

}  // namespace halluprobe
