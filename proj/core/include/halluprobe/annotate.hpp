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

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "halluprobe/corpus.hpp"

namespace halluprobe {

// The fact-checking system prompt, with {instruction} and {completion}
// placeholders.
extern const char* const kJudgeSystemPrompt;

// Substitutes both placeholders verbatim.
std::string RenderJudgePrompt(const std::string& instruction,
                              const std::string& completion);

struct JudgeRequest {
  std::string system_prompt;
  std::string instruction;
  std::string completion;

  // {"system_prompt": ..., "instruction": ..., "completion": ...}
  std::string ToJson() const;
};

// Returns the raw response payload: a JSON array of
// {"text", "label", "verification_note"} objects in appearance order.
class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  virtual std::string Complete(const JudgeRequest& request) = 0;
};

// HTTP endpoint settings. Credentials come from the environment only.
struct JudgeEndpoint {
  std::string url;    // http(s)://host[:port]/path
  std::string token;  // sent as a bearer token when non-empty
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::seconds timeout{120};

  // HALLUPROBE_JUDGE_URL and HALLUPROBE_JUDGE_TOKEN; a missing URL is a
  // usage error.
  static JudgeEndpoint FromEnvironment();
};

// POSTs a JSON body and returns the response body. Transport failures and
// non-2xx statuses are retried with exponential backoff up to max_attempts,
// then raised as external errors. Thread-safe.
std::string PostJson(const JudgeEndpoint& endpoint, const std::string& body);

class HttpJudgeClient : public JudgeClient {
 public:
  explicit HttpJudgeClient(JudgeEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  std::string Complete(const JudgeRequest& request) override;

 private:
  JudgeEndpoint endpoint_;
};

struct ParsedJudgeResponse {
  std::vector<RawAnnotation> annotations;
  std::size_t dropped = 0;
  std::vector<std::string> drop_reasons;
};

// A payload that is not a JSON array is an external error; malformed
// entries (missing text, unknown label, wrong types) are dropped and counted.
ParsedJudgeResponse ParseJudgeResponse(const std::string& payload);

struct AnnotationResult {
  ParsedJudgeResponse parsed;
  double latency_ms = 0.0;
};

AnnotationResult AnnotateCompletion(const std::string& instruction,
                                    const std::string& completion,
                                    JudgeClient& client);

struct AttachReport {
  std::size_t attached = 0;
  std::size_t merged = 0;  // repeat judgments folded into an attached span
  std::size_t rejected = 0;
  std::vector<std::string> rejections;
};

// Aligns each raw annotation against the sample's completion and attaches
// the verbatim matches. Nothing attaches without an exact substring match.
// An annotation whose text is already attached and has no free occurrence
// left is merged into that span, the hallucinated label winning.
// Tokenizes the sample first when it has no tokens.
AttachReport AttachAnnotations(LabeledSample& sample,
                               std::span<const RawAnnotation> raw);

struct AnnotationLedgerRow {
  std::string sample_id;
  std::size_t spans_returned = 0;
  std::size_t dropped = 0;
  std::size_t rejected = 0;
  double latency_ms = 0.0;

  std::string ToJsonLine(bool include_latency) const;
};

// Annotates every sample with at most max_in_flight concurrent judge calls.
// Attachment happens afterwards in sample-id order. The client must be
// safe to call from several threads.
std::vector<AnnotationLedgerRow> AnnotateSamples(std::vector<LabeledSample>& samples,
                                                 JudgeClient& client,
                                                 std::size_t max_in_flight);

}  // namespace halluprobe
