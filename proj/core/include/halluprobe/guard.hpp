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
#include <string>
#include <vector>

#include "halluprobe/probe.hpp"
#include "halluprobe/refmodel.hpp"

namespace halluprobe {

struct MonitorConfig {
  double threshold = 0.5;
  std::string abstain_message = "I don't know.";
  std::size_t max_new_tokens = 64;
  double temperature = 0.0;
  std::uint64_t seed = 0;

  // Throws a usage error for a non-finite or negative threshold.
  void Validate() const;
};

enum class MonitorDecision { kContinue, kAbstain };

// Abstain iff score > threshold. A non-finite score is a numeric error.
MonitorDecision Observe(double score, const MonitorConfig& config);

enum class MonitorStatus { kCompleted, kAbstained };
const char* MonitorStatusName(MonitorStatus status);

struct MonitorOutcome {
  MonitorStatus status = MonitorStatus::kCompleted;
  std::vector<TokenId> tokens;  // emitted tokens, up to and including the trigger
  std::vector<double> scores;   // probe score of each emitted token
  std::string partial_text;     // decoded tokens, kept for audit
  std::string output_text;      // what the user sees
  std::optional<std::size_t> trigger_index;
  std::optional<double> trigger_score;

  // {"prompt_id", "status", "trigger_index", "score", "output"}
  std::string ToJsonLine(const std::string& prompt_id) const;
};

// Generates from the prompt and scores each emitted token with the head on
// the hidden state of the same forward pass. On the first score above the
// threshold generation halts and the abstain message replaces the answer.
MonitorOutcome RunMonitored(const ModelParams& params, const ProbeHead& head,
                            const AdapterSet* adapters, const std::string& prompt,
                            const MonitorConfig& config);

// Fraction of answers whose max score does not exceed t.
double AttemptRate(const std::vector<double>& max_scores, double threshold);

}  // namespace halluprobe
