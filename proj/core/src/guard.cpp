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

#include "halluprobe/guard.hpp"

#include <cmath>
#include <numeric>

#include <json.hpp>

#include "halluprobe/error.hpp"
#include "halluprobe/tokenizer.hpp"

namespace halluprobe {

void MonitorConfig::Validate() const {
  if (!std::isfinite(threshold) || threshold < 0.0) {
    ThrowUsage("monitor threshold must be finite and >= 0");
  }
  if (!(temperature >= 0.0)) ThrowUsage("temperature must be >= 0");
}

MonitorDecision Observe(double score, const MonitorConfig& config) {
  if (!std::isfinite(score)) ThrowNumeric("non-finite probe score");
  return score > config.threshold ? MonitorDecision::kAbstain : MonitorDecision::kContinue;
}

const char* MonitorStatusName(MonitorStatus status) {
  return status == MonitorStatus::kAbstained ? "abstained" : "completed";
}

std::string MonitorOutcome::ToJsonLine(const std::string& prompt_id) const {
  nlohmann::json j = {{"prompt_id", prompt_id},
                      {"status", MonitorStatusName(status)},
                      {"trigger_index", nullptr},
                      {"score", nullptr},
                      {"output", output_text},
                      {"partial", partial_text}};
  if (trigger_index) j["trigger_index"] = *trigger_index;
  if (trigger_score) j["score"] = *trigger_score;
  // Generated text may split a UTF-8 sequence; replace rather than fail.
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

MonitorOutcome RunMonitored(const ModelParams& params, const ProbeHead& head,
                            const AdapterSet* adapters, const std::string& prompt,
                            const MonitorConfig& config) {
  config.Validate();
  if (head.w.size() != static_cast<std::size_t>(params.config.d_model)) {
    ThrowUsage("probe head width does not match the model");
  }
  GenerateOptions opt;
  opt.max_new_tokens = config.max_new_tokens;
  opt.temperature = config.temperature;
  opt.seed = config.seed;
  opt.probe_layer = head.layer;

  MonitorOutcome out;
  auto observer = [&](std::size_t index, TokenId, std::span<const double> hidden) {
    const double score =
        Sigmoid(std::inner_product(head.w.begin(), head.w.end(), hidden.begin(), head.b));
    out.scores.push_back(score);
    if (Observe(score, config) == MonitorDecision::kAbstain) {
      out.status = MonitorStatus::kAbstained;
      out.trigger_index = index;
      out.trigger_score = score;
      return false;
    }
    return true;
  };
  const Sequence seq = MakeSequence(prompt, "");
  GenerateResult gen = Generate(params, adapters, seq.tokens, opt, observer);
  out.tokens = std::move(gen.tokens);
  out.partial_text = ByteTokenizer{}.Decode(out.tokens);
  out.output_text =
      out.status == MonitorStatus::kAbstained ? config.abstain_message : out.partial_text;
  return out;
}

double AttemptRate(const std::vector<double>& max_scores, double threshold) {
  if (max_scores.empty()) return 0.0;
  std::size_t attempted = 0;
  for (double s : max_scores) {
    if (s <= threshold) ++attempted;
  }
  return static_cast<double>(attempted) / static_cast<double>(max_scores.size());
}

}  // namespace halluprobe
