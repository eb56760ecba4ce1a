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

#include <cmath>
#include <vector>

#include "halluprobe/error.hpp"
#include "halluprobe/refmodel.hpp"
#include "halluprobe/rng.hpp"
#include "model_internal.hpp"

namespace halluprobe {
namespace {

TokenId Argmax(std::span<const double> logits) {
  std::size_t best = 0;
  for (std::size_t v = 1; v < logits.size(); ++v) {
    if (logits[v] > logits[best]) best = v;
  }
  return static_cast<TokenId>(best);
}

TokenId SampleCategorical(std::span<const double> logits, double temperature,
                          Rng& rng) {
  std::vector<double> scaled(logits.begin(), logits.end());
  for (auto& z : scaled) z /= temperature;
  auto lp = LogSoftmax(scaled);
  const double u = UniformUnit(rng);
  double acc = 0.0;
  for (std::size_t v = 0; v < lp.size(); ++v) {
    acc += std::exp(lp[v]);
    if (u < acc) return static_cast<TokenId>(v);
  }
  // Rounding left u above the cumulative sum; take the last non-zero entry.
  for (std::size_t v = lp.size(); v-- > 0;) {
    if (std::exp(lp[v]) > 0.0) return static_cast<TokenId>(v);
  }
  return 0;
}

}  // namespace

GenerateResult Generate(const ModelParams& params, const AdapterSet* adapters,
                        std::span<const TokenId> prompt,
                        const GenerateOptions& options,
                        const StepObserver& observer) {
  if (!(options.temperature >= 0.0)) ThrowUsage("temperature must be >= 0");
  if (prompt.empty()) ThrowUsage("generate: empty prompt");
  const int layer = options.probe_layer >= 0
                        ? options.probe_layer
                        : DefaultProbeLayer(params.config.n_layers);
  if (layer >= params.config.n_layers) ThrowUsage("generate: probe layer out of range");
  const auto max_len = static_cast<std::size_t>(params.config.max_seq_len);

  Rng rng = MakeRng(options.seed, "sampling");
  std::vector<TokenId> seq(prompt.begin(), prompt.end());
  GenerateResult result;
  bool need_score = false;  // last emitted token not yet shown to observer
  while (true) {
    const bool can_extend = result.tokens.size() < options.max_new_tokens &&
                            seq.size() < max_len;
    if (!can_extend && !(need_score && observer)) break;
    // Only the final position's logits are needed; the stream rows serve the
    // observer.
    ForwardResult fwd =
        internal::ForwardImpl(params, adapters, seq, nullptr, /*last_row_only=*/true);
    if (need_score && observer) {
      const Matrix& stream = fwd.streams[static_cast<std::size_t>(layer)];
      const std::size_t last = seq.size() - 1;
      if (!observer(result.tokens.size() - 1, result.tokens.back(),
                    stream.row_span(last))) {
        result.finish = FinishReason::kStopped;
        return result;
      }
    }
    need_score = false;
    if (!can_extend) break;
    const auto logits = fwd.logits.row_span(0);
    const TokenId next = options.temperature == 0.0
                             ? Argmax(logits)
                             : SampleCategorical(logits, options.temperature, rng);
    if (options.stop_at_eos && next == ByteTokenizer::kEos) {
      result.finish = FinishReason::kEos;
      return result;
    }
    seq.push_back(next);
    result.tokens.push_back(next);
    need_score = true;
  }
  result.finish = result.tokens.size() >= options.max_new_tokens
                      ? FinishReason::kMaxNewTokens
                      : FinishReason::kContextFull;
  return result;
}

}  // namespace halluprobe
