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

#include "halluprobe/probe.hpp"

#include <cmath>

#include "halluprobe/error.hpp"
#include "model_internal.hpp"

namespace halluprobe {

double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double BceFromLogit(int y, double z) {
  return std::max(z, 0.0) - static_cast<double>(y) * z +
         std::log1p(std::exp(-std::abs(z)));
}

std::vector<double> HeadLogits(const Matrix& hidden, const ProbeHead& head) {
  if (hidden.cols != head.w.size()) {
    ThrowUsage("probe head width " + std::to_string(head.w.size()) +
               " does not match hidden width " + std::to_string(hidden.cols));
  }
  std::vector<double> z(hidden.rows);
  for (std::size_t i = 0; i < hidden.rows; ++i) {
    z[i] = internal::Dot(hidden.row(i), head.w.data(), hidden.cols) + head.b;
  }
  return z;
}

std::vector<double> HeadScores(const Matrix& hidden, const ProbeHead& head) {
  auto z = HeadLogits(hidden, head);
  for (auto& v : z) v = Sigmoid(v);
  return z;
}

ProbeExample MakeProbeExample(const LabeledSample& sample, double alpha) {
  TokenTargets t = BuildTargets(sample, alpha);
  ProbeExample ex;
  ex.y = std::move(t.y);
  ex.w = std::move(t.w);
  for (const auto& s : sample.spans) {
    ex.spans.push_back({*s.token_start, *s.token_end, s.binary_label()});
  }
  return ex;
}

double TokenLoss(std::span<const double> logits, std::span<const std::uint8_t> y,
                 std::span<const double> w) {
  if (logits.size() != y.size() || logits.size() != w.size()) {
    ThrowUsage("token_loss: length mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    total += w[i] * BceFromLogit(y[i], logits[i]);
  }
  return total;
}

std::size_t SpanArgmax(std::span<const double> logits, const SpanTarget& span) {
  if (span.start > span.end || span.end >= logits.size()) {
    ThrowUsage("span [" + std::to_string(span.start) + ", " +
               std::to_string(span.end) + "] is empty or out of range");
  }
  std::size_t best = span.start;
  for (std::size_t i = span.start + 1; i <= span.end; ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

double SpanMaxLoss(std::span<const double> logits,
                   std::span<const SpanTarget> spans) {
  double total = 0.0;
  for (const auto& s : spans) {
    total += BceFromLogit(s.label, logits[SpanArgmax(logits, s)]);
  }
  return total;
}

double ProbeLoss(std::span<const double> logits, const ProbeExample& example,
                 double omega) {
  if (!(omega >= 0.0 && omega <= 1.0)) ThrowUsage("omega must lie in [0, 1]");
  if (omega == 0.0) return TokenLoss(logits, example.y, example.w);
  if (omega == 1.0) return SpanMaxLoss(logits, example.spans);
  return (1.0 - omega) * TokenLoss(logits, example.y, example.w) +
         omega * SpanMaxLoss(logits, example.spans);
}

double AnnealOmega(std::size_t step, std::size_t total_steps) {
  if (total_steps == 0) ThrowUsage("anneal_omega: total_steps must be > 0");
  if (step > total_steps) ThrowUsage("anneal_omega: step past total_steps");
  return static_cast<double>(step) / static_cast<double>(total_steps);
}

const char* RegularizerName(Regularizer r) {
  switch (r) {
    case Regularizer::kNone:
      return "none";
    case Regularizer::kLm:
      return "lm";
    case Regularizer::kKl:
      return "kl";
  }
  return "none";
}

Regularizer ParseRegularizer(const std::string& name) {
  if (name == "none") return Regularizer::kNone;
  if (name == "lm") return Regularizer::kLm;
  if (name == "kl") return Regularizer::kKl;
  ThrowUsage("unknown regularizer \"" + name + "\" (expected none, lm or kl)");
}

double TotalLoss(double probe_loss, double reg_loss, double lambda_reg) {
  if (!(lambda_reg >= 0.0 && lambda_reg <= 1.0)) {
    ThrowUsage("lambda_reg must lie in [0, 1]");
  }
  if (lambda_reg == 0.0) return probe_loss;
  if (lambda_reg == 1.0) return reg_loss;
  return (1.0 - lambda_reg) * probe_loss + lambda_reg * reg_loss;
}

double ProbeTerms::token_term() const {
  return token_count ? token_sum / static_cast<double>(token_count) : 0.0;
}

double ProbeTerms::span_term() const {
  return span_count ? span_sum / static_cast<double>(span_count) : 0.0;
}

double ProbeTerms::Combined(double omega) const {
  if (omega == 0.0) return token_term();
  if (omega == 1.0) return span_term();
  return (1.0 - omega) * token_term() + omega * span_term();
}

void AccumulateProbeTerms(std::span<const double> logits,
                          const ProbeExample& example, double omega,
                          std::size_t token_norm, std::size_t span_norm,
                          ProbeTerms& terms, std::span<double> dlogits) {
  const std::size_t n = example.size();
  if (logits.size() != n) ThrowUsage("probe terms: logits/targets length mismatch");
  const bool want_grad = !dlogits.empty();
  const double tok_scale =
      token_norm ? (1.0 - omega) / static_cast<double>(token_norm) : 0.0;
  const double span_scale =
      span_norm ? omega / static_cast<double>(span_norm) : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    terms.token_sum += example.w[i] * BceFromLogit(example.y[i], logits[i]);
    if (want_grad) {
      dlogits[i] += tok_scale * example.w[i] *
                    (Sigmoid(logits[i]) - static_cast<double>(example.y[i]));
    }
  }
  terms.token_count += n;
  for (const auto& s : example.spans) {
    const std::size_t a = SpanArgmax(logits, s);
    terms.span_sum += BceFromLogit(s.label, logits[a]);
    if (want_grad) {
      dlogits[a] += span_scale * (Sigmoid(logits[a]) - static_cast<double>(s.label));
    }
  }
  terms.span_count += example.spans.size();
}

}  // namespace halluprobe
