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
#include <span>
#include <string>
#include <vector>

#include "halluprobe/corpus.hpp"
#include "halluprobe/refmodel.hpp"

namespace halluprobe {

// Linear value head: p_i = sigmoid(w . h_i + b) on the layer-`layer` stream.
struct ProbeHead {
  std::vector<double> w;
  double b = 0.0;
  int layer = 0;

  static ProbeHead Zero(std::size_t d, int layer) {
    return ProbeHead{std::vector<double>(d, 0.0), 0.0, layer};
  }

  bool operator==(const ProbeHead&) const = default;
};

double Sigmoid(double z);

// Binary cross-entropy evaluated on the logit:
// max(z, 0) - y z + log1p(exp(-|z|)). Finite for any finite z.
double BceFromLogit(int y, double z);

// Head logits / probabilities for each row of `hidden` (n x d).
std::vector<double> HeadLogits(const Matrix& hidden, const ProbeHead& head);
std::vector<double> HeadScores(const Matrix& hidden, const ProbeHead& head);

// Inclusive token range within the completion.
struct SpanTarget {
  std::size_t start = 0;
  std::size_t end = 0;
  int label = 0;
};

struct ProbeExample {
  std::vector<std::uint8_t> y;
  std::vector<double> w;
  std::vector<SpanTarget> spans;

  std::size_t size() const { return y.size(); }
};

ProbeExample MakeProbeExample(const LabeledSample& sample, double alpha);

// sum_i w_i BCE(y_i, p_i)
double TokenLoss(std::span<const double> logits, std::span<const std::uint8_t> y,
                 std::span<const double> w);

// Index of the largest logit in [start, end], first index on ties.
std::size_t SpanArgmax(std::span<const double> logits, const SpanTarget& span);

// sum_s BCE(y_s, max_{i in s} p_i). Throws on an empty or out-of-range span.
double SpanMaxLoss(std::span<const double> logits,
                   std::span<const SpanTarget> spans);

// (1 - omega) * TokenLoss + omega * SpanMaxLoss on raw sums.
double ProbeLoss(std::span<const double> logits, const ProbeExample& example,
                 double omega);

// Linear ramp step / total_steps.
double AnnealOmega(std::size_t step, std::size_t total_steps);

enum class Regularizer { kNone, kLm, kKl };
const char* RegularizerName(Regularizer r);
Regularizer ParseRegularizer(const std::string& name);

// (1 - lambda) * probe + lambda * reg. lambda must lie in [0, 1].
double TotalLoss(double probe_loss, double reg_loss, double lambda_reg);

// Raw sums accumulated over a batch. The training objective divides the
// token sum by the batch token count and the span sum by the span count so
// that omega trades off terms of comparable scale.
struct ProbeTerms {
  double token_sum = 0.0;
  double span_sum = 0.0;
  std::size_t token_count = 0;
  std::size_t span_count = 0;

  double token_term() const;
  double span_term() const;
  double Combined(double omega) const;
};

// Adds one example's contributions. When dlogits is non-empty it receives
// d(Combined)/d(logit_i) using the given normalizers.
void AccumulateProbeTerms(std::span<const double> logits,
                          const ProbeExample& example, double omega,
                          std::size_t token_norm, std::size_t span_norm,
                          ProbeTerms& terms, std::span<double> dlogits);

}  // namespace halluprobe
