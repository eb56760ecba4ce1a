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

#include <span>
#include <vector>

#include "halluprobe/probe.hpp"
#include "halluprobe/refmodel.hpp"

namespace halluprobe {

// A sample prepared for end-to-end training through the reference model.
struct ModelExample {
  Sequence seq;
  ProbeExample probe;  // indexed by completion token
};

ModelExample MakeModelExample(const LabeledSample& sample, double alpha);

// A sample prepared for head-only training on exported hidden states.
struct TraceExample {
  Matrix hidden;  // completion tokens x d
  ProbeExample probe;
};

struct LossSettings {
  double omega = 0.0;
  double lambda_reg = 0.0;
  Regularizer regularizer = Regularizer::kNone;
};

struct LossBreakdown {
  double token_term = 0.0;
  double span_term = 0.0;
  double probe = 0.0;
  double reg = 0.0;  // 0 when no regularizer is configured
  double total = 0.0;
};

// Gradients of the total loss for the trainable parameters only: the head
// and, when present, every adapter's A and B (same order as AdapterSet).
struct TrainableGradients {
  std::vector<double> w;
  double b = 0.0;
  std::vector<Matrix> lora_a;
  std::vector<Matrix> lora_b;
};

// L_total = (1 - lambda) L_probe + lambda L_reg over a batch, where L_reg is
// the mean next-token cross-entropy (lm) or the mean KL(adapted || base) (kl)
// over completion positions. Base parameters stay frozen. When `grads` is
// non-null it is overwritten with exact gradients; the span-max term routes
// its subgradient through the first argmax token of each span.
LossBreakdown ModelLoss(const ModelParams& params, const AdapterSet& adapters,
                        const ProbeHead& head,
                        std::span<const ModelExample> batch,
                        const LossSettings& settings,
                        TrainableGradients* grads);

// Head-only objective on stored hidden states (linear probe, lambda = 0).
LossBreakdown HeadLoss(const ProbeHead& head, std::span<const TraceExample> batch,
                       double omega, TrainableGradients* grads);

}  // namespace halluprobe
