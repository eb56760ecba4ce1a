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

// Central finite-difference check of the analytic gradients returned by
// ModelLoss. Shared by the unit tests and the acceptance binary.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "halluprobe/backprop.hpp"
#include "halluprobe/probe.hpp"
#include "halluprobe/refmodel.hpp"

namespace oracle {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // parameter description of the worst entry
};

// |a - n| / max(|a|, |n|, floor). The floor keeps entries whose true
// gradient is zero from dividing roundoff by roundoff.
inline double RelativeError(double analytic, double numeric, double floor = 1e-6) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

// A model with vocabulary 32, random adapters with nonzero B in both blocks,
// a random head on the block-0 stream and a 2-sample batch with spans of both labels.
struct GradCheckSetup {
  halluprobe::ModelParams params;
  halluprobe::AdapterSet adapters;
  halluprobe::ProbeHead head;
  std::vector<halluprobe::ModelExample> batch;
};

inline GradCheckSetup MakeGradCheckSetup(std::uint64_t seed) {
  using namespace halluprobe;
  ModelConfig c;
  c.vocab_size = 32;
  c.d_model = 16;
  c.n_layers = 2;
  c.n_heads = 2;
  c.max_seq_len = 16;
  c.seed = seed;
  GradCheckSetup s;
  s.params = InitModel(c);
  // Larger weights make every path carry a visible gradient.
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> g(0.0, 0.3);
  for (auto& l : s.params.layers) {
    for (Matrix* m : {&l.wq, &l.wk, &l.wv, &l.wo, &l.w_up, &l.w_down}) {
      for (auto& v : m->data) v = g(rng);
    }
  }
  for (auto& v : s.params.unembed.data) v = g(rng);
  LoraOptions lo;
  lo.rank = 2;
  lo.alpha = 4.0;
  // The head reads the stream after block 0. Adapters in block 0 feed both
  // the head and the logits; copies placed in block 1 reach only the logits.
  s.adapters = MakeAdapters(c, 1, lo, seed + 2);
  const auto lower = s.adapters.adapters;
  for (auto a : lower) {
    a.layer = 1;
    s.adapters.adapters.push_back(a);
  }
  for (auto& a : s.adapters.adapters) {
    for (auto& v : a.b.data) v = g(rng);
  }
  s.head = ProbeHead::Zero(16, 1);
  for (auto& v : s.head.w) v = g(rng);
  s.head.b = 0.1;
  std::uniform_int_distribution<int> tok(0, 31);
  for (int e = 0; e < 2; ++e) {
    ModelExample ex;
    const std::size_t prompt = 2 + static_cast<std::size_t>(e);
    const std::size_t comp = 6;
    for (std::size_t i = 0; i < prompt + comp; ++i) ex.seq.tokens.push_back(tok(rng));
    ex.seq.completion_begin = prompt;
    ex.probe.y.assign(comp, 0);
    ex.probe.w.assign(comp, 1.0);
    ex.probe.spans.push_back({1, 2, 1});
    ex.probe.spans.push_back({4, 5, 0});
    for (std::size_t i : {1, 2}) {
      ex.probe.y[i] = 1;
      ex.probe.w[i] = 10.0;
    }
    for (std::size_t i : {4, 5}) ex.probe.w[i] = 10.0;
    s.batch.push_back(std::move(ex));
  }
  return s;
}

// Checks d L_total / d theta for w, b, every A and every B entry.
inline GradCheckResult CheckModelGradients(GradCheckSetup s,
                                           const halluprobe::LossSettings& settings,
                                           double eps = 1e-4) {
  using namespace halluprobe;
  TrainableGradients grads;
  ModelLoss(s.params, s.adapters, s.head, s.batch, settings, &grads);
  GradCheckResult r;
  auto probe = [&](double& param, double analytic, const std::string& what) {
    const double saved = param;
    param = saved + eps;
    const double up = ModelLoss(s.params, s.adapters, s.head, s.batch, settings, nullptr).total;
    param = saved - eps;
    const double down = ModelLoss(s.params, s.adapters, s.head, s.batch, settings, nullptr).total;
    param = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double e = RelativeError(analytic, numeric);
    ++r.checked;
    if (e > r.max_rel_error) {
      r.max_rel_error = e;
      r.worst = what + " analytic=" + std::to_string(analytic) +
                " numeric=" + std::to_string(numeric);
    }
  };
  for (std::size_t i = 0; i < s.head.w.size(); ++i) probe(s.head.w[i], grads.w[i], "w[" + std::to_string(i) + "]");
  probe(s.head.b, grads.b, "b");
  for (std::size_t k = 0; k < s.adapters.adapters.size(); ++k) {
    auto& a = s.adapters.adapters[k];
    const std::string tag = "layer " + std::to_string(a.layer) + " " + AttnMatrixName(a.target);
    for (std::size_t i = 0; i < a.a.data.size(); ++i) {
      probe(a.a.data[i], grads.lora_a[k].data[i], tag + " A[" + std::to_string(i) + "]");
    }
    for (std::size_t i = 0; i < a.b.data.size(); ++i) {
      probe(a.b.data[i], grads.lora_b[k].data[i], tag + " B[" + std::to_string(i) + "]");
    }
  }
  return r;
}

}  // namespace oracle
