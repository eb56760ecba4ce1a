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

#include <benchmark/benchmark.h>

#include "halluprobe/backprop.hpp"
#include "halluprobe/refmodel.hpp"
#include "halluprobe/toy.hpp"

namespace {

using namespace halluprobe;

ModelParams BenchModel(int d_model, int layers) {
  ModelConfig c;
  c.d_model = d_model;
  c.n_layers = layers;
  c.n_heads = 4;
  c.seed = 1;
  return InitModel(c);
}

std::vector<ModelExample> BenchBatch(std::size_t n) {
  ToyCorpusOptions o;
  o.samples = n;
  o.seed = 3;
  std::vector<ModelExample> out;
  for (const auto& s : MakeToyCorpus(o)) out.push_back(MakeModelExample(s, 10.0));
  return out;
}

void BM_Forward(benchmark::State& state) {
  auto params = BenchModel(static_cast<int>(state.range(0)), 4);
  auto batch = BenchBatch(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Forward(params, nullptr, batch[0].seq.tokens));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch[0].seq.tokens.size()));
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(64)->Arg(128);

void BM_LoraStep(benchmark::State& state) {
  auto params = BenchModel(64, 4);
  const int layer = 3;
  auto adapters = MakeAdapters(params.config, layer, LoraOptions{}, 2);
  auto head = ProbeHead::Zero(64, layer);
  auto batch = BenchBatch(static_cast<std::size_t>(state.range(0)));
  const LossSettings settings{1.0, 0.1, static_cast<Regularizer>(state.range(1))};
  TrainableGradients grads;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ModelLoss(params, adapters, head, batch, settings, &grads));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LoraStep)
    ->Args({1, static_cast<int>(Regularizer::kLm)})
    ->Args({8, static_cast<int>(Regularizer::kLm)})
    ->Args({8, static_cast<int>(Regularizer::kKl)})
    ->Unit(benchmark::kMillisecond);

}  // namespace
