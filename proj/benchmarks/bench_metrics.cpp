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

#include <random>

#include "halluprobe/evalproto.hpp"

namespace {

using namespace halluprobe;

void MakeScores(std::size_t n, std::vector<double>& scores, std::vector<int>& labels) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  scores.resize(n);
  labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(i % 2);
    scores[i] = g(rng) + labels[i];
  }
}

void BM_Auc(benchmark::State& state) {
  std::vector<double> s;
  std::vector<int> y;
  MakeScores(static_cast<std::size_t>(state.range(0)), s, y);
  for (auto _ : state) benchmark::DoNotOptimize(Auc(Roc(s, y)));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Auc)->RangeMultiplier(10)->Range(100, 1000000)->Complexity(benchmark::oNLogN);

void BM_RecallAtFpr(benchmark::State& state) {
  std::vector<double> s;
  std::vector<int> y;
  MakeScores(static_cast<std::size_t>(state.range(0)), s, y);
  for (auto _ : state) benchmark::DoNotOptimize(RecallAtFpr(s, y, 0.1));
}
BENCHMARK(BM_RecallAtFpr)->RangeMultiplier(10)->Range(100, 1000000);

}  // namespace
