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

#include <doctest.h>

#include <cmath>
#include <random>

#include "halluprobe/error.hpp"
#include "halluprobe/refmodel.hpp"
#include "helpers.hpp"

using namespace halluprobe;

namespace {

ModelConfig SmallConfig(int vocab = ByteTokenizer::kVocabSize) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.d_model = 16;
  c.n_layers = 2;
  c.n_heads = 2;
  c.max_seq_len = 32;
  c.seed = 5;
  return c;
}

void Randomize(Matrix& m, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  for (auto& v : m.data) v = g(rng);
}

AdapterSet RandomAdapters(const ModelConfig& c, std::uint64_t seed) {
  auto set = MakeAdapters(c, c.n_layers - 1, LoraOptions{}, seed);
  std::mt19937_64 rng(seed);
  for (auto& a : set.adapters) Randomize(a.b, rng, 0.05);
  return set;
}

// Direct KL with long-double softmax.
long double DirectKl(std::span<const double> p, std::span<const double> q) {
  auto probs = [](std::span<const double> l) {
    long double mx = l[0];
    for (double v : l) mx = std::max<long double>(mx, v);
    long double z = 0;
    for (double v : l) z += std::exp(static_cast<long double>(v) - mx);
    std::vector<long double> out;
    for (double v : l) out.push_back(std::exp(static_cast<long double>(v) - mx) / z);
    return out;
  };
  auto pp = probs(p);
  auto qq = probs(q);
  long double kl = 0;
  for (std::size_t i = 0; i < pp.size(); ++i) kl += pp[i] * std::log(pp[i] / qq[i]);
  return kl;
}

}  // namespace

TEST_SUITE("refmodel") {

TEST_CASE("init is deterministic per seed") {
  auto c = SmallConfig();
  CHECK(InitModel(c) == InitModel(c));
  auto c2 = c;
  c2.seed = 6;
  CHECK_FALSE(InitModel(c) == InitModel(c2));
}

TEST_CASE("invalid dimensions are config errors") {
  ModelConfig c;
  c.d_model = 63;
  c.n_heads = 4;
  try {
    c.Validate();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUsage);
  }
  ModelConfig zero;
  zero.n_layers = 0;
  CHECK_THROWS_AS(zero.Validate(), Error);
  CHECK_THROWS_AS(InitModel(c), Error);
}

TEST_CASE("config JSON round-trips") {
  auto c = SmallConfig();
  c.d_ff = 40;
  CHECK(ModelConfig::FromJson(c.ToJson()) == c);
}

TEST_CASE("init statistics: unit gains and small matrices") {
  ModelConfig c;
  c.seed = 1;
  auto p = InitModel(c);
  for (double g : p.final_norm) CHECK(g == 1.0);
  double sum = 0, sq = 0;
  for (double v : p.tok_emb.data) {
    sum += v;
    sq += v * v;
  }
  const double n = static_cast<double>(p.tok_emb.data.size());
  const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
  CHECK(sd == doctest::Approx(0.02).epsilon(0.05));
}

TEST_CASE("forward on BOS gives finite logits and normalized softmax") {
  auto p = InitModel(SmallConfig());
  std::vector<TokenId> toks = {ByteTokenizer::kBos};
  auto f = Forward(p, nullptr, toks);
  CHECK(f.streams.size() == 3);
  for (double v : f.logits.data) CHECK(std::isfinite(v));
  auto seq = MakeSequence("hello", " world");
  auto g = Forward(p, nullptr, seq.tokens);
  for (std::size_t r = 0; r < g.logits.rows; ++r) {
    auto lp = LogSoftmax(g.logits.row_span(r));
    long double s = 0;
    for (double v : lp) s += std::exp(static_cast<long double>(v));
    CHECK(std::abs(s - 1.0L) <= 1e-6L);
  }
}

TEST_CASE("forward rejects long sequences and unknown ids") {
  auto p = InitModel(SmallConfig());
  std::vector<TokenId> too_long(33, 'a');
  CHECK_THROWS_AS(Forward(p, nullptr, too_long), Error);
  std::vector<TokenId> bad = {ByteTokenizer::kBos, 999};
  CHECK_THROWS_AS(Forward(p, nullptr, bad), Error);
  std::vector<TokenId> neg = {-1};
  CHECK_THROWS_AS(Forward(p, nullptr, neg), Error);
}

TEST_CASE("adapters with B = 0 leave the forward pass bitwise unchanged") {
  auto c = SmallConfig();
  auto p = InitModel(c);
  auto adapters = MakeAdapters(c, 1, LoraOptions{}, 9);
  CHECK(adapters.adapters.size() == 4);
  for (const auto& a : adapters.adapters) {
    CHECK(a.layer == 0);
    for (double v : a.b.data) CHECK(v == 0.0);
  }
  auto seq = MakeSequence("abc", "defgh");
  auto base = Forward(p, nullptr, seq.tokens);
  auto adapted = Forward(p, &adapters, seq.tokens);
  CHECK(base.logits == adapted.logits);
  for (std::size_t l = 0; l < base.streams.size(); ++l) CHECK(base.streams[l] == adapted.streams[l]);
  CHECK(KlToBase(p, adapters, seq) == 0.0);
}

TEST_CASE("adapter delta equals a merged weight update") {
  auto c = SmallConfig();
  auto p = InitModel(c);
  auto adapters = RandomAdapters(c, 4);
  ModelParams merged = p;
  for (const auto& a : adapters.adapters) {
    auto& L = merged.layers[static_cast<std::size_t>(a.layer)];
    Matrix* w = a.target == AttnMatrix::kQ   ? &L.wq
                : a.target == AttnMatrix::kK ? &L.wk
                : a.target == AttnMatrix::kV ? &L.wv
                                             : &L.wo;
    for (std::size_t o = 0; o < w->rows; ++o) {
      for (std::size_t i = 0; i < w->cols; ++i) {
        double acc = 0;
        for (int r = 0; r < a.rank; ++r) acc += a.b.at(o, r) * a.a.at(r, i);
        w->at(o, i) += a.scaling() * acc;
      }
    }
  }
  auto seq = MakeSequence("xy", "zzz top");
  auto f1 = Forward(p, &adapters, seq.tokens);
  auto f2 = Forward(merged, nullptr, seq.tokens);
  for (std::size_t i = 0; i < f1.logits.data.size(); ++i) {
    CHECK(f1.logits.data[i] == doctest::Approx(f2.logits.data[i]).epsilon(1e-9));
  }
}

TEST_CASE("property: causal masking") {
  auto c = SmallConfig();
  auto p = InitModel(c);
  auto adapters = RandomAdapters(c, 2);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<TokenId> toks;
    const std::size_t n = 3 + rng() % 10;
    for (std::size_t i = 0; i < n; ++i) toks.push_back(static_cast<TokenId>(rng() % 256));
    const std::size_t i = rng() % (n - 1);
    auto f1 = Forward(p, &adapters, toks);
    toks[i + 1] = static_cast<TokenId>((toks[i + 1] + 1) % 256);
    auto f2 = Forward(p, &adapters, toks);
    for (std::size_t r = 0; r <= i; ++r) {
      for (std::size_t v = 0; v < f1.logits.cols; ++v) CHECK(f1.logits.at(r, v) == f2.logits.at(r, v));
    }
  }
}

TEST_CASE("KL helpers against closed forms") {
  // p = (1,2,1,1)/5 against uniform q.
  std::vector<double> pl = {0.0, std::log(2.0), 0.0, 0.0};
  std::vector<double> ql = {1.0, 1.0, 1.0, 1.0};
  const double expected = 0.6 * std::log(0.8) + 0.4 * std::log(1.6);
  CHECK(std::abs(KlFromLogits(pl, ql) - expected) <= 1e-12);
  CHECK(KlFromLogits(pl, pl) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("3-token vocab-4 KL matches direct summation") {
  auto c = SmallConfig(4);
  auto p = InitModel(c);
  auto adapters = RandomAdapters(c, 8);
  Sequence seq;
  seq.tokens = {0, 1, 2, 3};
  seq.completion_begin = 1;
  auto a = Forward(p, &adapters, seq.tokens);
  auto b = Forward(p, nullptr, seq.tokens);
  long double total = 0;
  for (std::size_t pos = 0; pos < 3; ++pos) total += DirectKl(a.logits.row_span(pos), b.logits.row_span(pos));
  const long double expected = total / 3;
  CHECK(expected > 0);
  CHECK(std::abs(static_cast<long double>(KlToBase(p, adapters, seq)) - expected) <= 1e-12L);
}

TEST_CASE("property: KL is non-negative for random adapters") {
  auto c = SmallConfig();
  auto p = InitModel(c);
  for (std::uint64_t s = 0; s < 8; ++s) {
    auto adapters = RandomAdapters(c, s);
    CHECK(KlToBase(p, adapters, MakeSequence("q", "some answer")) >= 0.0);
  }
}

TEST_CASE("greedy and seeded generation are deterministic") {
  auto p = InitModel(SmallConfig());
  auto prompt = ByteTokenizer{}.EncodeIds("hi");
  prompt.insert(prompt.begin(), ByteTokenizer::kBos);
  GenerateOptions g;
  g.max_new_tokens = 6;
  auto a = Generate(p, nullptr, prompt, g);
  auto b = Generate(p, nullptr, prompt, g);
  CHECK(a.tokens == b.tokens);
  CHECK(a.tokens.size() <= 6);
  g.temperature = 1.0;
  g.seed = 42;
  auto c1 = Generate(p, nullptr, prompt, g);
  auto c2 = Generate(p, nullptr, prompt, g);
  CHECK(c1.tokens == c2.tokens);
}

TEST_CASE("generation halts at max_new or when the observer stops") {
  auto p = InitModel(SmallConfig());
  std::vector<TokenId> prompt = {ByteTokenizer::kBos};
  GenerateOptions g;
  g.max_new_tokens = 4;
  g.stop_at_eos = false;
  auto r = Generate(p, nullptr, prompt, g);
  CHECK(r.tokens.size() == 4);
  CHECK(r.finish == FinishReason::kMaxNewTokens);
  std::size_t seen = 0;
  auto stopped = Generate(p, nullptr, prompt, g, [&](std::size_t i, TokenId, std::span<const double> h) {
    ++seen;
    CHECK(h.size() == 16);
    return i < 1;
  });
  CHECK(seen == 2);
  CHECK(stopped.finish == FinishReason::kStopped);
}

TEST_CASE("emitted tokens never include EOS") {
  auto p = InitModel(SmallConfig());
  std::vector<TokenId> prompt = {ByteTokenizer::kBos};
  GenerateOptions g;
  g.temperature = 2.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    g.seed = seed;
    auto r = Generate(p, nullptr, prompt, g);
    for (TokenId t : r.tokens) CHECK(t != ByteTokenizer::kEos);
    if (r.finish == FinishReason::kEos) CHECK(r.tokens.size() < g.max_new_tokens);
  }
}

TEST_CASE("checkpoint round-trips") {
  testing::TempDir dir;
  auto p = InitModel(SmallConfig());
  SaveModel(p, dir / "m.bin");
  CHECK(LoadModel(dir / "m.bin") == p);
  std::filesystem::resize_file(dir / "m.bin", 100);
  CHECK_THROWS_AS(LoadModel(dir / "m.bin"), Error);
}

}  // TEST_SUITE
