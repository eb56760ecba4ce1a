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
#include <cstring>
#include <fstream>
#include <random>

#include "halluprobe/error.hpp"
#include "halluprobe/refmodel.hpp"
#include "halluprobe/trace.hpp"
#include "helpers.hpp"

using namespace halluprobe;

namespace {

ActivationTrace RandomTrace(std::uint32_t n, std::uint32_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  ActivationTrace t;
  t.sample_id = "s/1 é";
  t.layer = 3;
  t.d = d;
  t.n = n;
  for (std::size_t i = 0; i < std::size_t{n} * d; ++i) t.hidden.push_back(g(rng));
  for (std::uint32_t i = 0; i < n; ++i) {
    t.chosen_logprob.push_back(-u(rng));
    t.next_token_entropy.push_back(u(rng));
  }
  return t;
}

ModelParams SmallModel(int layers = 2, int vocab = ByteTokenizer::kVocabSize) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.d_model = 16;
  c.n_layers = layers;
  c.n_heads = 2;
  c.max_seq_len = 64;
  c.seed = 11;
  return InitModel(c);
}

}  // namespace

TEST_SUITE("trace") {

TEST_CASE("random 7x16 trace round-trips bit-exactly") {
  testing::TempDir dir;
  auto t = RandomTrace(7, 16, 1);
  const auto path = dir / TraceFileName(t.sample_id);
  WriteTrace(t, path);
  auto back = ReadTrace(path);
  CHECK(back.sample_id == t.sample_id);
  REQUIRE(back.hidden.size() == t.hidden.size());
  CHECK(std::memcmp(back.hidden.data(), t.hidden.data(), t.hidden.size() * sizeof(float)) == 0);
  CHECK(std::memcmp(back.chosen_logprob.data(), t.chosen_logprob.data(), 7 * sizeof(double)) == 0);
  CHECK(back == t);
}

TEST_CASE("property: round-trip for many shapes") {
  testing::TempDir dir;
  for (std::uint32_t n : {0u, 1u, 5u}) {
    for (std::uint32_t d : {1u, 8u}) {
      auto t = RandomTrace(n, d, n * 31 + d);
      t.sample_id = "x";
      WriteTrace(t, dir / "x.htrc");
      CHECK(ReadTrace(dir / "x.htrc") == t);
    }
  }
}

TEST_CASE("wrong magic is rejected") {
  testing::TempDir dir;
  {
    std::ofstream out(dir / "bad.htrc", std::ios::binary);
    out << "NOPE0000000000000000";
  }
  CHECK_THROWS_AS(ReadTrace(dir / "bad.htrc"), Error);
}

TEST_CASE("truncated payload is rejected") {
  testing::TempDir dir;
  auto t = RandomTrace(3, 4, 2);
  WriteTrace(t, dir / "t.htrc");
  std::filesystem::resize_file(dir / "t.htrc", std::filesystem::file_size(dir / "t.htrc") - 3);
  CHECK_THROWS_AS(ReadTrace(dir / "t.htrc"), Error);
}

TEST_CASE("negative entropy fails validation on read") {
  testing::TempDir dir;
  auto t = RandomTrace(3, 4, 2);
  t.next_token_entropy[1] = -0.1;
  WriteTrace(t, dir / "t.htrc");
  try {
    ReadTrace(dir / "t.htrc");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kData);
    CHECK(std::string(e.what()).find("entropy") != std::string::npos);
  }
}

TEST_CASE("non-finite values are refused on write") {
  testing::TempDir dir;
  auto t = RandomTrace(2, 2, 3);
  t.hidden[0] = std::nanf("");
  CHECK_THROWS_AS(WriteTrace(t, dir / "t.htrc"), Error);
}

TEST_CASE("trace file names encode ids reversibly") {
  for (std::string id : {"toy-0001", "a/b", "weird id %", "caf\xc3\xa9"}) {
    const auto name = TraceFileName(id);
    CHECK(name.find('/') == std::string::npos);
    CHECK(SampleIdFromTraceFile(name) == id);
  }
}

TEST_CASE("default probe layer") {
  CHECK(DefaultProbeLayer(80) == 76);
  CHECK(DefaultProbeLayer(2) == 1);
  CHECK(DefaultProbeLayer(4) == 3);
}

TEST_CASE("entropy of a one-hot distribution is zero") {
  std::vector<double> logits = {0.0, -2000.0, -2000.0, -2000.0};
  CHECK(EntropyFromLogits(logits) == 0.0);
}

TEST_CASE("export matches the forward pass and a direct entropy oracle") {
  auto params = SmallModel();
  auto seq = MakeSequence("Q: hi", " born in 2002");
  auto t = ExportTrace(params, nullptr, seq, 1, "s");
  REQUIRE(t.n == seq.completion_length());
  auto fwd = Forward(params, nullptr, seq.tokens);
  for (std::size_t i = 0; i < t.n; ++i) {
    const std::size_t pos = seq.completion_begin + i;
    for (std::size_t j = 0; j < t.d; ++j) {
      CHECK(t.hidden[i * t.d + j] == static_cast<float>(fwd.streams[1].at(pos, j)));
    }
    // Direct summation in long double.
    const auto row = fwd.logits.row_span(pos - 1);
    long double mx = row[0];
    for (double v : row) mx = std::max<long double>(mx, v);
    long double z = 0;
    for (double v : row) z += std::exp(static_cast<long double>(v) - mx);
    long double h = 0;
    for (double v : row) {
      const long double p = std::exp(static_cast<long double>(v) - mx) / z;
      if (p > 0) h -= p * std::log(p);
    }
    CHECK(std::abs(static_cast<long double>(t.next_token_entropy[i]) - h) <= 1e-10L);
    const long double lp =
        static_cast<long double>(row[static_cast<std::size_t>(seq.tokens[pos])]) - mx - std::log(z);
    CHECK(std::abs(static_cast<long double>(t.chosen_logprob[i]) - lp) <= 1e-10L);
  }
  t.Validate();
}

TEST_CASE("export rejects an out-of-range layer") {
  auto params = SmallModel();
  auto seq = MakeSequence("p", "c");
  try {
    ExportTrace(params, nullptr, seq, 2, "s");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUsage);
  }
  CHECK_THROWS_AS(ExportTrace(params, nullptr, seq, -1, "s"), Error);
}

}  // TEST_SUITE
