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

#include <algorithm>
#include <cmath>
#include <random>

#include "halluprobe/baselines.hpp"
#include "halluprobe/error.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace halluprobe;

namespace {

class FailingOracle : public EntailmentOracle {
 protected:
  bool Judge(const std::string& u, const std::string& v) override {
    if (u == "boom" || v == "boom") throw std::runtime_error("judge down");
    return u == v;
  }
};

// Counts how often each unordered pair reaches Judge.
class CountingOracle : public EntailmentOracle {
 public:
  std::map<std::pair<std::string, std::string>, int> seen;

 protected:
  bool Judge(const std::string& u, const std::string& v) override {
    ++seen[std::minmax(u, v)];
    return u == v;
  }
};

ContinuationGenerator Constant(std::string text) {
  return [text](const std::string&, const std::string&, std::size_t, std::size_t) { return text; };
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("token entropy examples") {
  std::vector<double> uniform(4, 0.25);
  CHECK(TokenEntropy(uniform) == doctest::Approx(1.386294).epsilon(1e-6));
  std::vector<double> onehot = {0.0, 1.0, 0.0};
  CHECK(TokenEntropy(onehot) == 0.0);
  std::vector<double> mix = {0.5, 0.25, 0.25};
  CHECK(TokenEntropy(mix) == doctest::Approx(1.039721).epsilon(1e-6));
  CHECK(std::abs(TokenEntropy(mix) - 1.5 * std::log(2.0)) <= 1e-12);
  std::vector<double> negative = {1.5, -0.5};
  CHECK_THROWS_AS(TokenEntropy(negative), Error);
  std::vector<double> unnormalized = {0.5, 0.4};
  CHECK_THROWS_AS(TokenEntropy(unnormalized), Error);
}

TEST_CASE("token perplexity examples") {
  CHECK(TokenPerplexity(0.0) == 1.0);
  CHECK(TokenPerplexity(-1.0) == doctest::Approx(2.718282).epsilon(1e-6));
  CHECK(std::max(TokenPerplexity(-0.1), TokenPerplexity(-2.0)) == std::exp(2.0));
  CHECK_THROWS_AS(TokenPerplexity(0.5), Error);
}

TEST_CASE("property: entropy and perplexity match direct summation") {
  std::mt19937_64 rng(8);
  std::gamma_distribution<double> gam(0.5, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> p(2 + rng() % 300);
    double s = 0;
    for (auto& x : p) s += (x = gam(rng));
    for (auto& x : p) x /= s;
    CHECK(std::abs(TokenEntropy(p) - oracle::DirectEntropy(p)) <= 1e-10);
    const double lp = -gam(rng) * 3;
    CHECK(std::abs(TokenPerplexity(lp) - static_cast<double>(std::exp(-static_cast<long double>(lp)))) <=
          1e-10 * TokenPerplexity(lp));
  }
}

TEST_CASE("trace scores read per-token fields") {
  ActivationTrace t;
  t.n = 2;
  t.d = 1;
  t.hidden = {0.f, 0.f};
  t.chosen_logprob = {-1.0, 0.0};
  t.next_token_entropy = {0.3, 0.0};
  CHECK(EntropyScores(t) == std::vector<double>{0.3, 0.0});
  CHECK(PerplexityScores(t) == std::vector<double>{std::exp(1.0), 1.0});
}

TEST_CASE("clustering examples under the exact-match judge") {
  ExactMatchOracle o;
  std::vector<std::string> same(5, "Paris");
  auto c1 = ClusterByEntailment(same, o);
  CHECK(c1.sizes == std::vector<std::size_t>{5});
  CHECK(SemanticEntropy(c1) == 0.0);
  std::vector<std::string> distinct = {"a", "b", "c", "d"};
  auto c2 = ClusterByEntailment(distinct, o);
  CHECK(c2.sizes.size() == 4);
  CHECK(SemanticEntropy(c2) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  std::vector<std::string> aab = {"a", "a", "b"};
  auto c3 = ClusterByEntailment(aab, o);
  CHECK(c3.sizes == std::vector<std::size_t>{2, 1});
  CHECK(c3.assignment == std::vector<std::size_t>{0, 0, 1});
}

TEST_CASE("semantic entropy examples") {
  SemanticClustering two{10, {}, {5, 5}};
  CHECK(SemanticEntropy(two) == doctest::Approx(0.693147).epsilon(1e-6));
  SemanticClustering three{10, {}, {6, 3, 1}};
  CHECK(std::abs(SemanticEntropy(three) - 0.897946) <= 1e-6);
  CHECK(std::abs(SemanticEntropy(three) - oracle::ClusterEntropy({6, 3, 1})) <= 1e-12);
  auto p = three.probabilities();
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0));
}

TEST_CASE("normalized judge folds case, spaces and punctuation") {
  CHECK(NormalizedMatchOracle::Normalize("  The  Eiffel Tower. ") == "the eiffel tower");
  NormalizedMatchOracle o;
  std::vector<std::string> s = {"Paris", "paris!", "  PARIS", "Lyon"};
  CHECK(ClusterByEntailment(s, o).sizes == std::vector<std::size_t>{3, 1});
}

TEST_CASE("property: clustering is order-invariant and calls stay within C(k,2)") {
  std::mt19937_64 rng(12);
  const std::vector<std::string> vocab = {"a", "b", "c", "A", "a.", "d"};
  for (int t = 0; t < 100; ++t) {
    std::vector<std::string> s(1 + rng() % 12);
    for (auto& x : s) x = vocab[rng() % vocab.size()];
    CountingOracle o;
    auto c = ClusterByEntailment(s, o);
    const std::size_t k = s.size();
    CHECK(o.calls() <= k * (k - 1) / 2);
    for (const auto& [pair, n] : o.seen) CHECK(n == 1);
    std::size_t total = 0;
    for (auto z : c.sizes) total += z;
    CHECK(total == k);
    const double h = SemanticEntropy(c);
    CHECK(h >= 0.0);
    CHECK(h <= std::log(static_cast<double>(k)) + 1e-12);

    auto shuffled = s;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    NormalizedMatchOracle n1, n2;
    auto a = ClusterByEntailment(s, n1).sizes;
    auto b = ClusterByEntailment(shuffled, n2).sizes;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }
}

TEST_CASE("judge failures name the pair") {
  FailingOracle o;
  std::vector<std::string> s = {"x", "y", "boom"};
  try {
    ClusterByEntailment(s, o);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("boom") != std::string::npos);
  }
}

TEST_CASE("answer extractor") {
  CHECK(RegexAnswerExtractor("so \\boxed{12} then \\boxed{42}") == "42");
  CHECK(RegexAnswerExtractor("we get 3 then 7.5 apples") == "7.5");
  CHECK(RegexAnswerExtractor("  Paris  ") == "paris");
}

TEST_CASE("span semantic entropy with mock generators") {
  auto s = testing::MakeSample("a", "Q", "He was born in 1952.", {{"1952", VerificationLabel::kSupported}});
  const auto& span = s.spans[0];
  CHECK(ContinuationCap(span, 4) == 8);
  ExactMatchOracle o1;
  CHECK(SpanSemanticEntropy(s, span, Constant("1952"), o1) == 0.0);
  std::vector<std::string> seen_prefix;
  auto distinct = [&](const std::string&, const std::string& prefix, std::size_t cap, std::size_t i) {
    seen_prefix.push_back(prefix);
    CHECK(cap == 8);
    return "v" + std::to_string(i);
  };
  ExactMatchOracle o2;
  CHECK(SpanSemanticEntropy(s, span, distinct, o2) == doctest::Approx(std::log(10.0)).epsilon(1e-14));
  CHECK(seen_prefix.size() == 10);
  CHECK(seen_prefix[0] == "He was born in ");
}

TEST_CASE("model-sampled span entropy is reproducible") {
  ModelConfig c;
  c.d_model = 16;
  c.n_layers = 2;
  c.n_heads = 2;
  c.max_seq_len = 64;
  auto params = InitModel(c);
  auto s = testing::MakeSample("a", "Q", "born in 1952", {{"1952", VerificationLabel::kSupported}});
  auto gen = MakeModelGenerator(params, nullptr, 1.0, 5);
  ExactMatchOracle o1, o2;
  const double h1 = SpanSemanticEntropy(s, s.spans[0], gen, o1);
  const double h2 = SpanSemanticEntropy(s, s.spans[0], MakeModelGenerator(params, nullptr, 1.0, 5), o2);
  CHECK(h1 == h2);
  CHECK(h1 >= 0.0);
  CHECK(h1 <= std::log(10.0) + 1e-12);
  auto greedy = MakeModelGenerator(params, nullptr, 0.0, 5);
  ExactMatchOracle o3;
  CHECK(SpanSemanticEntropy(s, s.spans[0], greedy, o3) == 0.0);
}

}  // TEST_SUITE
