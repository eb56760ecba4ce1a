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
#include "halluprobe/probe.hpp"
#include "halluprobe/train.hpp"
#include "helpers.hpp"

using namespace halluprobe;

namespace {

double Logit(double p) { return std::log(p / (1.0 - p)); }

// Naive BCE from a probability in long double.
double DirectBce(int y, double p) {
  const long double lp = p;
  return static_cast<double>(y == 1 ? -std::log(lp) : -std::log(1.0L - lp));
}

}  // namespace

TEST_SUITE("objective") {

TEST_CASE("zero head scores one half everywhere") {
  Matrix h(3, 4);
  for (auto& v : h.data) v = 1.7;
  auto p = HeadScores(h, ProbeHead::Zero(4, 0));
  for (double v : p) CHECK(v == 0.5);
}

TEST_CASE("large logits saturate without overflow") {
  CHECK(std::abs(Sigmoid(30.0) - 1.0) <= 1e-9);
  CHECK(Sigmoid(-800.0) >= 0.0);
  CHECK(Sigmoid(800.0) == 1.0);
  CHECK(std::isfinite(BceFromLogit(1, -1e4)));
  CHECK(BceFromLogit(1, -1e4) == doctest::Approx(1e4));
}

TEST_CASE("head scores are monotone in w.h") {
  ProbeHead head{{1.0, -2.0}, 0.3, 0};
  Matrix h(50, 2);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (auto& v : h.data) v = g(rng);
  auto z = HeadLogits(h, head);
  auto p = HeadScores(h, head);
  for (std::size_t i = 0; i < 50; ++i) {
    for (std::size_t j = 0; j < 50; ++j) {
      if (z[i] < z[j]) CHECK(p[i] <= p[j]);
    }
  }
  Matrix wrong(2, 3);
  CHECK_THROWS_AS(HeadScores(wrong, head), Error);
}

TEST_CASE("token loss examples") {
  std::vector<double> z = {0.0};
  std::vector<std::uint8_t> y = {0};
  std::vector<double> w = {1.0};
  CHECK(TokenLoss(z, y, w) == doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(std::abs(TokenLoss(z, y, w) - std::log(2.0)) <= 1e-15);

  std::vector<double> fit = {30.0, -30.0, 30.0};
  std::vector<std::uint8_t> fy = {1, 0, 1};
  std::vector<double> fw = {1.0, 1.0, 1.0};
  CHECK(TokenLoss(fit, fy, fw) <= 1e-9 * 3);

  std::vector<double> z2 = {0.4, 0.4};
  std::vector<std::uint8_t> y2 = {1, 1};
  std::vector<double> w2 = {10.0, 1.0};
  const double entity = TokenLoss(std::span(z2).first(1), std::span(y2).first(1), std::span(w2).first(1));
  const double background = TokenLoss(std::span(z2).last(1), std::span(y2).last(1), std::span(w2).last(1));
  CHECK(entity == doctest::Approx(10.0 * background));
}

TEST_CASE("span-max loss examples") {
  std::vector<double> z = {Logit(0.1), Logit(0.9)};
  std::vector<SpanTarget> pos = {{0, 1, 1}};
  std::vector<SpanTarget> neg = {{0, 1, 0}};
  CHECK(SpanMaxLoss(z, pos) == doctest::Approx(0.10536).epsilon(1e-5));
  CHECK(std::abs(SpanMaxLoss(z, pos) + std::log(0.9)) <= 1e-12);
  CHECK(SpanMaxLoss(z, neg) == doctest::Approx(2.302585).epsilon(1e-6));
  std::vector<SpanTarget> single = {{1, 1, 1}};
  std::vector<std::uint8_t> y = {1};
  std::vector<double> w = {1.0};
  CHECK(SpanMaxLoss(z, single) == TokenLoss(std::span(z).last(1), y, w));
  std::vector<SpanTarget> empty = {{1, 0, 1}};
  CHECK_THROWS_AS(SpanMaxLoss(z, empty), Error);
  std::vector<SpanTarget> outside = {{1, 5, 1}};
  CHECK_THROWS_AS(SpanMaxLoss(z, outside), Error);
}

TEST_CASE("span argmax breaks ties at the first index") {
  std::vector<double> z = {0.5, 2.0, 2.0, 1.0};
  CHECK(SpanArgmax(z, {0, 3, 1}) == 1);
  CHECK(SpanArgmax(z, {2, 3, 1}) == 2);
}

TEST_CASE("probe loss endpoints and midpoint") {
  auto s = testing::MakeSample("a", "", "abcdef", {{"cd", VerificationLabel::kNotSupported}});
  auto ex = MakeProbeExample(s, 10.0);
  std::vector<double> z = {-1.0, 0.2, 0.7, -0.3, 2.0, -2.0};
  const double tok = TokenLoss(z, ex.y, ex.w);
  const double span = SpanMaxLoss(z, ex.spans);
  CHECK(ProbeLoss(z, ex, 0.0) == tok);
  CHECK(ProbeLoss(z, ex, 1.0) == span);
  CHECK(ProbeLoss(z, ex, 0.5) == doctest::Approx(0.5 * (tok + span)).epsilon(1e-14));
  // Continuity in omega.
  double prev = ProbeLoss(z, ex, 0.0);
  for (int k = 1; k <= 100; ++k) {
    const double cur = ProbeLoss(z, ex, k / 100.0);
    CHECK(std::abs(cur - prev) <= std::abs(span - tok) / 100.0 + 1e-12);
    prev = cur;
  }
}

TEST_CASE("omega annealing") {
  CHECK(AnnealOmega(0, 10) == 0.0);
  CHECK(AnnealOmega(10, 10) == 1.0);
  CHECK(AnnealOmega(5, 10) == 0.5);
  CHECK_THROWS_AS(AnnealOmega(0, 0), Error);
  CHECK_THROWS_AS(AnnealOmega(11, 10), Error);
  // Training ramp: first step 0, last step 1.
  CHECK(OmegaAtStep(0, 5) == 0.0);
  CHECK(OmegaAtStep(4, 5) == 1.0);
  CHECK(OmegaAtStep(2, 5) == 0.5);
}

TEST_CASE("total loss endpoints are exact") {
  const double probe = 0.8123456789;
  const double reg = 3.14159;
  CHECK(TotalLoss(probe, reg, 0.0) == probe);
  CHECK(TotalLoss(probe, reg, 1.0) == reg);
  CHECK(TotalLoss(probe, reg, 0.5) == doctest::Approx(0.5 * (probe + reg)));
  CHECK_THROWS_AS(TotalLoss(probe, reg, 1.5), Error);
  CHECK_THROWS_AS(TotalLoss(probe, reg, -0.1), Error);
}

TEST_CASE("regularizer on a linear probe is a usage error") {
  TrainConfig c;
  c.lambda_reg = 0.5;
  c.regularizer = Regularizer::kKl;
  try {
    ValidateTrainConfig(c);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUsage);
  }
  c.use_lora = true;
  CHECK_NOTHROW(ValidateTrainConfig(c));
  c.regularizer = Regularizer::kNone;
  CHECK_THROWS_AS(ValidateTrainConfig(c), Error);
  c.lambda_reg = 0.0;
  CHECK_NOTHROW(ValidateTrainConfig(c));
}

TEST_CASE("property: losses are non-negative and finite over a wide logit range") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1e4, 1e4);
  for (int t = 0; t < 2000; ++t) {
    const double z = u(rng);
    for (int y : {0, 1}) {
      const double l = BceFromLogit(y, z);
      CHECK(std::isfinite(l));
      CHECK(l >= 0.0);
    }
  }
  // Agreement with the naive probability form where that form is accurate.
  std::uniform_real_distribution<double> mid(-8, 8);
  for (int t = 0; t < 200; ++t) {
    const double z = mid(rng);
    const double p = 1.0 / (1.0 + std::exp(-z));
    CHECK(BceFromLogit(1, z) == doctest::Approx(DirectBce(1, p)).epsilon(1e-9));
    CHECK(BceFromLogit(0, z) == doctest::Approx(DirectBce(0, p)).epsilon(1e-9));
  }
}

TEST_CASE("span-max gradient reaches only each span's argmax token") {
  auto s = testing::MakeSample("a", "", "abcdefgh",
                               {{"bcd", VerificationLabel::kNotSupported},
                                {"fg", VerificationLabel::kSupported}});
  auto ex = MakeProbeExample(s, 10.0);
  std::vector<double> z = {0.1, -0.5, 1.5, 0.2, 0.0, 0.3, -0.1, 0.0};
  ProbeTerms terms;
  std::vector<double> dz(z.size(), 0.0);
  AccumulateProbeTerms(z, ex, 1.0, z.size(), ex.spans.size(), terms, dz);
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (i == 2 || i == 5) CHECK(dz[i] != 0.0);
    else CHECK(dz[i] == 0.0);
  }
  // Lowering any non-argmax logit leaves the span term unchanged.
  auto z2 = z;
  z2[1] -= 1.0;
  z2[3] -= 1.0;
  z2[6] -= 1.0;
  CHECK(SpanMaxLoss(z2, ex.spans) == SpanMaxLoss(z, ex.spans));
}

TEST_CASE("normalized probe terms") {
  auto s = testing::MakeSample("a", "", "abcd", {{"bc", VerificationLabel::kNotSupported}});
  auto ex = MakeProbeExample(s, 10.0);
  std::vector<double> z = {0.0, 0.5, -0.5, 1.0};
  ProbeTerms terms;
  AccumulateProbeTerms(z, ex, 0.3, 4, 1, terms, {});
  CHECK(terms.token_count == 4);
  CHECK(terms.span_count == 1);
  CHECK(terms.token_term() == doctest::Approx(TokenLoss(z, ex.y, ex.w) / 4.0));
  CHECK(terms.span_term() == doctest::Approx(SpanMaxLoss(z, ex.spans)));
  CHECK(terms.Combined(0.3) ==
        doctest::Approx(0.7 * terms.token_term() + 0.3 * terms.span_term()));
}

TEST_CASE("optimizer and regularizer names parse") {
  CHECK(ParseOptimizer("adam") == OptimizerKind::kAdam);
  CHECK(ParseOptimizer("sgd") == OptimizerKind::kSgd);
  CHECK(ParseRegularizer("kl") == Regularizer::kKl);
  CHECK_THROWS_AS(ParseRegularizer("l2"), Error);
  CHECK_THROWS_AS(ParseOptimizer("lbfgs"), Error);
}

}  // TEST_SUITE
