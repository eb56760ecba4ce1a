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

#include "halluprobe/baselines.hpp"

#include <cctype>
#include <cmath>
#include <numeric>
#include <regex>

#include <json.hpp>

#include "halluprobe/annotate.hpp"
#include "halluprobe/error.hpp"
#include "halluprobe/rng.hpp"
#include "halluprobe/tokenizer.hpp"

namespace halluprobe {

double TokenEntropy(std::span<const double> distribution) {
  if (distribution.empty()) ThrowData("token entropy of an empty distribution");
  double sum = 0.0;
  for (double p : distribution) {
    if (!(p >= 0.0)) ThrowData("token distribution has a negative or NaN probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    ThrowData("token distribution sums to " + std::to_string(sum) + ", not 1");
  }
  double h = 0.0;
  for (double p : distribution) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double TokenPerplexity(double chosen_logprob) {
  if (!(chosen_logprob <= 0.0)) {
    ThrowData("log-probability must be <= 0, got " + std::to_string(chosen_logprob));
  }
  return std::exp(-chosen_logprob);
}

std::vector<double> EntropyScores(const ActivationTrace& trace) {
  return trace.next_token_entropy;
}

std::vector<double> PerplexityScores(const ActivationTrace& trace) {
  std::vector<double> out;
  out.reserve(trace.chosen_logprob.size());
  for (double lp : trace.chosen_logprob) out.push_back(TokenPerplexity(lp));
  return out;
}

bool EntailmentOracle::Equivalent(const std::string& u, const std::string& v) {
  auto key = u < v ? std::make_pair(u, v) : std::make_pair(v, u);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  ++calls_;
  const bool result = Judge(key.first, key.second);
  cache_.emplace(std::move(key), result);
  return result;
}

bool ExactMatchOracle::Judge(const std::string& u, const std::string& v) {
  return u == v;
}

std::string NormalizedMatchOracle::Normalize(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isspace(uc)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(uc)));
  }
  auto is_trim = [](char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0 || c == ' ';
  };
  std::size_t b = 0;
  std::size_t e = out.size();
  while (b < e && is_trim(out[b])) ++b;
  while (e > b && is_trim(out[e - 1])) --e;
  return out.substr(b, e - b);
}

bool NormalizedMatchOracle::Judge(const std::string& u, const std::string& v) {
  return Normalize(u) == Normalize(v);
}

HttpEntailmentOracle::HttpEntailmentOracle(std::string url, std::string token)
    : url_(std::move(url)), token_(std::move(token)) {}

bool HttpEntailmentOracle::Judge(const std::string& u, const std::string& v) {
  JudgeEndpoint endpoint;
  endpoint.url = url_;
  endpoint.token = token_;
  auto one_way = [&](const std::string& premise, const std::string& hypothesis) {
    nlohmann::json body = {
        {"task", "entailment"}, {"premise", premise}, {"hypothesis", hypothesis}};
    const std::string payload =
        PostJson(endpoint, body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace));
    try {
      return nlohmann::json::parse(payload).at("entails").get<bool>();
    } catch (const nlohmann::json::exception& e) {
      ThrowExternal(std::string("bad entailment response: ") + e.what());
    }
  };
  return one_way(u, v) && one_way(v, u);
}

std::vector<double> SemanticClustering::probabilities() const {
  std::vector<double> p;
  for (auto s : sizes) p.push_back(static_cast<double>(s) / static_cast<double>(k));
  return p;
}

namespace {

std::size_t Find(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

SemanticClustering ClusterByEntailment(std::span<const std::string> samples,
                                       EntailmentOracle& oracle) {
  const std::size_t k = samples.size();
  if (k == 0) ThrowUsage("semantic clustering needs at least one sample");
  std::vector<std::size_t> parent(k);
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const std::size_t ri = Find(parent, i);
      const std::size_t rj = Find(parent, j);
      if (ri == rj) continue;  // already connected; the edge cannot matter
      bool eq = false;
      try {
        eq = oracle.Equivalent(samples[i], samples[j]);
      } catch (const std::exception& e) {
        const auto* err = dynamic_cast<const Error*>(&e);
        throw Error(err ? err->kind() : ErrorKind::kExternal,
                    "entailment judgment for samples " + std::to_string(i) + " (\"" +
                        samples[i] + "\") and " + std::to_string(j) + " (\"" + samples[j] +
                        "\") failed: " + e.what());
      }
      if (eq) parent[std::max(ri, rj)] = std::min(ri, rj);
    }
  }
  SemanticClustering c;
  c.k = k;
  c.assignment.assign(k, 0);
  std::vector<std::size_t> cluster_of_root(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t r = Find(parent, i);
    if (cluster_of_root[r] == k) {
      cluster_of_root[r] = c.sizes.size();
      c.sizes.push_back(0);
    }
    c.assignment[i] = cluster_of_root[r];
    ++c.sizes[c.assignment[i]];
  }
  return c;
}

double SemanticEntropy(const SemanticClustering& clustering) {
  double h = 0.0;
  for (double p : clustering.probabilities()) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

std::string RegexAnswerExtractor(const std::string& text) {
  static const std::regex boxed(R"(\\boxed\{([^{}]*)\})");
  static const std::regex number(R"(-?\d+(?:\.\d+)?(?:/\d+)?)");
  std::string last;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), boxed);
       it != std::sregex_iterator(); ++it) {
    last = (*it)[1].str();
  }
  if (!last.empty()) return last;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), number);
       it != std::sregex_iterator(); ++it) {
    last = it->str();
  }
  if (!last.empty()) return last;
  return NormalizedMatchOracle::Normalize(text);
}

ContinuationGenerator MakeModelGenerator(const ModelParams& params,
                                         const AdapterSet* adapters,
                                         double temperature, std::uint64_t seed) {
  return [&params, adapters, temperature, seed](const std::string& prompt,
                                                const std::string& prefix,
                                                std::size_t max_tokens,
                                                std::size_t index) {
    const Sequence seq = MakeSequence(prompt, prefix);
    GenerateOptions opt;
    opt.max_new_tokens = max_tokens;
    opt.temperature = temperature;
    opt.seed = DeriveSeed(seed, "semantic_entropy", index);
    GenerateResult r = Generate(params, adapters, seq.tokens, opt);
    return ByteTokenizer{}.Decode(r.tokens);
  };
}

std::size_t ContinuationCap(const EntitySpan& span, std::size_t min_tokens) {
  if (!span.aligned()) ThrowUsage("span \"" + span.text + "\" is not aligned");
  return std::max(min_tokens, 2 * span.token_count());
}

double SpanSemanticEntropy(const LabeledSample& sample, const EntitySpan& span,
                           const ContinuationGenerator& generator,
                           EntailmentOracle& oracle, const SpanEntropyOptions& options) {
  if (!generator) ThrowUsage("semantic entropy needs a continuation generator");
  if (options.k == 0) ThrowUsage("k must be >= 1");
  const std::size_t cap = ContinuationCap(span, options.min_tokens);
  if (span.char_start > sample.completion.size()) {
    ThrowData("span \"" + span.text + "\" lies outside the completion");
  }
  const std::string prefix = sample.completion.substr(0, span.char_start);
  std::vector<std::string> continuations;
  continuations.reserve(options.k);
  for (std::size_t i = 0; i < options.k; ++i) {
    std::string c = generator(sample.prompt, prefix, cap, i);
    if (options.extractor) c = options.extractor(c);
    continuations.push_back(std::move(c));
  }
  return SemanticEntropy(ClusterByEntailment(continuations, oracle));
}

}  // namespace halluprobe
