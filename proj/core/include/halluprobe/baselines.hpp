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
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "halluprobe/corpus.hpp"
#include "halluprobe/refmodel.hpp"
#include "halluprobe/trace.hpp"

namespace halluprobe {

// ---- Token-level uncertainty ----------------------------------------------

// Shannon entropy in nats, with 0 ln 0 = 0. The distribution must be
// non-negative and sum to 1 within 1e-6.
double TokenEntropy(std::span<const double> distribution);

// exp(-logprob); logprob must be <= 0.
double TokenPerplexity(double chosen_logprob);

// Per-token baseline scores read from an exported trace.
std::vector<double> EntropyScores(const ActivationTrace& trace);
std::vector<double> PerplexityScores(const ActivationTrace& trace);

// ---- Entailment and semantic clustering -----------------------------------

// Bidirectional entailment judge with a per-pair cache. Pairs are cached
// unordered, so each distinct pair costs at most one call to Judge.
class EntailmentOracle {
 public:
  virtual ~EntailmentOracle() = default;

  // u |= v and v |= u.
  bool Equivalent(const std::string& u, const std::string& v);

  // Number of uncached judgments issued so far.
  std::size_t calls() const { return calls_; }

 protected:
  virtual bool Judge(const std::string& u, const std::string& v) = 0;

 private:
  std::map<std::pair<std::string, std::string>, bool> cache_;
  std::size_t calls_ = 0;
};

// Equivalent iff the strings are byte-identical.
class ExactMatchOracle : public EntailmentOracle {
 protected:
  bool Judge(const std::string& u, const std::string& v) override;
};

// Equivalent iff the strings agree after ASCII case folding, whitespace
// collapsing and trimming of surrounding punctuation.
class NormalizedMatchOracle : public EntailmentOracle {
 public:
  static std::string Normalize(std::string_view s);

 protected:
  bool Judge(const std::string& u, const std::string& v) override;
};

// Asks the external judge over HTTP. The transport and credentials are the
// ones used for span annotation.
class HttpEntailmentOracle : public EntailmentOracle {
 public:
  HttpEntailmentOracle(std::string url, std::string token);

 protected:
  bool Judge(const std::string& u, const std::string& v) override;

 private:
  std::string url_;
  std::string token_;
};

struct SemanticClustering {
  std::size_t k = 0;
  std::vector<std::size_t> assignment;  // cluster index per sample
  std::vector<std::size_t> sizes;       // indexed by cluster

  std::vector<double> probabilities() const;
};

// Connected components of the bidirectional-entailment graph. Cluster
// indices follow the first appearance of each component. Oracle failures
// are rethrown with the offending pair.
SemanticClustering ClusterByEntailment(std::span<const std::string> samples,
                                       EntailmentOracle& oracle);

// -sum p(c) ln p(c) over the cluster frequencies.
double SemanticEntropy(const SemanticClustering& clustering);

// ---- Span-level semantic entropy ------------------------------------------

// Produces continuation number `index` of (prompt, completion prefix),
// capped at max_tokens tokens.
using ContinuationGenerator = std::function<std::string(
    const std::string& prompt, const std::string& prefix, std::size_t max_tokens,
    std::size_t index)>;

// Maps a continuation to the part that should be compared (for example the
// final answer of a reasoning trace).
using AnswerExtractor = std::function<std::string(const std::string&)>;

// Last \boxed{...} content, else the last number, else the trimmed input.
std::string RegexAnswerExtractor(const std::string& text);

// Samples from the reference model; continuation i uses its own seeded
// sampling stream so results do not depend on call order.
ContinuationGenerator MakeModelGenerator(const ModelParams& params,
                                         const AdapterSet* adapters,
                                         double temperature, std::uint64_t seed);

struct SpanEntropyOptions {
  std::size_t k = 10;
  std::size_t min_tokens = 4;
  AnswerExtractor extractor;  // optional
};

// Continuation cap for a span: max(min_tokens, 2 * span token length).
std::size_t ContinuationCap(const EntitySpan& span, std::size_t min_tokens);

// Resamples k continuations of the completion prefix that ends right before
// the span and returns the semantic entropy of their clustering.
double SpanSemanticEntropy(const LabeledSample& sample, const EntitySpan& span,
                           const ContinuationGenerator& generator,
                           EntailmentOracle& oracle,
                           const SpanEntropyOptions& options = {});

}  // namespace halluprobe
