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
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "halluprobe/tokenizer.hpp"

namespace halluprobe {

// Row-major dense matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row_span(std::size_t r) const { return {row(r), cols}; }

  bool operator==(const Matrix&) const = default;
};

struct ModelConfig {
  int vocab_size = ByteTokenizer::kVocabSize;
  int d_model = 64;
  int n_layers = 4;
  int n_heads = 4;
  int d_ff = 0;  // 0 means 4 * d_model
  int max_seq_len = 512;
  double norm_eps = 1e-5;
  std::uint64_t seed = 0;

  int ff_width() const { return d_ff > 0 ? d_ff : 4 * d_model; }
  int head_dim() const { return d_model / n_heads; }

  // Throws a usage error on invalid dimensions.
  void Validate() const;

  std::string ToJson() const;
  static ModelConfig FromJson(const std::string& text);

  bool operator==(const ModelConfig&) const = default;
};

// Default probe layer: floor(0.95 * n_layers).
int DefaultProbeLayer(int n_layers);

struct LayerParams {
  std::vector<double> attn_norm;
  Matrix wq, wk, wv, wo;  // d x d, (out, in)
  std::vector<double> mlp_norm;
  Matrix w_up;    // ff x d
  Matrix w_down;  // d x ff

  bool operator==(const LayerParams&) const = default;
};

struct ModelParams {
  ModelConfig config;
  Matrix tok_emb;  // vocab x d
  Matrix pos_emb;  // max_seq_len x d
  std::vector<LayerParams> layers;
  std::vector<double> final_norm;
  Matrix unembed;  // vocab x d, untied from tok_emb

  bool operator==(const ModelParams&) const = default;
};

// Seeded N(0, 0.02) matrices and unit norm gains.
ModelParams InitModel(const ModelConfig& config);

enum class AttnMatrix : std::uint8_t { kQ = 0, kK = 1, kV = 2, kO = 3 };
const char* AttnMatrixName(AttnMatrix m);

// Low-rank delta (scale / rank) * B * A on one attention projection.
struct LoraAdapter {
  int layer = 0;
  AttnMatrix target = AttnMatrix::kQ;
  int rank = 8;
  double alpha = 16.0;
  Matrix a;  // rank x in
  Matrix b;  // out x rank

  double scaling() const { return alpha / static_cast<double>(rank); }

  bool operator==(const LoraAdapter&) const = default;
};

struct AdapterSet {
  std::vector<LoraAdapter> adapters;

  const LoraAdapter* Find(int layer, AttnMatrix target) const;
  bool empty() const { return adapters.empty(); }
  std::size_t parameter_count() const;

  bool operator==(const AdapterSet&) const = default;
};

struct LoraOptions {
  int rank = 8;
  double alpha = 16.0;
  std::vector<AttnMatrix> targets = {AttnMatrix::kQ, AttnMatrix::kK,
                                     AttnMatrix::kV, AttnMatrix::kO};
};

// Adapters on every targeted projection of each layer below probe_layer.
// A ~ U(-1/sqrt(in), 1/sqrt(in)) and B = 0, so the adapted model starts out
// identical to the base model.
AdapterSet MakeAdapters(const ModelConfig& config, int probe_layer,
                        const LoraOptions& options, std::uint64_t seed);

struct ForwardResult {
  // streams[0] is the embedding sum; streams[l + 1] is the residual stream
  // after block l. Each is n x d.
  std::vector<Matrix> streams;
  Matrix logits;  // n x vocab
};

// Pre-norm causal transformer forward pass. Throws a usage error for
// sequences longer than max_seq_len or token ids outside the vocabulary.
ForwardResult Forward(const ModelParams& params, const AdapterSet* adapters,
                      std::span<const TokenId> tokens);

// A prompt + completion token sequence. Completion token i sits at position
// completion_begin + i; it is predicted from position completion_begin + i - 1.
struct Sequence {
  std::vector<TokenId> tokens;
  std::size_t completion_begin = 1;

  std::size_t completion_length() const { return tokens.size() - completion_begin; }
};

// BOS + prompt bytes + completion bytes.
Sequence MakeSequence(const std::string& prompt, const std::string& completion);

// Mean over completion positions of KL(adapted || base), natural log.
double KlToBase(const ModelParams& params, const AdapterSet& adapters,
                const Sequence& seq);

// KL(softmax(p_logits) || softmax(q_logits)) for one position.
double KlFromLogits(std::span<const double> p_logits,
                    std::span<const double> q_logits);

// Numerically stable log-softmax.
std::vector<double> LogSoftmax(std::span<const double> logits);

// Entropy (nats) of softmax(logits).
double EntropyFromLogits(std::span<const double> logits);

struct GenerateOptions {
  std::size_t max_new_tokens = 64;
  double temperature = 0.0;
  std::uint64_t seed = 0;
  int probe_layer = -1;  // stream handed to the observer; -1 = default layer
  bool stop_at_eos = true;
};

enum class FinishReason { kEos, kMaxNewTokens, kContextFull, kStopped };

struct GenerateResult {
  std::vector<TokenId> tokens;  // newly emitted tokens, EOS excluded
  FinishReason finish = FinishReason::kMaxNewTokens;
};

// Called once per emitted token with its probe-layer hidden state, taken
// from the same forward pass that produces the next-token distribution.
// Returning false halts generation.
using StepObserver = std::function<bool(std::size_t index, TokenId token,
                                        std::span<const double> hidden)>;

// Temperature 0 is argmax with the lowest id winning ties; otherwise seeded
// categorical sampling of softmax(logits / temperature).
GenerateResult Generate(const ModelParams& params, const AdapterSet* adapters,
                        std::span<const TokenId> prompt,
                        const GenerateOptions& options,
                        const StepObserver& observer = {});

// Versioned binary checkpoint ("HMDL", v1) with the config as a JSON header.
void SaveModel(const ModelParams& params, const std::filesystem::path& path);
ModelParams LoadModel(const std::filesystem::path& path);

}  // namespace halluprobe
