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

#include "halluprobe/refmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "halluprobe/binio.hpp"
#include "halluprobe/error.hpp"
#include "halluprobe/rng.hpp"
#include "model_internal.hpp"

namespace halluprobe {

using internal::Dot;

void ModelConfig::Validate() const {
  if (vocab_size < 1 || d_model < 1 || n_layers < 1 || n_heads < 1 ||
      ff_width() < 1 || max_seq_len < 1) {
    ThrowUsage("model config: all dimensions must be >= 1");
  }
  if (d_model % n_heads != 0) {
    ThrowUsage("model config: d_model (" + std::to_string(d_model) +
               ") must be divisible by n_heads (" + std::to_string(n_heads) +
               ")");
  }
  if (!(norm_eps > 0.0)) ThrowUsage("model config: norm_eps must be positive");
}

std::string ModelConfig::ToJson() const {
  nlohmann::json j = {{"vocab_size", vocab_size},   {"d_model", d_model},
                      {"n_layers", n_layers},       {"n_heads", n_heads},
                      {"d_ff", ff_width()},         {"max_seq_len", max_seq_len},
                      {"norm_eps", norm_eps},       {"seed", seed}};
  return j.dump();
}

ModelConfig ModelConfig::FromJson(const std::string& text) {
  ModelConfig c;
  try {
    auto j = nlohmann::json::parse(text);
    c.vocab_size = j.at("vocab_size").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.n_layers = j.at("n_layers").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.d_ff = j.at("d_ff").get<int>();
    c.max_seq_len = j.at("max_seq_len").get<int>();
    c.norm_eps = j.at("norm_eps").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    ThrowData(std::string("model config header: ") + e.what());
  }
  c.Validate();
  return c;
}

int DefaultProbeLayer(int n_layers) {
  return static_cast<int>(std::floor(0.95 * n_layers));
}

namespace {

void FillGaussian(Matrix& m, Rng& rng, double std) {
  for (auto& x : m.data) x = std * StandardNormal(rng);
}

}  // namespace

ModelParams InitModel(const ModelConfig& config) {
  config.Validate();
  const auto d = static_cast<std::size_t>(config.d_model);
  const auto ff = static_cast<std::size_t>(config.ff_width());
  const auto vocab = static_cast<std::size_t>(config.vocab_size);
  ModelParams p;
  p.config = config;
  p.config.d_ff = config.ff_width();  // stored resolved so checkpoints round-trip
  auto rng = MakeRng(config.seed, "init");
  p.tok_emb = Matrix(vocab, d);
  p.pos_emb = Matrix(static_cast<std::size_t>(config.max_seq_len), d);
  FillGaussian(p.tok_emb, rng, 0.02);
  FillGaussian(p.pos_emb, rng, 0.02);
  p.layers.resize(static_cast<std::size_t>(config.n_layers));
  for (auto& layer : p.layers) {
    layer.attn_norm.assign(d, 1.0);
    layer.mlp_norm.assign(d, 1.0);
    for (Matrix* w : {&layer.wq, &layer.wk, &layer.wv, &layer.wo}) {
      *w = Matrix(d, d);
      FillGaussian(*w, rng, 0.02);
    }
    layer.w_up = Matrix(ff, d);
    layer.w_down = Matrix(d, ff);
    FillGaussian(layer.w_up, rng, 0.02);
    FillGaussian(layer.w_down, rng, 0.02);
  }
  p.final_norm.assign(d, 1.0);
  p.unembed = Matrix(vocab, d);
  FillGaussian(p.unembed, rng, 0.02);
  return p;
}

const char* AttnMatrixName(AttnMatrix m) {
  switch (m) {
    case AttnMatrix::kQ:
      return "Q";
    case AttnMatrix::kK:
      return "K";
    case AttnMatrix::kV:
      return "V";
    case AttnMatrix::kO:
      return "O";
  }
  return "?";
}

const LoraAdapter* AdapterSet::Find(int layer, AttnMatrix target) const {
  for (const auto& a : adapters) {
    if (a.layer == layer && a.target == target) return &a;
  }
  return nullptr;
}

std::size_t AdapterSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& a : adapters) n += a.a.data.size() + a.b.data.size();
  return n;
}

AdapterSet MakeAdapters(const ModelConfig& config, int probe_layer,
                        const LoraOptions& options, std::uint64_t seed) {
  if (options.rank < 1) ThrowUsage("LoRA rank must be >= 1");
  if (probe_layer < 0 || probe_layer >= config.n_layers) {
    ThrowUsage("probe layer " + std::to_string(probe_layer) +
               " out of range for a " + std::to_string(config.n_layers) +
               "-layer model");
  }
  const auto d = static_cast<std::size_t>(config.d_model);
  const auto r = static_cast<std::size_t>(options.rank);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  auto rng = MakeRng(seed, "lora");
  AdapterSet set;
  for (int layer = 0; layer < probe_layer; ++layer) {
    for (AttnMatrix target : options.targets) {
      LoraAdapter a;
      a.layer = layer;
      a.target = target;
      a.rank = options.rank;
      a.alpha = options.alpha;
      a.a = Matrix(r, d);
      for (auto& x : a.a.data) x = bound * (2.0 * UniformUnit(rng) - 1.0);
      a.b = Matrix(d, r);
      set.adapters.push_back(std::move(a));
    }
  }
  return set;
}

namespace internal {

void MatMulT(const Matrix& x, const Matrix& w, Matrix& y) {
  y = Matrix(x.rows, w.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* xi = x.row(i);
    double* yi = y.row(i);
    for (std::size_t o = 0; o < w.rows; ++o) yi[o] = Dot(xi, w.row(o), x.cols);
  }
}

void MatMulAcc(const Matrix& dy, const Matrix& w, Matrix& dx) {
  for (std::size_t i = 0; i < dy.rows; ++i) {
    const double* dyi = dy.row(i);
    double* dxi = dx.row(i);
    for (std::size_t o = 0; o < w.rows; ++o) {
      if (dyi[o] != 0.0) Axpy(dyi[o], w.row(o), dxi, w.cols);
    }
  }
}

void RmsNorm(const Matrix& x, std::span<const double> gain, double eps,
             Matrix& y, std::vector<double>& inv_rms) {
  y = Matrix(x.rows, x.cols);
  inv_rms.resize(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* xi = x.row(i);
    const double ms = Dot(xi, xi, x.cols) / static_cast<double>(x.cols);
    const double r = 1.0 / std::sqrt(ms + eps);
    inv_rms[i] = r;
    double* yi = y.row(i);
    for (std::size_t j = 0; j < x.cols; ++j) yi[j] = gain[j] * xi[j] * r;
  }
}

void RmsNormBackward(const Matrix& x, std::span<const double> gain,
                     std::span<const double> inv_rms, const Matrix& dy,
                     Matrix& dx) {
  const double inv_d = 1.0 / static_cast<double>(x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* xi = x.row(i);
    const double* dyi = dy.row(i);
    double* dxi = dx.row(i);
    const double r = inv_rms[i];
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) s += gain[j] * dyi[j] * xi[j];
    const double c = r * r * r * s * inv_d;
    for (std::size_t j = 0; j < x.cols; ++j) {
      dxi[j] += r * gain[j] * dyi[j] - c * xi[j];
    }
  }
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluK = 0.044715;
}  // namespace

double Gelu(double u) {
  return 0.5 * u * (1.0 + std::tanh(kGeluC * (u + kGeluK * u * u * u)));
}

double GeluGrad(double u) {
  const double t = std::tanh(kGeluC * (u + kGeluK * u * u * u));
  return 0.5 * (1.0 + t) +
         0.5 * u * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluK * u * u);
}

namespace {

// y = x W^T (+ scale * (x A^T) B^T when an adapter is present).
void Project(const Matrix& x, const Matrix& w, const AdapterSet* adapters,
             int layer, AttnMatrix target, Matrix& y,
             std::optional<LoraCache>* lora_cache) {
  MatMulT(x, w, y);
  if (!adapters) return;
  const LoraAdapter* ad = adapters->Find(layer, target);
  if (!ad) return;
  Matrix ax;
  MatMulT(x, ad->a, ax);
  Matrix delta;
  MatMulT(ax, ad->b, delta);
  const double s = ad->scaling();
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += s * delta.data[i];
  if (lora_cache) {
    LoraCache c;
    c.index = static_cast<std::size_t>(ad - adapters->adapters.data());
    c.ax = std::move(ax);
    *lora_cache = std::move(c);
  }
}

}  // namespace

ForwardResult ForwardImpl(const ModelParams& params, const AdapterSet* adapters,
                          std::span<const TokenId> tokens, ForwardCache* cache,
                          bool last_row_only) {
  const ModelConfig& cfg = params.config;
  const std::size_t n = tokens.size();
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto heads = static_cast<std::size_t>(cfg.n_heads);
  const auto hd = static_cast<std::size_t>(cfg.head_dim());
  if (n == 0) ThrowUsage("forward: empty token sequence");
  if (n > static_cast<std::size_t>(cfg.max_seq_len)) {
    ThrowUsage("forward: sequence length " + std::to_string(n) +
               " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
  }
  for (TokenId t : tokens) {
    if (t < 0 || t >= cfg.vocab_size) {
      ThrowUsage("forward: token id " + std::to_string(t) +
                 " outside vocabulary of size " + std::to_string(cfg.vocab_size));
    }
  }

  ForwardResult out;
  out.streams.reserve(params.layers.size() + 1);
  Matrix x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* te = params.tok_emb.row(static_cast<std::size_t>(tokens[i]));
    const double* pe = params.pos_emb.row(i);
    double* xi = x.row(i);
    for (std::size_t j = 0; j < d; ++j) xi[j] = te[j] + pe[j];
  }
  out.streams.push_back(x);
  if (cache) cache->layers.assign(params.layers.size(), {});

  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  std::vector<double> row_scores(n);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const LayerParams& lp = params.layers[l];
    const int li = static_cast<int>(l);
    LayerCache local;
    LayerCache& c = cache ? cache->layers[l] : local;
    c.x_in = x;
    RmsNorm(x, lp.attn_norm, cfg.norm_eps, c.a, c.inv_rms1);
    auto* lq = cache ? &c.lora[0] : nullptr;
    auto* lk = cache ? &c.lora[1] : nullptr;
    auto* lv = cache ? &c.lora[2] : nullptr;
    auto* lo = cache ? &c.lora[3] : nullptr;
    Project(c.a, lp.wq, adapters, li, AttnMatrix::kQ, c.q, lq);
    Project(c.a, lp.wk, adapters, li, AttnMatrix::kK, c.k, lk);
    Project(c.a, lp.wv, adapters, li, AttnMatrix::kV, c.v, lv);

    c.o = Matrix(n, d);
    c.probs.assign(heads * n * n, 0.0);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * hd;
      for (std::size_t i = 0; i < n; ++i) {
        const double* qi = c.q.row(i) + off;
        double mx = -INFINITY;
        for (std::size_t j = 0; j <= i; ++j) {
          row_scores[j] = scale * Dot(qi, c.k.row(j) + off, hd);
          mx = std::max(mx, row_scores[j]);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          row_scores[j] = std::exp(row_scores[j] - mx);
          sum += row_scores[j];
        }
        double* pr = c.probs.data() + (h * n + i) * n;
        double* oi = c.o.row(i) + off;
        for (std::size_t j = 0; j <= i; ++j) {
          pr[j] = row_scores[j] / sum;
          internal::Axpy(pr[j], c.v.row(j) + off, oi, hd);
        }
      }
    }
    Matrix attn_out;
    Project(c.o, lp.wo, adapters, li, AttnMatrix::kO, attn_out, lo);
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += attn_out.data[i];
    c.x_mid = x;

    RmsNorm(x, lp.mlp_norm, cfg.norm_eps, c.m, c.inv_rms2);
    MatMulT(c.m, lp.w_up, c.u);
    c.g = Matrix(c.u.rows, c.u.cols);
    for (std::size_t i = 0; i < c.u.data.size(); ++i) c.g.data[i] = Gelu(c.u.data[i]);
    Matrix mlp_out;
    MatMulT(c.g, lp.w_down, mlp_out);
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += mlp_out.data[i];
    out.streams.push_back(x);
  }

  Matrix f;
  std::vector<double> inv_rmsf;
  if (last_row_only) {
    Matrix last(1, d);
    std::copy_n(x.row(n - 1), d, last.row(0));
    RmsNorm(last, params.final_norm, cfg.norm_eps, f, inv_rmsf);
  } else {
    RmsNorm(x, params.final_norm, cfg.norm_eps, f, inv_rmsf);
  }
  MatMulT(f, params.unembed, out.logits);
  if (cache) {
    cache->f = std::move(f);
    cache->inv_rmsf = std::move(inv_rmsf);
  }
  return out;
}

}  // namespace internal

ForwardResult Forward(const ModelParams& params, const AdapterSet* adapters,
                      std::span<const TokenId> tokens) {
  return internal::ForwardImpl(params, adapters, tokens, nullptr);
}

Sequence MakeSequence(const std::string& prompt, const std::string& completion) {
  ByteTokenizer tok;
  Sequence s;
  s.tokens.push_back(ByteTokenizer::kBos);
  for (TokenId t : tok.EncodeIds(prompt)) s.tokens.push_back(t);
  s.completion_begin = s.tokens.size();
  for (TokenId t : tok.EncodeIds(completion)) s.tokens.push_back(t);
  return s;
}

std::vector<double> LogSoftmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

double EntropyFromLogits(std::span<const double> logits) {
  auto lp = LogSoftmax(logits);
  double h = 0.0;
  for (double l : lp) {
    const double p = std::exp(l);
    if (p > 0.0) h -= p * l;
  }
  return std::max(h, 0.0);
}

double KlFromLogits(std::span<const double> p_logits,
                    std::span<const double> q_logits) {
  auto lp = LogSoftmax(p_logits);
  auto lq = LogSoftmax(q_logits);
  double kl = 0.0;
  for (std::size_t v = 0; v < lp.size(); ++v) {
    const double p = std::exp(lp[v]);
    if (p > 0.0) kl += p * (lp[v] - lq[v]);
  }
  return std::max(kl, 0.0);
}

double KlToBase(const ModelParams& params, const AdapterSet& adapters,
                const Sequence& seq) {
  if (seq.completion_begin == 0 || seq.completion_begin >= seq.tokens.size()) {
    ThrowUsage("kl_to_base: need at least one scored completion position");
  }
  auto adapted = Forward(params, &adapters, seq.tokens);
  auto base = Forward(params, nullptr, seq.tokens);
  double total = 0.0;
  const std::size_t count = seq.completion_length();
  for (std::size_t p = seq.completion_begin - 1; p + 1 < seq.tokens.size(); ++p) {
    total += KlFromLogits(adapted.logits.row_span(p), base.logits.row_span(p));
  }
  return total / static_cast<double>(count);
}

namespace {

constexpr char kModelMagic[4] = {'H', 'M', 'D', 'L'};
constexpr std::uint32_t kModelVersion = 1;

template <typename Fn>
void VisitParams(ModelParams& p, Fn&& fn) {
  fn(p.tok_emb.data);
  fn(p.pos_emb.data);
  for (auto& l : p.layers) {
    fn(l.attn_norm);
    fn(l.wq.data);
    fn(l.wk.data);
    fn(l.wv.data);
    fn(l.wo.data);
    fn(l.mlp_norm);
    fn(l.w_up.data);
    fn(l.w_down.data);
  }
  fn(p.final_norm);
  fn(p.unembed.data);
}

}  // namespace

void SaveModel(const ModelParams& params, const std::filesystem::path& path) {
  binio::Writer w;
  w.Bytes(std::string_view(kModelMagic, 4));
  w.U32(kModelVersion);
  w.String(params.config.ToJson());
  auto copy = params;
  VisitParams(copy, [&](std::vector<double>& v) {
    for (double x : v) {
      if (!std::isfinite(x)) ThrowNumeric("model checkpoint: non-finite parameter");
    }
    w.F64s(v);
  });
  binio::WriteFileAtomic(path, w.buffer());
}

ModelParams LoadModel(const std::filesystem::path& path) {
  const std::string raw = binio::ReadFile(path);
  binio::Reader r(raw, "model checkpoint " + path.string());
  if (r.Bytes(4) != std::string_view(kModelMagic, 4)) {
    ThrowData("model checkpoint " + path.string() + ": bad magic");
  }
  if (const auto v = r.U32(); v != kModelVersion) {
    ThrowData("model checkpoint " + path.string() + ": unsupported version " +
              std::to_string(v));
  }
  ModelConfig cfg = ModelConfig::FromJson(r.String());
  ModelParams p = InitModel(cfg);  // shapes
  VisitParams(p, [&](std::vector<double>& v) { r.F64s(v); });
  r.ExpectEnd();
  return p;
}

}  // namespace halluprobe
