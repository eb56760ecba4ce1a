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

#include "halluprobe/backprop.hpp"

#include <cmath>

#include "halluprobe/error.hpp"
#include "model_internal.hpp"

namespace halluprobe {

using internal::Axpy;
using internal::Dot;
using internal::ForwardCache;
using internal::LayerCache;
using internal::LoraCache;

ModelExample MakeModelExample(const LabeledSample& sample, double alpha) {
  ModelExample ex;
  ex.seq = MakeSequence(sample.prompt, sample.completion);
  ex.probe = MakeProbeExample(sample, alpha);
  return ex;
}

namespace {

void CheckFinite(double v, const char* what) {
  if (!std::isfinite(v)) ThrowNumeric(std::string("non-finite ") + what);
}

// Backward through y = x W^T + s (x A^T) B^T. Accumulates dx and, for an
// adapted projection, the adapter gradients.
void ProjectBackward(const Matrix& x, const Matrix& w,
                     const std::optional<LoraCache>& lora,
                     const AdapterSet& adapters, const Matrix& dy, Matrix& dx,
                     TrainableGradients& grads) {
  internal::MatMulAcc(dy, w, dx);
  if (!lora) return;
  const LoraAdapter& ad = adapters.adapters[lora->index];
  const double s = ad.scaling();
  const std::size_t n = dy.rows;
  const std::size_t r = static_cast<std::size_t>(ad.rank);
  Matrix& gb = grads.lora_b[lora->index];
  Matrix& ga = grads.lora_a[lora->index];
  // dB = s * dy^T (xA^T)
  for (std::size_t i = 0; i < n; ++i) {
    const double* dyi = dy.row(i);
    const double* axi = lora->ax.row(i);
    for (std::size_t o = 0; o < dy.cols; ++o) {
      if (dyi[o] != 0.0) Axpy(s * dyi[o], axi, gb.row(o), r);
    }
  }
  // t = s * dy B   (n x r)
  Matrix t(n, r);
  internal::MatMulAcc(dy, ad.b, t);
  for (auto& v : t.data) v *= s;
  // dA = t^T x,  dx += t A
  for (std::size_t i = 0; i < n; ++i) {
    const double* ti = t.row(i);
    for (std::size_t k = 0; k < r; ++k) {
      if (ti[k] != 0.0) Axpy(ti[k], x.row(i), ga.row(k), x.cols);
    }
  }
  internal::MatMulAcc(t, ad.a, dx);
}

// Replaces dx (gradient w.r.t. the block output) with the gradient w.r.t.
// the block input.
void BlockBackward(const ModelParams& params, const AdapterSet& adapters,
                   std::size_t l, const LayerCache& c, Matrix& dx,
                   TrainableGradients& grads) {
  const LayerParams& lp = params.layers[l];
  const ModelConfig& cfg = params.config;
  const std::size_t n = dx.rows;
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto heads = static_cast<std::size_t>(cfg.n_heads);
  const auto hd = static_cast<std::size_t>(cfg.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  // MLP branch.
  Matrix dg(n, c.u.cols);
  internal::MatMulAcc(dx, lp.w_down, dg);
  for (std::size_t i = 0; i < dg.data.size(); ++i) {
    dg.data[i] *= internal::GeluGrad(c.u.data[i]);
  }
  Matrix dm(n, d);
  internal::MatMulAcc(dg, lp.w_up, dm);
  Matrix dx_mid = dx;
  internal::RmsNormBackward(c.x_mid, lp.mlp_norm, c.inv_rms2, dm, dx_mid);

  // Attention output projection.
  Matrix d_o(n, d);
  ProjectBackward(c.o, lp.wo, c.lora[3], adapters, dx_mid, d_o, grads);

  // Scaled dot-product attention.
  Matrix dq(n, d), dk(n, d), dv(n, d);
  std::vector<double> dp(n);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * hd;
    for (std::size_t i = 0; i < n; ++i) {
      const double* pr = c.probs.data() + (h * n + i) * n;
      const double* doi = d_o.row(i) + off;
      double dot_sum = 0.0;
      for (std::size_t j = 0; j <= i; ++j) {
        dp[j] = Dot(doi, c.v.row(j) + off, hd);
        dot_sum += pr[j] * dp[j];
        Axpy(pr[j], doi, dv.row(j) + off, hd);
      }
      double* dqi = dq.row(i) + off;
      const double* qi = c.q.row(i) + off;
      for (std::size_t j = 0; j <= i; ++j) {
        const double ds = scale * pr[j] * (dp[j] - dot_sum);
        if (ds == 0.0) continue;
        Axpy(ds, c.k.row(j) + off, dqi, hd);
        Axpy(ds, qi, dk.row(j) + off, hd);
      }
    }
  }

  Matrix da(n, d);
  ProjectBackward(c.a, lp.wq, c.lora[0], adapters, dq, da, grads);
  ProjectBackward(c.a, lp.wk, c.lora[1], adapters, dk, da, grads);
  ProjectBackward(c.a, lp.wv, c.lora[2], adapters, dv, da, grads);

  dx = std::move(dx_mid);
  internal::RmsNormBackward(c.x_in, lp.attn_norm, c.inv_rms1, da, dx);
}

void ZeroGradients(const ProbeHead& head, const AdapterSet& adapters,
                   TrainableGradients& g) {
  g.w.assign(head.w.size(), 0.0);
  g.b = 0.0;
  g.lora_a.clear();
  g.lora_b.clear();
  for (const auto& a : adapters.adapters) {
    g.lora_a.emplace_back(a.a.rows, a.a.cols);
    g.lora_b.emplace_back(a.b.rows, a.b.cols);
  }
}

}  // namespace

LossBreakdown ModelLoss(const ModelParams& params, const AdapterSet& adapters,
                        const ProbeHead& head,
                        std::span<const ModelExample> batch,
                        const LossSettings& settings,
                        TrainableGradients* grads) {
  const ModelConfig& cfg = params.config;
  const double lambda = settings.lambda_reg;
  if (!(lambda >= 0.0 && lambda <= 1.0)) ThrowUsage("lambda_reg must lie in [0, 1]");
  if (settings.regularizer == Regularizer::kNone && lambda != 0.0) {
    ThrowUsage("lambda_reg > 0 requires a regularizer");
  }
  if (head.layer < 0 || head.layer >= cfg.n_layers) {
    ThrowUsage("probe layer " + std::to_string(head.layer) + " out of range");
  }
  if (head.w.size() != static_cast<std::size_t>(cfg.d_model)) {
    ThrowUsage("probe head width does not match d_model");
  }
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto vocab = static_cast<std::size_t>(cfg.vocab_size);
  const auto layer = static_cast<std::size_t>(head.layer);

  std::size_t token_norm = 0;
  std::size_t span_norm = 0;
  for (const auto& ex : batch) {
    if (ex.seq.completion_begin == 0 ||
        ex.seq.completion_length() != ex.probe.size()) {
      ThrowUsage("model example: completion length does not match targets");
    }
    token_norm += ex.probe.size();
    span_norm += ex.probe.spans.size();
  }

  if (grads) ZeroGradients(head, adapters, *grads);
  const bool has_reg = settings.regularizer != Regularizer::kNone;
  const bool reg_grad = has_reg && lambda > 0.0;
  ProbeTerms terms;
  double reg_sum = 0.0;

  for (const auto& ex : batch) {
    ForwardCache cache;
    ForwardResult fwd =
        internal::ForwardImpl(params, &adapters, ex.seq.tokens, grads ? &cache : nullptr);
    const std::size_t n = ex.seq.tokens.size();
    const std::size_t cb = ex.seq.completion_begin;
    const std::size_t m = ex.probe.size();

    // Probe head on the completion rows of the probe-layer stream.
    const Matrix& stream = fwd.streams[layer];
    std::vector<double> z(m);
    for (std::size_t i = 0; i < m; ++i) {
      z[i] = Dot(stream.row(cb + i), head.w.data(), d) + head.b;
    }
    std::vector<double> dz(grads ? m : 0, 0.0);
    AccumulateProbeTerms(z, ex.probe, settings.omega, token_norm, span_norm,
                         terms, dz);

    // Regularizer over the positions predicting completion tokens.
    Matrix dlogits;
    if (has_reg) {
      if (reg_grad && grads) dlogits = Matrix(n, vocab);
      ForwardResult base;
      if (settings.regularizer == Regularizer::kKl) {
        base = internal::ForwardImpl(params, nullptr, ex.seq.tokens, nullptr);
      }
      const double g_scale = lambda / static_cast<double>(token_norm);
      for (std::size_t p = cb - 1; p + 1 < n; ++p) {
        auto lp = LogSoftmax(fwd.logits.row_span(p));
        if (settings.regularizer == Regularizer::kLm) {
          const auto target = static_cast<std::size_t>(ex.seq.tokens[p + 1]);
          reg_sum += -lp[target];
          if (!dlogits.data.empty()) {
            double* g = dlogits.row(p);
            for (std::size_t v = 0; v < vocab; ++v) g[v] = g_scale * std::exp(lp[v]);
            g[target] -= g_scale;
          }
        } else {
          auto lq = LogSoftmax(base.logits.row_span(p));
          double kl = 0.0;
          for (std::size_t v = 0; v < vocab; ++v) kl += std::exp(lp[v]) * (lp[v] - lq[v]);
          reg_sum += kl;
          if (!dlogits.data.empty()) {
            double* g = dlogits.row(p);
            for (std::size_t v = 0; v < vocab; ++v) {
              g[v] = g_scale * std::exp(lp[v]) * (lp[v] - lq[v] - kl);
            }
          }
        }
      }
    }

    if (!grads) continue;

    // Head gradients and the probe's gradient into the residual stream.
    const double probe_scale = 1.0 - lambda;
    Matrix dh(n, d);
    for (std::size_t i = 0; i < m; ++i) {
      const double g = probe_scale * dz[i];
      if (g == 0.0) continue;
      Axpy(g, stream.row(cb + i), grads->w.data(), d);
      grads->b += g;
      Axpy(g, head.w.data(), dh.row(cb + i), d);
    }
    if (adapters.empty()) continue;

    Matrix dx(n, d);
    std::size_t top = layer;  // number of blocks to traverse
    if (reg_grad) {
      Matrix df(n, d);
      internal::MatMulAcc(dlogits, params.unembed, df);
      internal::RmsNormBackward(fwd.streams.back(), params.final_norm,
                                cache.inv_rmsf, df, dx);
      top = params.layers.size();
    }
    for (std::size_t l = top; l-- > 0;) {
      if (l + 1 == layer) {
        for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += dh.data[i];
      }
      BlockBackward(params, adapters, l, cache.layers[l], dx, *grads);
    }
  }

  LossBreakdown out;
  out.token_term = terms.token_term();
  out.span_term = terms.span_term();
  out.probe = terms.Combined(settings.omega);
  out.reg = has_reg && token_norm ? reg_sum / static_cast<double>(token_norm) : 0.0;
  out.total = TotalLoss(out.probe, out.reg, lambda);
  CheckFinite(out.total, "loss");
  return out;
}

LossBreakdown HeadLoss(const ProbeHead& head, std::span<const TraceExample> batch,
                       double omega, TrainableGradients* grads) {
  std::size_t token_norm = 0;
  std::size_t span_norm = 0;
  for (const auto& ex : batch) {
    if (ex.hidden.rows != ex.probe.size()) {
      ThrowUsage("trace example: hidden rows do not match targets");
    }
    token_norm += ex.probe.size();
    span_norm += ex.probe.spans.size();
  }
  if (grads) {
    grads->w.assign(head.w.size(), 0.0);
    grads->b = 0.0;
    grads->lora_a.clear();
    grads->lora_b.clear();
  }
  ProbeTerms terms;
  for (const auto& ex : batch) {
    auto z = HeadLogits(ex.hidden, head);
    std::vector<double> dz(grads ? z.size() : 0, 0.0);
    AccumulateProbeTerms(z, ex.probe, omega, token_norm, span_norm, terms, dz);
    if (!grads) continue;
    for (std::size_t i = 0; i < dz.size(); ++i) {
      if (dz[i] == 0.0) continue;
      Axpy(dz[i], ex.hidden.row(i), grads->w.data(), ex.hidden.cols);
      grads->b += dz[i];
    }
  }
  LossBreakdown out;
  out.token_term = terms.token_term();
  out.span_term = terms.span_term();
  out.probe = terms.Combined(omega);
  out.total = out.probe;
  CheckFinite(out.total, "loss");
  return out;
}

}  // namespace halluprobe
