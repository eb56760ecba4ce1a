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

// Shared between the forward pass, manual backprop and generation.

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "halluprobe/refmodel.hpp"

namespace halluprobe::internal {

inline double Dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline void Axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// y = x * W^T   (x: n x in, W: out x in, y: n x out)
void MatMulT(const Matrix& x, const Matrix& w, Matrix& y);
// dx += dy * W  (dy: n x out, W: out x in, dx: n x in)
void MatMulAcc(const Matrix& dy, const Matrix& w, Matrix& dx);

// RMS normalization with learned gain. Writes y and per-row 1/rms.
void RmsNorm(const Matrix& x, std::span<const double> gain, double eps,
             Matrix& y, std::vector<double>& inv_rms);
// dx += d(norm)/dx applied to dy.
void RmsNormBackward(const Matrix& x, std::span<const double> gain,
                     std::span<const double> inv_rms, const Matrix& dy,
                     Matrix& dx);

double Gelu(double u);
double GeluGrad(double u);

struct LoraCache {
  std::size_t index = 0;  // position in AdapterSet::adapters
  Matrix ax;              // n x rank, A applied to the projection input
};

struct LayerCache {
  Matrix x_in;
  Matrix a;  // normed input to attention
  std::vector<double> inv_rms1;
  Matrix q, k, v;
  std::vector<double> probs;  // heads x n x n, causal softmax
  Matrix o;                   // concatenated head outputs
  Matrix x_mid;
  Matrix m;  // normed input to MLP
  std::vector<double> inv_rms2;
  Matrix u;  // MLP pre-activation
  Matrix g;  // gelu(u)
  std::array<std::optional<LoraCache>, 4> lora;
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  Matrix f;  // final normed stream
  std::vector<double> inv_rmsf;
};

// Forward pass; fills `cache` when non-null. When `last_row_only` is set the
// logits matrix holds only the final position (1 x vocab).
ForwardResult ForwardImpl(const ModelParams& params, const AdapterSet* adapters,
                          std::span<const TokenId> tokens, ForwardCache* cache,
                          bool last_row_only = false);

}  // namespace halluprobe::internal
