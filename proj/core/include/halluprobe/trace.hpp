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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "halluprobe/refmodel.hpp"

namespace halluprobe {

// Per-token model state for one sample's completion: the probe-layer hidden
// states plus the chosen-token log-probability and next-token entropy used
// by the uncertainty baselines.
struct ActivationTrace {
  std::string sample_id;
  std::uint32_t layer = 0;
  std::uint32_t d = 0;
  std::uint32_t n = 0;
  std::vector<float> hidden;            // n x d, row-major
  std::vector<double> chosen_logprob;   // log p(t_i | prefix), <= 0
  std::vector<double> next_token_entropy;  // H_i >= 0, nats

  Matrix HiddenMatrix() const;

  // Throws a data error naming the first violated invariant.
  void Validate() const;

  bool operator==(const ActivationTrace&) const = default;
};

// HTRC v1, little-endian: "HTRC", u32 version, u32 layer, u32 d, u32 n,
// n*d f32 hidden, n f64 chosen_logprob, n f64 entropy. Written atomically.
// The sample id is carried by the file name (see TraceFileName).
void WriteTrace(const ActivationTrace& trace, const std::filesystem::path& path);
ActivationTrace ReadTrace(const std::filesystem::path& path);

// Debug mirror: one JSON object per token.
void WriteTraceJsonl(const ActivationTrace& trace,
                     const std::filesystem::path& path);

// "<percent-encoded id>.htrc"; ids keep [A-Za-z0-9_.-] verbatim.
std::string TraceFileName(const std::string& sample_id);
std::string SampleIdFromTraceFile(const std::filesystem::path& path);

// Runs the model over the sequence and records the completion tokens'
// post-block stream at `layer`, chosen-token log-probabilities and the
// entropy of each completion token's next-token distribution.
ActivationTrace ExportTrace(const ModelParams& params, const AdapterSet* adapters,
                            const Sequence& seq, int layer,
                            const std::string& sample_id);

}  // namespace halluprobe
