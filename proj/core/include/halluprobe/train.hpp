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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "halluprobe/backprop.hpp"
#include "halluprobe/probe.hpp"
#include "halluprobe/refmodel.hpp"
#include "halluprobe/trace.hpp"

namespace halluprobe {

enum class OptimizerKind { kSgd, kMomentum, kAdam };
const char* OptimizerName(OptimizerKind kind);
OptimizerKind ParseOptimizer(const std::string& name);

struct TrainConfig {
  double lambda_reg = 0.0;
  Regularizer regularizer = Regularizer::kNone;
  double alpha = 10.0;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double lr_head = 1e-2;
  double lr_adapter = 1e-3;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t steps = 200;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  int probe_layer = -1;  // -1 = floor(0.95 * n_layers)
  bool use_lora = false;
  LoraOptions lora;
  double validation_fraction = 0.1;

  std::string ToJson() const;
  static TrainConfig FromJson(const std::string& text);
};

// Rejects lambda outside [0, 1], lambda > 0 without a regularizer, and any
// regularizer on a linear probe (no adapters).
void ValidateTrainConfig(const TrainConfig& config);

// omega for optimizer step `step` of `steps`: a linear ramp that is 0 on the
// first step and 1 on the last.
double OmegaAtStep(std::size_t step, std::size_t steps);

struct TrainReport {
  std::vector<double> probe_curve;
  std::vector<double> reg_curve;
  std::vector<double> total_curve;
  std::vector<double> omega_curve;
  double final_omega = 0.0;
  std::size_t steps = 0;
  double wall_seconds = 0.0;
  std::optional<double> validation_auc;
  std::size_t train_samples = 0;
  std::size_t validation_samples = 0;

  // step,omega,probe,reg,total
  std::string CurvesCsv() const;
  // Excludes wall time unless asked, so reports can be compared bytewise.
  std::string ToJson(bool include_wall_time) const;
};

struct TrainResult {
  ProbeHead head;
  AdapterSet adapters;
  TrainReport report;
};

// Head-only training on exported traces (linear probe).
TrainResult TrainLinear(std::span<const LabeledSample> samples,
                        std::span<const ActivationTrace> traces,
                        const TrainConfig& config);

// Training through the reference model; with config.use_lora the adapters
// below the probe layer are trained alongside the head.
TrainResult TrainWithModel(std::span<const LabeledSample> samples,
                           const ModelParams& params, const TrainConfig& config);

// Probe checkpoint "HPRB" v1: JSON header (training config + tool version),
// then the head and every adapter tensor in f64.
void SaveProbe(const ProbeHead& head, const AdapterSet& adapters,
               const TrainConfig& config, const std::filesystem::path& path);

struct ProbeCheckpoint {
  ProbeHead head;
  AdapterSet adapters;
  TrainConfig config;
};
ProbeCheckpoint LoadProbe(const std::filesystem::path& path);

}  // namespace halluprobe
