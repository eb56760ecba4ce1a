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

#include "halluprobe/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "halluprobe/error.hpp"
#include "halluprobe/evalproto.hpp"
#include "halluprobe/rng.hpp"

namespace halluprobe {

const char* OptimizerName(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kSgd:
      return "sgd";
    case OptimizerKind::kMomentum:
      return "momentum";
    case OptimizerKind::kAdam:
      return "adam";
  }
  return "sgd";
}

OptimizerKind ParseOptimizer(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "momentum") return OptimizerKind::kMomentum;
  if (name == "adam") return OptimizerKind::kAdam;
  ThrowUsage("unknown optimizer \"" + name + "\" (expected sgd, momentum or adam)");
}

std::string TrainConfig::ToJson() const {
  nlohmann::json targets = nlohmann::json::array();
  for (auto t : lora.targets) targets.push_back(AttnMatrixName(t));
  nlohmann::json j = {{"lambda_reg", lambda_reg},
                      {"regularizer", RegularizerName(regularizer)},
                      {"alpha", alpha},
                      {"optimizer", OptimizerName(optimizer)},
                      {"lr_head", lr_head},
                      {"lr_adapter", lr_adapter},
                      {"momentum", momentum},
                      {"beta1", beta1},
                      {"beta2", beta2},
                      {"adam_eps", adam_eps},
                      {"steps", steps},
                      {"batch_size", batch_size},
                      {"seed", seed},
                      {"probe_layer", probe_layer},
                      {"use_lora", use_lora},
                      {"lora_rank", lora.rank},
                      {"lora_alpha", lora.alpha},
                      {"lora_targets", targets},
                      {"validation_fraction", validation_fraction}};
  return j.dump();
}

TrainConfig TrainConfig::FromJson(const std::string& text) {
  TrainConfig c;
  try {
    auto j = nlohmann::json::parse(text);
    c.lambda_reg = j.at("lambda_reg").get<double>();
    c.regularizer = ParseRegularizer(j.at("regularizer").get<std::string>());
    c.alpha = j.at("alpha").get<double>();
    c.optimizer = ParseOptimizer(j.at("optimizer").get<std::string>());
    c.lr_head = j.at("lr_head").get<double>();
    c.lr_adapter = j.at("lr_adapter").get<double>();
    c.momentum = j.at("momentum").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    c.steps = j.at("steps").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.probe_layer = j.at("probe_layer").get<int>();
    c.use_lora = j.at("use_lora").get<bool>();
    c.lora.rank = j.at("lora_rank").get<int>();
    c.lora.alpha = j.at("lora_alpha").get<double>();
    c.lora.targets.clear();
    for (const auto& t : j.at("lora_targets")) {
      const auto name = t.get<std::string>();
      if (name == "Q") c.lora.targets.push_back(AttnMatrix::kQ);
      else if (name == "K") c.lora.targets.push_back(AttnMatrix::kK);
      else if (name == "V") c.lora.targets.push_back(AttnMatrix::kV);
      else if (name == "O") c.lora.targets.push_back(AttnMatrix::kO);
      else ThrowData("unknown LoRA target \"" + name + "\"");
    }
    c.validation_fraction = j.at("validation_fraction").get<double>();
  } catch (const nlohmann::json::exception& e) {
    ThrowData(std::string("training config header: ") + e.what());
  }
  return c;
}

void ValidateTrainConfig(const TrainConfig& c) {
  if (!(c.lambda_reg >= 0.0 && c.lambda_reg <= 1.0)) {
    ThrowUsage("lambda_reg must lie in [0, 1]");
  }
  if (!c.use_lora && (c.regularizer != Regularizer::kNone || c.lambda_reg != 0.0)) {
    ThrowUsage("a linear probe takes no regularizer: lambda_reg must be 0 and "
               "regularizer none unless LoRA adapters are trained");
  }
  if (c.regularizer == Regularizer::kNone && c.lambda_reg != 0.0) {
    ThrowUsage("lambda_reg > 0 requires regularizer lm or kl");
  }
  if (!(c.alpha > 0.0)) ThrowUsage("alpha must be positive");
  if (c.batch_size == 0) ThrowUsage("batch_size must be >= 1");
  if (!(c.lr_head > 0.0) || !(c.lr_adapter > 0.0)) ThrowUsage("learning rates must be positive");
  if (!(c.validation_fraction >= 0.0 && c.validation_fraction < 1.0)) {
    ThrowUsage("validation_fraction must lie in [0, 1)");
  }
}

double OmegaAtStep(std::size_t step, std::size_t steps) {
  if (steps <= 1) return 0.0;
  return AnnealOmega(step, steps - 1);
}

std::string TrainReport::CurvesCsv() const {
  std::ostringstream os;
  os << "step,omega,probe,reg,total\n";
  char buf[160];
  for (std::size_t i = 0; i < total_curve.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", i,
                  omega_curve[i], probe_curve[i], reg_curve[i], total_curve[i]);
    os << buf;
  }
  return os.str();
}

std::string TrainReport::ToJson(bool include_wall_time) const {
  nlohmann::json j = {{"steps", steps},
                      {"final_omega", final_omega},
                      {"train_samples", train_samples},
                      {"validation_samples", validation_samples},
                      {"initial_total_loss", total_curve.empty() ? 0.0 : total_curve.front()},
                      {"final_total_loss", total_curve.empty() ? 0.0 : total_curve.back()},
                      {"validation_auc", nullptr}};
  if (validation_auc) j["validation_auc"] = *validation_auc;
  if (include_wall_time) j["wall_seconds"] = wall_seconds;
  return j.dump(2) + "\n";
}

namespace {

struct SlotState {
  std::vector<double> m;
  std::vector<double> v;
};

class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& c) : c_(c) {}

  void BeginStep() { ++t_; }

  void Update(std::size_t slot, std::span<double> param, std::span<const double> grad,
              double lr) {
    if (slot >= state_.size()) state_.resize(slot + 1);
    SlotState& s = state_[slot];
    if (s.m.empty()) {
      s.m.assign(param.size(), 0.0);
      if (c_.optimizer == OptimizerKind::kAdam) s.v.assign(param.size(), 0.0);
    }
    switch (c_.optimizer) {
      case OptimizerKind::kSgd:
        for (std::size_t i = 0; i < param.size(); ++i) param[i] -= lr * grad[i];
        break;
      case OptimizerKind::kMomentum:
        for (std::size_t i = 0; i < param.size(); ++i) {
          s.m[i] = c_.momentum * s.m[i] + grad[i];
          param[i] -= lr * s.m[i];
        }
        break;
      case OptimizerKind::kAdam: {
        const double bc1 = 1.0 - std::pow(c_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(c_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < param.size(); ++i) {
          s.m[i] = c_.beta1 * s.m[i] + (1.0 - c_.beta1) * grad[i];
          s.v[i] = c_.beta2 * s.v[i] + (1.0 - c_.beta2) * grad[i] * grad[i];
          const double mh = s.m[i] / bc1;
          const double vh = s.v[i] / bc2;
          param[i] -= lr * mh / (std::sqrt(vh) + c_.adam_eps);
        }
        break;
      }
    }
  }

 private:
  const TrainConfig& c_;
  std::vector<SlotState> state_;
  std::size_t t_ = 0;
};

void ApplyUpdates(Optimizer& opt, const TrainConfig& c, ProbeHead& head,
                  AdapterSet& adapters, const TrainableGradients& g) {
  opt.BeginStep();
  opt.Update(0, head.w, g.w, c.lr_head);
  opt.Update(1, std::span<double>(&head.b, 1), std::span<const double>(&g.b, 1), c.lr_head);
  for (std::size_t k = 0; k < adapters.adapters.size(); ++k) {
    opt.Update(2 + 2 * k, adapters.adapters[k].a.data, g.lora_a[k].data, c.lr_adapter);
    opt.Update(3 + 2 * k, adapters.adapters[k].b.data, g.lora_b[k].data, c.lr_adapter);
  }
}

// Seeded split into (train, validation) index lists.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> SplitIndices(
    std::size_t n, const TrainConfig& c) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::size_t n_val = 0;
  if (n >= 10) n_val = static_cast<std::size_t>(c.validation_fraction * static_cast<double>(n));
  if (n_val == 0) return {idx, {}};
  auto rng = MakeRng(c.seed, "validation");
  Shuffle(idx, rng);
  std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {train, val};
}

// Epoch-wise reshuffled batches over a fixed index list.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch, std::uint64_t seed)
      : n_(n), batch_(std::min(batch, n)), rng_(MakeRng(seed, "shuffle")) {}

  std::vector<std::size_t> Next() {
    std::vector<std::size_t> out;
    while (out.size() < batch_) {
      if (cursor_ == order_.size()) {
        order_.resize(n_);
        std::iota(order_.begin(), order_.end(), 0);
        Shuffle(order_, rng_);
        cursor_ = 0;
      }
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  std::size_t n_;
  std::size_t batch_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

std::optional<double> ValidationAuc(std::span<const LabeledSample> samples,
                                    std::span<const std::size_t> val,
                                    const std::vector<std::vector<double>>& scores) {
  std::vector<ScoredSpan> rows;
  for (std::size_t k = 0; k < val.size(); ++k) {
    auto r = ScoreSpans(scores[k], samples[val[k]], Protocol::kLongForm, "probe");
    rows.insert(rows.end(), r.begin(), r.end());
  }
  std::size_t pos = 0;
  for (const auto& r : rows) pos += static_cast<std::size_t>(r.label);
  if (pos == 0 || pos == rows.size()) return std::nullopt;
  return Auc(Roc(rows));
}

// Runs one loss evaluation, tagging numeric failures with the step index.
template <typename Fn>
LossBreakdown LossAtStep(std::size_t step, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNumeric) throw;
    ThrowNumeric("optimizer step " + std::to_string(step) + ": " + e.what());
  }
}

void RecordStep(TrainReport& rep, double omega, const LossBreakdown& loss,
                std::size_t step) {
  if (!std::isfinite(loss.total)) {
    ThrowNumeric("non-finite loss at optimizer step " + std::to_string(step));
  }
  rep.omega_curve.push_back(omega);
  rep.probe_curve.push_back(loss.probe);
  rep.reg_curve.push_back(loss.reg);
  rep.total_curve.push_back(loss.total);
  rep.final_omega = omega;
}

void CheckSamples(std::span<const LabeledSample> samples) {
  if (samples.empty()) ThrowData("training needs at least one sample");
  std::size_t spans = 0;
  for (const auto& s : samples) spans += s.spans.size();
  if (spans == 0) ThrowData("training needs at least one labeled span");
}

TrainResult RunHeadTraining(std::span<const LabeledSample> samples,
                            std::vector<TraceExample> examples, int layer,
                            const TrainConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult result;
  const std::size_t d = examples.front().hidden.cols;
  result.head = ProbeHead::Zero(d, layer);
  auto [train_idx, val_idx] = SplitIndices(examples.size(), config);
  std::vector<TraceExample> train;
  for (auto i : train_idx) train.push_back(examples[i]);
  BatchSampler sampler(train.size(), config.batch_size, config.seed);
  Optimizer opt(config);
  for (std::size_t step = 0; step < config.steps; ++step) {
    const double omega = OmegaAtStep(step, config.steps);
    std::vector<TraceExample> batch;
    for (auto i : sampler.Next()) batch.push_back(train[i]);
    TrainableGradients g;
    LossBreakdown loss =
        LossAtStep(step, [&] { return HeadLoss(result.head, batch, omega, &g); });
    RecordStep(result.report, omega, loss, step);
    ApplyUpdates(opt, config, result.head, result.adapters, g);
  }
  std::vector<std::vector<double>> val_scores;
  for (auto i : val_idx) val_scores.push_back(HeadScores(examples[i].hidden, result.head));
  result.report.validation_auc = ValidationAuc(samples, val_idx, val_scores);
  result.report.steps = config.steps;
  result.report.train_samples = train_idx.size();
  result.report.validation_samples = val_idx.size();
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace

TrainResult TrainLinear(std::span<const LabeledSample> samples,
                        std::span<const ActivationTrace> traces,
                        const TrainConfig& config) {
  ValidateTrainConfig(config);
  if (config.use_lora) ThrowUsage("LoRA training needs the model, not traces");
  CheckSamples(samples);
  std::map<std::string, const ActivationTrace*> by_id;
  for (const auto& t : traces) by_id[t.sample_id] = &t;
  std::vector<TraceExample> examples;
  int layer = -1;
  for (const auto& s : samples) {
    auto it = by_id.find(s.id);
    if (it == by_id.end()) ThrowData("no trace for sample " + s.id);
    const ActivationTrace& t = *it->second;
    if (t.n != s.tokens.size()) {
      ThrowData("trace for " + s.id + " has " + std::to_string(t.n) + " tokens, sample has " +
                std::to_string(s.tokens.size()));
    }
    if (layer < 0) layer = static_cast<int>(t.layer);
    if (static_cast<int>(t.layer) != layer) ThrowData("traces mix probe layers");
    examples.push_back({t.HiddenMatrix(), MakeProbeExample(s, config.alpha)});
  }
  if (config.probe_layer >= 0 && config.probe_layer != layer) {
    ThrowUsage("traces were exported at layer " + std::to_string(layer) +
               " but probe_layer " + std::to_string(config.probe_layer) + " was requested");
  }
  return RunHeadTraining(samples, std::move(examples), layer, config);
}

TrainResult TrainWithModel(std::span<const LabeledSample> samples,
                           const ModelParams& params, const TrainConfig& config) {
  ValidateTrainConfig(config);
  CheckSamples(samples);
  const int layer = config.probe_layer >= 0 ? config.probe_layer
                                            : DefaultProbeLayer(params.config.n_layers);
  if (layer >= params.config.n_layers) {
    ThrowUsage("probe layer " + std::to_string(layer) + " out of range");
  }
  if (!config.use_lora) {
    std::vector<TraceExample> examples;
    for (const auto& s : samples) {
      const Sequence seq = MakeSequence(s.prompt, s.completion);
      ForwardResult fwd = Forward(params, nullptr, seq.tokens);
      const Matrix& stream = fwd.streams[static_cast<std::size_t>(layer)];
      Matrix hidden(seq.completion_length(), stream.cols);
      std::copy(stream.data.begin() + static_cast<std::ptrdiff_t>(seq.completion_begin * stream.cols),
                stream.data.end(), hidden.data.begin());
      examples.push_back({std::move(hidden), MakeProbeExample(s, config.alpha)});
    }
    return RunHeadTraining(samples, std::move(examples), layer, config);
  }

  const auto t0 = std::chrono::steady_clock::now();
  TrainResult result;
  result.head = ProbeHead::Zero(static_cast<std::size_t>(params.config.d_model), layer);
  result.adapters = MakeAdapters(params.config, layer, config.lora, config.seed);
  std::vector<ModelExample> examples;
  for (const auto& s : samples) examples.push_back(MakeModelExample(s, config.alpha));
  auto [train_idx, val_idx] = SplitIndices(examples.size(), config);
  BatchSampler sampler(train_idx.size(), config.batch_size, config.seed);
  Optimizer opt(config);
  LossSettings settings;
  settings.lambda_reg = config.lambda_reg;
  settings.regularizer = config.regularizer;
  for (std::size_t step = 0; step < config.steps; ++step) {
    settings.omega = OmegaAtStep(step, config.steps);
    std::vector<ModelExample> batch;
    for (auto i : sampler.Next()) batch.push_back(examples[train_idx[i]]);
    TrainableGradients g;
    LossBreakdown loss = LossAtStep(step, [&] {
      return ModelLoss(params, result.adapters, result.head, batch, settings, &g);
    });
    RecordStep(result.report, settings.omega, loss, step);
    ApplyUpdates(opt, config, result.head, result.adapters, g);
  }
  std::vector<std::vector<double>> val_scores;
  for (auto i : val_idx) {
    const Sequence& seq = examples[i].seq;
    ForwardResult fwd = Forward(params, &result.adapters, seq.tokens);
    const Matrix& stream = fwd.streams[static_cast<std::size_t>(layer)];
    std::vector<double> scores;
    for (std::size_t p = seq.completion_begin; p < seq.tokens.size(); ++p) {
      scores.push_back(Sigmoid(std::inner_product(result.head.w.begin(), result.head.w.end(),
                                                  stream.row(p), result.head.b)));
    }
    val_scores.push_back(std::move(scores));
  }
  result.report.validation_auc = ValidationAuc(samples, val_idx, val_scores);
  result.report.steps = config.steps;
  result.report.train_samples = train_idx.size();
  result.report.validation_samples = val_idx.size();
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace halluprobe
