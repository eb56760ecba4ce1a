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

// Model-facing commands: trace, train, score, baselines and monitor.

#include <memory>
#include <sstream>

#include <json.hpp>

#include "common.hpp"
#include "halluprobe/annotate.hpp"
#include "halluprobe/baselines.hpp"
#include "halluprobe/binio.hpp"
#include "halluprobe/dataset_io.hpp"
#include "halluprobe/error.hpp"
#include "halluprobe/evalproto.hpp"
#include "halluprobe/guard.hpp"
#include "halluprobe/rng.hpp"

namespace halluprobe::cli {

namespace {

void RegisterTrace(CLI::App& app, GlobalOptions& g) {
  struct Opts {
    std::string data;
    std::string model;
    std::string probe;
    std::string out_dir;
    int layer = -1;
    bool jsonl = false;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("trace", "Export probe-layer activation traces");
  cmd->add_option("--data", o->data, "Dataset JSONL")->required();
  cmd->add_option("--model", o->model, "Model checkpoint")->required();
  cmd->add_option("--probe", o->probe, "Probe checkpoint whose adapters and layer to use");
  cmd->add_option("--layer", o->layer, "Stream index (-1 = default probe layer)")
      ->capture_default_str();
  cmd->add_option("--out-dir", o->out_dir, "Directory for .htrc files")->required();
  cmd->add_flag("--jsonl", o->jsonl, "Also write a JSONL debug mirror per trace");
  cmd->callback([o, &g, cmd] {
    const auto samples = LoadDataset(o->data);
    const ModelParams params = LoadModel(o->model);
    std::optional<ProbeCheckpoint> probe;
    if (!o->probe.empty()) probe = LoadProbe(o->probe);
    int layer = o->layer;
    if (layer < 0) layer = probe ? probe->head.layer : DefaultProbeLayer(params.config.n_layers);
    if (layer >= params.config.n_layers) ThrowUsage("--layer out of range for this model");
    const AdapterSet* adapters = probe && !probe->adapters.empty() ? &probe->adapters : nullptr;
    fs::create_directories(o->out_dir);
    RunManifest m("trace", ConfigEcho(*cmd, g));
    m.AddInput("dataset", o->data);
    m.AddInput("model", o->model);
    if (probe) m.AddInput("probe", o->probe);
    for (const auto& s : samples) {
      const Sequence seq = MakeSequence(s.prompt, s.completion);
      ActivationTrace t = ExportTrace(params, adapters, seq, layer, s.id);
      const fs::path path = fs::path(o->out_dir) / TraceFileName(s.id);
      WriteTrace(t, path);
      m.AddOutput("trace", path);
      if (o->jsonl) {
        fs::path jpath = path;
        jpath.replace_extension(".jsonl");
        WriteTraceJsonl(t, jpath);
      }
    }
    FinishRun(g, m, o->out_dir);
    Log(g, "wrote " + std::to_string(samples.size()) + " traces at layer " +
               std::to_string(layer));
  });
}

void RegisterTrain(CLI::App& app, GlobalOptions& g) {
  struct Opts {
    std::string data;
    std::string traces;
    std::string model;
    std::string out;
    std::string report;
    std::string curves;
    std::string regularizer = "none";
    std::string optimizer = "sgd";
    TrainConfig config;
  };
  auto o = std::make_shared<Opts>();
  TrainConfig& c = o->config;
  auto* cmd = app.add_subcommand("train", "Train a probe head, optionally with LoRA adapters");
  cmd->add_option("--data", o->data, "Dataset JSONL")->required();
  auto* traces = cmd->add_option("--traces", o->traces, "Trace directory (linear probe)");
  auto* model = cmd->add_option("--model", o->model, "Model checkpoint");
  traces->excludes(model);
  cmd->add_option("--out", o->out, "Probe checkpoint to write")->required();
  cmd->add_option("--report", o->report, "Training report JSON (default <out>.report.json)");
  cmd->add_option("--curves", o->curves, "Loss curves CSV (default <out>.curves.csv)");
  cmd->add_flag("--lora", c.use_lora, "Train LoRA adapters below the probe layer");
  cmd->add_option("--lambda-reg", c.lambda_reg, "Regularization weight")->capture_default_str();
  cmd->add_option("--regularizer", o->regularizer, "none, lm or kl")->capture_default_str();
  cmd->add_option("--alpha", c.alpha, "Weight of hallucinated tokens")->capture_default_str();
  cmd->add_option("--optimizer", o->optimizer, "sgd, momentum or adam")->capture_default_str();
  cmd->add_option("--lr-head", c.lr_head, "Head learning rate")->capture_default_str();
  cmd->add_option("--lr-adapter", c.lr_adapter, "Adapter learning rate")->capture_default_str();
  cmd->add_option("--momentum", c.momentum, "Momentum coefficient")->capture_default_str();
  cmd->add_option("--steps", c.steps, "Optimizer steps")->capture_default_str();
  cmd->add_option("--batch-size", c.batch_size, "Samples per step")->capture_default_str();
  cmd->add_option("--layer", c.probe_layer, "Probe layer (-1 = default)")->capture_default_str();
  cmd->add_option("--lora-rank", c.lora.rank, "Adapter rank")->capture_default_str();
  cmd->add_option("--lora-alpha", c.lora.alpha, "Adapter scale numerator")->capture_default_str();
  cmd->add_option("--validation-fraction", c.validation_fraction,
                  "Held-out fraction for the validation AUC")
      ->capture_default_str();
  cmd->callback([o, &g, cmd] {
    TrainConfig config = o->config;
    config.seed = g.seed;
    config.regularizer = ParseRegularizer(o->regularizer);
    config.optimizer = ParseOptimizer(o->optimizer);
    ValidateTrainConfig(config);
    if (o->traces.empty() && o->model.empty()) ThrowUsage("train needs --traces or --model");
    if (config.use_lora && o->model.empty()) ThrowUsage("--lora needs --model");
    const auto samples = LoadDataset(o->data);
    RunManifest m("train", ConfigEcho(*cmd, g));
    m.AddInput("dataset", o->data);
    TrainResult result;
    if (!o->traces.empty()) {
      auto by_id = LoadTraceDir(o->traces);
      std::vector<ActivationTrace> traces;
      for (const auto& s : samples) {
        auto it = by_id.find(s.id);
        if (it == by_id.end()) ThrowData("no trace for sample " + s.id + " in " + o->traces);
        traces.push_back(std::move(it->second));
        m.AddInput("trace", fs::path(o->traces) / TraceFileName(s.id));
      }
      result = TrainLinear(samples, traces, config);
    } else {
      m.AddInput("model", o->model);
      result = TrainWithModel(samples, LoadModel(o->model), config);
    }
    SaveProbe(result.head, result.adapters, config, o->out);
    const std::string report = o->report.empty() ? o->out + ".report.json" : o->report;
    const std::string curves = o->curves.empty() ? o->out + ".curves.csv" : o->curves;
    WriteText(report, result.report.ToJson(false));
    WriteText(curves, result.report.CurvesCsv());
    m.AddOutput("probe", o->out);
    m.AddOutput("report", report);
    m.AddOutput("curves", curves);
    FinishRun(g, m, o->out);
    std::ostringstream msg;
    msg << "trained " << (config.use_lora ? "LoRA" : "linear") << " probe in "
        << result.report.wall_seconds << " s; loss " << result.report.total_curve.front()
        << " -> " << result.report.total_curve.back();
    if (result.report.validation_auc) msg << "; validation AUC " << *result.report.validation_auc;
    Log(g, msg.str());
  });
}

void RegisterScore(CLI::App& app, GlobalOptions& g) {
  struct Opts {
    std::string probe;
    std::string data;
    std::string traces;
    std::string model;
    std::string protocol = "longform";
    std::string method;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("score", "Score spans with a trained probe");
  cmd->add_option("--probe", o->probe, "Probe checkpoint")->required();
  cmd->add_option("--data", o->data, "Dataset JSONL")->required();
  cmd->add_option("--traces", o->traces, "Trace directory (linear probes)");
  cmd->add_option("--model", o->model, "Model checkpoint");
  cmd->add_option("--protocol", o->protocol, "longform, shortform or reasoning")
      ->capture_default_str();
  cmd->add_option("--method", o->method, "Method name in the CSV (default by probe kind)");
  cmd->add_option("--out", o->out, "Scored-span CSV")->required();
  cmd->callback([o, &g, cmd] {
    const Protocol protocol = ParseProtocol(o->protocol);
    const auto samples = LoadDataset(o->data);
    const ProbeCheckpoint probe = LoadProbe(o->probe);
    std::optional<ModelParams> model;
    if (!o->model.empty()) model = LoadModel(o->model);
    std::map<std::string, ActivationTrace> traces;
    if (!o->traces.empty()) traces = LoadTraceDir(o->traces);
    const std::string method =
        !o->method.empty() ? o->method : (probe.adapters.empty() ? "linear_probe" : "lora_probe");
    std::vector<ScoredSpan> rows;
    for (const auto& s : samples) {
      const ActivationTrace* t = nullptr;
      if (auto it = traces.find(s.id); it != traces.end()) t = &it->second;
      if (!o->traces.empty() && t == nullptr && !model) {
        ThrowData("no trace for sample " + s.id);
      }
      const auto scores = ProbeTokenScores(s, probe, model ? &*model : nullptr, t);
      auto r = ScoreSpans(scores, s, protocol, method);
      rows.insert(rows.end(), r.begin(), r.end());
    }
    WriteScoredSpans(rows, o->out);
    RunManifest m("score", ConfigEcho(*cmd, g));
    m.AddInput("probe", o->probe);
    m.AddInput("dataset", o->data);
    if (!o->model.empty()) m.AddInput("model", o->model);
    m.AddOutput("scores", o->out);
    FinishRun(g, m, o->out);
  });
}

void RegisterBaselines(CLI::App& app, GlobalOptions& g) {
  struct Opts {
    std::string data;
    std::string traces;
    std::string model;
    std::vector<std::string> methods = {"token_entropy", "perplexity"};
    std::string protocol = "longform";
    std::string oracle = "exact";
    std::size_t k = 10;
    double temperature = 1.0;
    bool extract_answer = false;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("baselines", "Score spans with uncertainty baselines");
  cmd->add_option("--data", o->data, "Dataset JSONL")->required();
  cmd->add_option("--traces", o->traces, "Trace directory (token entropy, perplexity)");
  cmd->add_option("--model", o->model, "Model checkpoint (semantic entropy generator)");
  cmd->add_option("--methods", o->methods, "token_entropy, perplexity, semantic_entropy")
      ->check(CLI::IsMember({"token_entropy", "perplexity", "semantic_entropy"}))
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--protocol", o->protocol, "longform, shortform or reasoning")
      ->capture_default_str();
  cmd->add_option("--oracle", o->oracle, "Entailment oracle: exact, normalized or http")
      ->check(CLI::IsMember({"exact", "normalized", "http"}))
      ->capture_default_str();
  cmd->add_option("--k", o->k, "Continuations per span")->capture_default_str();
  cmd->add_option("--temperature", o->temperature, "Sampling temperature for continuations")
      ->capture_default_str();
  cmd->add_flag("--extract-answer", o->extract_answer,
                "Compare extracted final answers instead of raw continuations");
  cmd->add_option("--out", o->out, "Scored-span CSV")->required();
  cmd->callback([o, &g, cmd] {
    const Protocol protocol = ParseProtocol(o->protocol);
    const auto samples = LoadDataset(o->data);
    RunManifest m("baselines", ConfigEcho(*cmd, g));
    m.AddInput("dataset", o->data);
    std::vector<ScoredSpan> rows;
    std::map<std::string, ActivationTrace> traces;
    std::optional<ModelParams> model;
    std::unique_ptr<EntailmentOracle> oracle;
    for (const auto& method : o->methods) {
      if (method == "semantic_entropy") {
        if (o->model.empty()) ThrowUsage("semantic_entropy needs --model");
        if (!model) {
          model = LoadModel(o->model);
          m.AddInput("model", o->model);
        }
        if (o->oracle == "exact") {
          oracle = std::make_unique<ExactMatchOracle>();
        } else if (o->oracle == "normalized") {
          oracle = std::make_unique<NormalizedMatchOracle>();
        } else {
          const JudgeEndpoint e = JudgeEndpoint::FromEnvironment();
          oracle = std::make_unique<HttpEntailmentOracle>(e.url, e.token);
        }
      } else if (traces.empty()) {
        if (o->traces.empty()) ThrowUsage(method + " needs --traces");
        traces = LoadTraceDir(o->traces);
      }
    }
    for (const auto& s : samples) {
      for (const auto& method : o->methods) {
        if (method != "semantic_entropy") {
          auto it = traces.find(s.id);
          if (it == traces.end()) ThrowData("no trace for sample " + s.id);
          const auto scores = method == "token_entropy" ? EntropyScores(it->second)
                                                        : PerplexityScores(it->second);
          auto r = ScoreSpans(scores, s, protocol, method);
          rows.insert(rows.end(), r.begin(), r.end());
          continue;
        }
        const auto generator = MakeModelGenerator(
            *model, nullptr, o->temperature, DeriveSeed(g.seed, s.id));
        SpanEntropyOptions opt;
        opt.k = o->k;
        if (o->extract_answer) opt.extractor = RegexAnswerExtractor;
        if (protocol == Protocol::kReasoning) {
          if (!s.completion_label) ThrowData("sample " + s.id + " lacks completion_label");
          if (s.tokens.empty()) ThrowData("sample " + s.id + " has an empty completion");
          EntitySpan whole;
          whole.text = s.completion;
          whole.char_end = s.completion.size();
          whole.token_start = 0;
          whole.token_end = s.tokens.size() - 1;
          rows.push_back({s.id, "completion", method,
                          SpanSemanticEntropy(s, whole, generator, *oracle, opt),
                          *s.completion_label});
          continue;
        }
        if (protocol == Protocol::kShortForm && s.spans.size() != 1) {
          ThrowData("sample " + s.id + ": short-form protocol needs exactly one answer span");
        }
        for (std::size_t i = 0; i < s.spans.size(); ++i) {
          rows.push_back({s.id, std::to_string(i), method,
                          SpanSemanticEntropy(s, s.spans[i], generator, *oracle, opt),
                          s.spans[i].binary_label()});
        }
      }
    }
    WriteScoredSpans(rows, o->out);
    m.AddOutput("scores", o->out);
    FinishRun(g, m, o->out);
  });
}

void RegisterMonitor(CLI::App& app, GlobalOptions& g) {
  struct Opts {
    std::string model;
    std::string probe;
    std::string prompts;
    std::string out;
    MonitorConfig config;
  };
  auto o = std::make_shared<Opts>();
  MonitorConfig& c = o->config;
  auto* cmd = app.add_subcommand("monitor", "Generate with streaming abstention");
  cmd->add_option("--model", o->model, "Model checkpoint")->required();
  cmd->add_option("--probe", o->probe, "Probe checkpoint")->required();
  cmd->add_option("--prompts", o->prompts, "JSONL with {\"id\", \"prompt\"} per line")->required();
  cmd->add_option("--out", o->out, "Outcome ledger JSONL")->required();
  cmd->add_option("--threshold", c.threshold, "Abstain when a score exceeds this")
      ->capture_default_str();
  cmd->add_option("--max-new-tokens", c.max_new_tokens, "Generation budget")
      ->capture_default_str();
  cmd->add_option("--temperature", c.temperature, "Sampling temperature (0 = greedy)")
      ->capture_default_str();
  cmd->add_option("--abstain-message", c.abstain_message, "Text returned on abstention")
      ->capture_default_str();
  cmd->callback([o, &g, cmd] {
    MonitorConfig config = o->config;
    config.seed = g.seed;
    config.Validate();
    const ModelParams params = LoadModel(o->model);
    const ProbeCheckpoint probe = LoadProbe(o->probe);
    std::istringstream in(binio::ReadFile(o->prompts));
    std::string line;
    std::string ledger;
    std::size_t n = 0;
    std::size_t abstained = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::string id;
      std::string prompt;
      try {
        auto j = nlohmann::json::parse(line);
        id = j.at("id").get<std::string>();
        prompt = j.at("prompt").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        ThrowData(o->prompts + " line " + std::to_string(n) + ": " + e.what());
      }
      MonitorConfig per_prompt = config;
      per_prompt.seed = DeriveSeed(g.seed, id);
      const MonitorOutcome out = RunMonitored(
          params, probe.head, probe.adapters.empty() ? nullptr : &probe.adapters, prompt,
          per_prompt);
      if (out.status == MonitorStatus::kAbstained) ++abstained;
      ledger += out.ToJsonLine(id);
    }
    WriteText(o->out, ledger);
    RunManifest m("monitor", ConfigEcho(*cmd, g));
    m.AddInput("model", o->model);
    m.AddInput("probe", o->probe);
    m.AddInput("prompts", o->prompts);
    m.AddOutput("ledger", o->out);
    FinishRun(g, m, o->out);
    Log(g, "abstained on " + std::to_string(abstained) + " prompts");
  });
}

}  // namespace

void RegisterModelCommands(CLI::App& app, GlobalOptions& global) {
  RegisterTrace(app, global);
  RegisterTrain(app, global);
  RegisterScore(app, global);
  RegisterBaselines(app, global);
  RegisterMonitor(app, global);
}

}  // namespace halluprobe::cli
