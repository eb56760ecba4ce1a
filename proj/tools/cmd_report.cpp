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

// Reporting commands: eval and render.

#include <iostream>
#include <memory>

#include <json.hpp>

#include "common.hpp"
#include "halluprobe/dataset_io.hpp"
#include "halluprobe/error.hpp"
#include "halluprobe/evalproto.hpp"

namespace halluprobe::cli {

namespace {

void RegisterEval(CLI::App& app, GlobalOptions& g) {
  struct Opts {
    std::vector<std::string> scores;
    std::string out;
    std::string selective_method;
    std::vector<double> thresholds;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("eval", "Compute AUC and R@0.1 from scored-span CSVs");
  cmd->add_option("--scores", o->scores, "Scored-span CSV (repeatable)")->required();
  cmd->add_option("--out", o->out, "Report JSON")->required();
  cmd->add_option("--selective-method", o->selective_method,
                  "Also report selective answering for this method's rows");
  cmd->add_option("--thresholds", o->thresholds,
                  "Selective-answering thresholds (default 0, 0.05, ..., 1)")
      ->delimiter(',');
  cmd->callback([o, &g, cmd] {
    RunManifest m("eval", ConfigEcho(*cmd, g));
    std::vector<ScoredSpan> rows;
    for (const auto& path : o->scores) {
      auto r = ReadScoredSpans(path);
      rows.insert(rows.end(), r.begin(), r.end());
      m.AddInput("scores", path);
    }
    nlohmann::json report = nlohmann::json::parse(ReportJson(EvaluateTable(rows)));
    if (!o->selective_method.empty()) {
      std::vector<AnswerRecord> answers;
      for (const auto& r : rows) {
        if (r.method == o->selective_method) answers.push_back({r.score, r.label == 0});
      }
      if (answers.empty()) ThrowData("no rows for method " + o->selective_method);
      std::vector<double> thresholds = o->thresholds;
      if (thresholds.empty()) {
        for (int i = 0; i <= 20; ++i) thresholds.push_back(i / 20.0);
      }
      nlohmann::json curve = nlohmann::json::array();
      for (const auto& p : SelectiveCurve(answers, thresholds)) {
        nlohmann::json point = {{"threshold", p.threshold},
                                {"attempt_rate", p.attempt_rate},
                                {"conditional_accuracy", nullptr}};
        if (p.conditional_accuracy) point["conditional_accuracy"] = *p.conditional_accuracy;
        curve.push_back(point);
      }
      report = {{"methods", report},
                {"selective", {{"method", o->selective_method}, {"curve", curve}}}};
    }
    WriteText(o->out, report.dump(2) + "\n");
    m.AddOutput("report", o->out);
    FinishRun(g, m, o->out);
  });
}

void RegisterRender(CLI::App& app, GlobalOptions& g) {
  struct Opts {
    std::string data;
    std::string sample_id;
    std::string probe;
    std::string traces;
    std::string model;
    std::string format = "ansi";
    double floor = 0.4;
    std::string out = "-";
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("render", "Highlight probe scores over a completion");
  cmd->add_option("--data", o->data, "Dataset JSONL")->required();
  cmd->add_option("--sample-id", o->sample_id, "Sample to render")->required();
  cmd->add_option("--probe", o->probe, "Probe checkpoint")->required();
  cmd->add_option("--traces", o->traces, "Trace directory (linear probes)");
  cmd->add_option("--model", o->model, "Model checkpoint");
  cmd->add_option("--format", o->format, "ansi or html")
      ->check(CLI::IsMember({"ansi", "html"}))
      ->capture_default_str();
  cmd->add_option("--floor", o->floor, "Scores below this are not highlighted")
      ->capture_default_str();
  cmd->add_option("--out", o->out, "Output file, - for stdout")->capture_default_str();
  cmd->callback([o, &g, cmd] {
    const auto samples = LoadDataset(o->data);
    const LabeledSample* sample = nullptr;
    for (const auto& s : samples) {
      if (s.id == o->sample_id) sample = &s;
    }
    if (sample == nullptr) ThrowData("sample " + o->sample_id + " not found in " + o->data);
    const ProbeCheckpoint probe = LoadProbe(o->probe);
    std::optional<ModelParams> model;
    if (!o->model.empty()) model = LoadModel(o->model);
    std::optional<ActivationTrace> trace;
    if (!o->traces.empty()) {
      trace = ReadTrace(fs::path(o->traces) / TraceFileName(sample->id));
    }
    const auto scores =
        ProbeTokenScores(*sample, probe, model ? &*model : nullptr, trace ? &*trace : nullptr);
    RenderOptions opt;
    opt.format = o->format == "html" ? RenderFormat::kHtml : RenderFormat::kAnsi;
    opt.display_floor = o->floor;
    const std::string text = RenderTranscript(*sample, scores, opt);
    if (o->out == "-") {
      std::cout << text;
      return;
    }
    WriteText(o->out, text);
    RunManifest m("render", ConfigEcho(*cmd, g));
    m.AddInput("dataset", o->data);
    m.AddInput("probe", o->probe);
    m.AddOutput("transcript", o->out);
    FinishRun(g, m, o->out);
  });
}

}  // namespace

void RegisterReportCommands(CLI::App& app, GlobalOptions& global) {
  RegisterEval(app, global);
  RegisterRender(app, global);
}

}  // namespace halluprobe::cli
