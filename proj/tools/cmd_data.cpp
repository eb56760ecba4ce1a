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

// Data preparation commands: make-toy, init-model, align, annotate and
// inject-eval.

#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "common.hpp"
#include "halluprobe/annotate.hpp"
#include "halluprobe/binio.hpp"
#include "halluprobe/dataset_io.hpp"
#include "halluprobe/error.hpp"
#include "halluprobe/inject.hpp"
#include "halluprobe/rng.hpp"
#include "halluprobe/toy.hpp"

namespace halluprobe::cli {

namespace {

// Canned judge responses keyed by completion text, for offline annotation.
class FileJudge : public JudgeClient {
 public:
  explicit FileJudge(const fs::path& path) {
    std::istringstream in(binio::ReadFile(path));
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        auto j = nlohmann::json::parse(line);
        const auto& r = j.at("response");
        responses_[j.at("completion").get<std::string>()] =
            r.is_string() ? r.get<std::string>() : r.dump();
      } catch (const nlohmann::json::exception& e) {
        ThrowData(path.string() + " line " + std::to_string(n) + ": " + e.what());
      }
    }
  }

  std::string Complete(const JudgeRequest& request) override {
    auto it = responses_.find(request.completion);
    if (it == responses_.end()) ThrowExternal("no canned judge response for a completion");
    return it->second;
  }

 private:
  std::map<std::string, std::string> responses_;
};

void RegisterMakeToy(CLI::App& app, GlobalOptions& g) {
  struct Opts {
    std::string out;
    ToyCorpusOptions toy;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("make-toy", "Write the synthetic planted-task corpus");
  cmd->add_option("--out", o->out, "Dataset JSONL to write")->required();
  cmd->add_option("--samples", o->toy.samples, "Number of samples")->capture_default_str();
  cmd->add_option("--entities", o->toy.entities_per_sample, "Entities per sample")
      ->capture_default_str();
  cmd->add_option("--hallucination-rate", o->toy.hallucination_rate,
                  "Probability that an entity is hallucinated")
      ->capture_default_str();
  cmd->callback([o, &g, cmd] {
    o->toy.seed = g.seed;
    auto samples = MakeToyCorpus(o->toy);
    SaveDataset(samples, o->out);
    RunManifest m("make-toy", ConfigEcho(*cmd, g));
    m.AddOutput("dataset", o->out);
    FinishRun(g, m, o->out);
    Log(g, "wrote " + std::to_string(samples.size()) + " samples to " + o->out);
  });
}

void RegisterInitModel(CLI::App& app, GlobalOptions& g) {
  struct Opts {
    std::string out;
    ModelConfig config;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("init-model", "Write a seeded reference model checkpoint");
  cmd->add_option("--out", o->out, "Model checkpoint to write")->required();
  cmd->add_option("--d-model", o->config.d_model, "Residual width")->capture_default_str();
  cmd->add_option("--layers", o->config.n_layers, "Transformer blocks")->capture_default_str();
  cmd->add_option("--heads", o->config.n_heads, "Attention heads")->capture_default_str();
  cmd->add_option("--d-ff", o->config.d_ff, "MLP width (0 = 4 x d-model)")->capture_default_str();
  cmd->add_option("--max-seq-len", o->config.max_seq_len, "Context length")
      ->capture_default_str();
  cmd->callback([o, &g, cmd] {
    o->config.seed = g.seed;
    o->config.Validate();
    SaveModel(InitModel(o->config), o->out);
    RunManifest m("init-model", ConfigEcho(*cmd, g));
    m.AddOutput("model", o->out);
    FinishRun(g, m, o->out);
  });
}

void RegisterAlign(CLI::App& app, GlobalOptions& g) {
  struct Opts {
    std::string in;
    std::string out;
    std::string report;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("align", "Align annotations to tokens and report rejections");
  cmd->add_option("--in", o->in, "Input dataset JSONL")->required();
  cmd->add_option("--out", o->out, "Aligned dataset JSONL")->required();
  cmd->add_option("--report", o->report, "Rejection report JSON (default <out>.rejections.json)");
  cmd->callback([o, &g, cmd] {
    LoadReport load;
    auto samples = LoadDataset(o->in, &load);
    nlohmann::json rejections = nlohmann::json::array();
    for (const auto& r : load.rejections) rejections.push_back(r);
    std::size_t aligned = 0;
    std::size_t rejected = load.spans_rejected;
    for (auto& s : samples) {
      AlignStats st = AlignPending(s);
      aligned += st.aligned;
      rejected += st.rejected;
      for (const auto& r : st.rejections) rejections.push_back(s.id + ": " + r);
    }
    SaveDataset(samples, o->out);
    const std::string report_path = o->report.empty() ? o->out + ".rejections.json" : o->report;
    nlohmann::json rep = {{"records", load.records},
                          {"spans_with_offsets", load.spans_loaded},
                          {"spans_pending", load.spans_pending},
                          {"pending_aligned", aligned},
                          {"rejected", rejected},
                          {"rejections", rejections}};
    WriteText(report_path, rep.dump(2) + "\n");
    RunManifest m("align", ConfigEcho(*cmd, g));
    m.AddInput("dataset", o->in);
    m.AddOutput("dataset", o->out);
    m.AddOutput("report", report_path);
    FinishRun(g, m, o->out);
    Log(g, "aligned " + std::to_string(aligned) + " pending spans, rejected " +
               std::to_string(rejected));
  });
}

void RegisterAnnotate(CLI::App& app, GlobalOptions& g) {
  struct Opts {
    std::string in;
    std::string out;
    std::string ledger;
    std::string judge = "http";
    std::string responses;
    std::size_t max_in_flight = 4;
    bool ledger_latency = false;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("annotate", "Label entity spans with an external judge");
  cmd->add_option("--in", o->in, "Input dataset JSONL")->required();
  cmd->add_option("--out", o->out, "Labeled dataset JSONL")->required();
  cmd->add_option("--ledger", o->ledger, "Annotation ledger JSONL (default <out>.ledger.jsonl)");
  cmd->add_option("--judge", o->judge, "Judge backend")
      ->check(CLI::IsMember({"http", "file"}))
      ->capture_default_str();
  cmd->add_option("--responses", o->responses, "Canned responses JSONL for --judge file");
  cmd->add_option("--max-in-flight", o->max_in_flight, "Concurrent judge calls")
      ->capture_default_str();
  cmd->add_flag("--ledger-latency", o->ledger_latency, "Record call latency in the ledger");
  cmd->callback([o, &g, cmd] {
    auto samples = LoadDataset(o->in);
    std::unique_ptr<JudgeClient> judge;
    if (o->judge == "http") {
      judge = std::make_unique<HttpJudgeClient>(JudgeEndpoint::FromEnvironment());
    } else {
      if (o->responses.empty()) ThrowUsage("--judge file needs --responses");
      judge = std::make_unique<FileJudge>(o->responses);
    }
    auto ledger = AnnotateSamples(samples, *judge, o->max_in_flight);
    SaveDataset(samples, o->out);
    const std::string ledger_path = o->ledger.empty() ? o->out + ".ledger.jsonl" : o->ledger;
    std::string text;
    std::size_t rejected = 0;
    for (const auto& row : ledger) {
      text += row.ToJsonLine(o->ledger_latency);
      rejected += row.rejected;
    }
    WriteText(ledger_path, text);
    RunManifest m("annotate", ConfigEcho(*cmd, g));
    m.AddInput("dataset", o->in);
    if (!o->responses.empty()) m.AddInput("responses", o->responses);
    m.AddOutput("dataset", o->out);
    m.AddOutput("ledger", ledger_path);
    FinishRun(g, m, o->out);
    Log(g, "annotated " + std::to_string(samples.size()) + " samples, " +
               std::to_string(rejected) + " spans rejected");
  });
}

std::vector<std::string> ReadPassages(const fs::path& path) {
  std::istringstream in(binio::ReadFile(path));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) out.push_back(line);
  }
  if (out.empty()) ThrowData(path.string() + " contains no passages");
  return out;
}

void RegisterInjectEval(CLI::App& app, GlobalOptions& g) {
  struct Opts {
    std::string passages;
    std::string out;
    std::string records;
    std::string judge = "oracle";
    double rate = kDefaultInjectionRate;
    double flip_rate = 0.2;
    std::size_t max_in_flight = 4;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("inject-eval",
                                 "Inject known errors into passages and score the annotator");
  cmd->add_option("--passages", o->passages, "Text file with one passage per line")->required();
  cmd->add_option("--out", o->out, "Report JSON")->required();
  cmd->add_option("--records", o->records, "Injection records JSONL (default <out>.records.jsonl)");
  cmd->add_option("--judge", o->judge, "Judge backend")
      ->check(CLI::IsMember({"oracle", "flip", "adversarial", "http"}))
      ->capture_default_str();
  cmd->add_option("--rate", o->rate, "Edits per word")->capture_default_str();
  cmd->add_option("--flip-rate", o->flip_rate, "Label flip probability for --judge flip")
      ->capture_default_str();
  cmd->add_option("--max-in-flight", o->max_in_flight, "Concurrent judge calls")
      ->capture_default_str();
  cmd->callback([o, &g, cmd] {
    const auto passages = ReadPassages(o->passages);
    std::vector<InjectionRecord> records;
    std::vector<LabeledSample> samples;
    for (std::size_t i = 0; i < passages.size(); ++i) {
      records.push_back(InjectErrors(passages[i], DeriveSeed(g.seed, "passage", i), o->rate));
      LabeledSample s;
      char id[32];
      std::snprintf(id, sizeof(id), "passage-%05zu", i);
      s.id = id;
      s.completion = records.back().perturbed;
      samples.push_back(std::move(s));
    }
    std::unique_ptr<JudgeClient> judge;
    FlippingInjectionJudge* flipper = nullptr;
    if (o->judge == "oracle") {
      judge = std::make_unique<OracleInjectionJudge>(records);
    } else if (o->judge == "flip") {
      auto f = std::make_unique<FlippingInjectionJudge>(records, g.seed, o->flip_rate);
      flipper = f.get();
      judge = std::move(f);
    } else if (o->judge == "adversarial") {
      judge = std::make_unique<AdversarialJudge>(g.seed, 5);
    } else {
      judge = std::make_unique<HttpJudgeClient>(JudgeEndpoint::FromEnvironment());
    }
    auto ledger = AnnotateSamples(samples, *judge, o->max_in_flight);
    std::vector<std::vector<EntitySpan>> spans;
    for (const auto& s : samples) spans.push_back(s.spans);
    const PipelineScore score = EvaluatePipeline(records, spans);
    std::size_t rejected = 0;
    for (const auto& row : ledger) rejected += row.rejected;

    nlohmann::json rep = nlohmann::json::parse(score.ToJson());
    rep["passages"] = passages.size();
    rep["judge"] = o->judge;
    rep["spans_rejected"] = rejected;
    if (flipper != nullptr) {
      const auto b = flipper->bookkeeping();
      rep["flips"] = {{"edit_entries", b.edit_entries},
                      {"edit_flips", b.edit_flips},
                      {"clean_entries", b.clean_entries},
                      {"clean_flips", b.clean_flips}};
    }
    WriteText(o->out, rep.dump(2) + "\n");

    const std::string records_path = o->records.empty() ? o->out + ".records.jsonl" : o->records;
    std::string lines;
    for (const auto& r : records) {
      nlohmann::json edits = nlohmann::json::array();
      for (const auto& e : r.edits) {
        edits.push_back({{"start", e.start},
                         {"end", e.end},
                         {"original", e.original},
                         {"perturbed", e.perturbed},
                         {"kind", EditKindName(e.kind)}});
      }
      nlohmann::json j = {{"original", r.original}, {"perturbed", r.perturbed}, {"edits", edits}};
      lines += j.dump() + "\n";
    }
    WriteText(records_path, lines);
    RunManifest m("inject-eval", ConfigEcho(*cmd, g));
    m.AddInput("passages", o->passages);
    m.AddOutput("report", o->out);
    m.AddOutput("records", records_path);
    FinishRun(g, m, o->out);
    Log(g, "recall " + std::to_string(score.recall) + ", fpr " + std::to_string(score.fpr));
  });
}

}  // namespace

void RegisterDataCommands(CLI::App& app, GlobalOptions& global) {
  RegisterMakeToy(app, global);
  RegisterInitModel(app, global);
  RegisterAlign(app, global);
  RegisterAnnotate(app, global);
  RegisterInjectEval(app, global);
}

}  // namespace halluprobe::cli
