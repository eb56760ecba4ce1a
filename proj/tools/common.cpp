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

#include "common.hpp"

#include <algorithm>
#include <iostream>

#include <json.hpp>

#include "halluprobe/binio.hpp"
#include "halluprobe/error.hpp"

namespace halluprobe::cli {

void FinishRun(const GlobalOptions& global, const RunManifest& manifest,
               const fs::path& primary_output) {
  fs::path target;
  if (!global.manifest.empty()) {
    target = global.manifest;
  } else if (fs::is_directory(primary_output)) {
    target = primary_output / "manifest.json";
  } else {
    target = primary_output;
    target += ".manifest.json";
  }
  manifest.Write(target);
}

void Log(const GlobalOptions& global, const std::string& line) {
  if (!global.quiet) std::cerr << line << "\n";
}

std::string ConfigEcho(const CLI::App& command, const GlobalOptions& global) {
  nlohmann::json options = nlohmann::json::object();
  for (const CLI::Option* opt : command.get_options()) {
    const std::string name = opt->get_name();
    if (name.empty() || name == "--help" || name == "-h") continue;
    auto results = opt->reduced_results();
    if (results.empty()) {
      options[name] = opt->get_default_str();
    } else if (results.size() == 1) {
      options[name] = results.front();
    } else {
      options[name] = results;
    }
  }
  nlohmann::json j = {{"command", command.get_name()}, {"seed", global.seed}, {"options", options}};
  return j.dump();
}

std::map<std::string, ActivationTrace> LoadTraceDir(const fs::path& dir) {
  if (!fs::is_directory(dir)) ThrowUsage("trace directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".htrc") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::map<std::string, ActivationTrace> out;
  for (const auto& f : files) {
    ActivationTrace t = ReadTrace(f);
    out.emplace(t.sample_id, std::move(t));
  }
  return out;
}

std::vector<double> ProbeTokenScores(const LabeledSample& sample, const ProbeCheckpoint& probe,
                                     const ModelParams* model, const ActivationTrace* trace) {
  if (trace != nullptr && probe.adapters.empty()) {
    if (static_cast<int>(trace->layer) != probe.head.layer) {
      ThrowUsage("trace for " + sample.id + " was exported at layer " +
                 std::to_string(trace->layer) + " but the probe reads layer " +
                 std::to_string(probe.head.layer));
    }
    if (trace->n != sample.tokens.size()) {
      ThrowData("trace for " + sample.id + " does not match the sample's tokens");
    }
    return HeadScores(trace->HiddenMatrix(), probe.head);
  }
  if (model == nullptr) {
    ThrowUsage(probe.adapters.empty() ? "scoring needs --traces or --model"
                                      : "a LoRA probe needs --model to score");
  }
  const Sequence seq = MakeSequence(sample.prompt, sample.completion);
  ForwardResult fwd =
      Forward(*model, probe.adapters.empty() ? nullptr : &probe.adapters, seq.tokens);
  const Matrix& stream = fwd.streams.at(static_cast<std::size_t>(probe.head.layer));
  Matrix hidden(seq.completion_length(), stream.cols);
  std::copy(stream.data.begin() + static_cast<std::ptrdiff_t>(seq.completion_begin * stream.cols),
            stream.data.end(), hidden.data.begin());
  return HeadScores(hidden, probe.head);
}

void WriteText(const fs::path& path, const std::string& text) {
  binio::WriteFileAtomic(path, text);
}

}  // namespace halluprobe::cli
