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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "halluprobe/corpus.hpp"
#include "halluprobe/manifest.hpp"
#include "halluprobe/probe.hpp"
#include "halluprobe/refmodel.hpp"
#include "halluprobe/trace.hpp"
#include "halluprobe/train.hpp"

namespace halluprobe::cli {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::string manifest;  // overrides the default manifest location
  bool quiet = false;
};

// Each command registers itself as a subcommand of the root app.
void RegisterDataCommands(CLI::App& app, GlobalOptions& global);    // make-toy, init-model, align, annotate, inject-eval
void RegisterModelCommands(CLI::App& app, GlobalOptions& global);   // trace, train, score, baselines, monitor
void RegisterReportCommands(CLI::App& app, GlobalOptions& global);  // eval, render

// Writes the manifest next to the primary output ("<output>.manifest.json",
// or "manifest.json" inside an output directory) unless --manifest is set.
void FinishRun(const GlobalOptions& global, const RunManifest& manifest,
               const fs::path& primary_output);

void Log(const GlobalOptions& global, const std::string& line);

// JSON echo of the resolved options of a subcommand plus the global seed.
std::string ConfigEcho(const CLI::App& command, const GlobalOptions& global);

// Every "*.htrc" file in dir, keyed by sample id.
std::map<std::string, ActivationTrace> LoadTraceDir(const fs::path& dir);

// Per-token probe scores for a sample, from a trace when one is given and
// otherwise from a forward pass of the model.
std::vector<double> ProbeTokenScores(const LabeledSample& sample, const ProbeCheckpoint& probe,
                                     const ModelParams* model, const ActivationTrace* trace);

void WriteText(const fs::path& path, const std::string& text);

}  // namespace halluprobe::cli
