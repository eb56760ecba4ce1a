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
#include <filesystem>
#include <string>
#include <vector>

#include "halluprobe/corpus.hpp"

namespace halluprobe {

struct LoadReport {
  std::size_t records = 0;
  std::size_t spans_loaded = 0;
  std::size_t spans_pending = 0;
  std::size_t spans_rejected = 0;
  // "line N: <span text>: <reason>" for every rejected span.
  std::vector<std::string> rejections;
};

// Reads the dataset JSONL. Token offsets are recomputed with the byte
// tokenizer. Malformed records and duplicate ids throw a data error naming
// the line; spans whose offsets disagree with the completion are dropped
// and listed in the report.
std::vector<LabeledSample> LoadDataset(const std::filesystem::path& path,
                                       LoadReport* report = nullptr);

void SaveDataset(const std::vector<LabeledSample>& samples,
                 const std::filesystem::path& path);

// Single-record codec used by the loader, the saver and the CLI.
std::string SampleToJsonLine(const LabeledSample& sample);

}  // namespace halluprobe
