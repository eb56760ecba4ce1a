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

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace halluprobe {

std::string Sha256Hex(std::string_view data);
std::string Sha256File(const std::filesystem::path& path);

// Per-run record of the command, its resolved configuration and the hashes
// of every input and output artifact.
class RunManifest {
 public:
  RunManifest(std::string command, std::string config_json);

  void AddInput(const std::string& role, const std::filesystem::path& path);
  void AddOutput(const std::string& role, const std::filesystem::path& path);

  // Hashes are taken when this is called, so outputs must be complete.
  std::string ToJson(bool include_timestamp = true) const;
  void Write(const std::filesystem::path& path) const;

 private:
  struct Artifact {
    std::string role;
    std::filesystem::path path;
  };
  std::string command_;
  std::string config_json_;
  std::string started_utc_;
  std::vector<Artifact> inputs_;
  std::vector<Artifact> outputs_;
};

}  // namespace halluprobe
