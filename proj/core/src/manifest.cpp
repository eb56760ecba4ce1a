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

#include "halluprobe/manifest.hpp"

#include <array>
#include <chrono>
#include <ctime>

#include <json.hpp>
#include <openssl/evp.h>

#include "halluprobe/binio.hpp"
#include "halluprobe/error.hpp"

namespace halluprobe {

std::string Sha256Hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    ThrowExternal("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xf]);
  }
  return out;
}

std::string Sha256File(const std::filesystem::path& path) {
  return Sha256Hex(binio::ReadFile(path));
}

namespace {

std::string UtcNow() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RunManifest::RunManifest(std::string command, std::string config_json)
    : command_(std::move(command)),
      config_json_(std::move(config_json)),
      started_utc_(UtcNow()) {}

void RunManifest::AddInput(const std::string& role, const std::filesystem::path& path) {
  inputs_.push_back({role, path});
}

void RunManifest::AddOutput(const std::string& role, const std::filesystem::path& path) {
  outputs_.push_back({role, path});
}

std::string RunManifest::ToJson(bool include_timestamp) const {
  auto list = [](const std::vector<Artifact>& items) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& a : items) {
      arr.push_back({{"role", a.role},
                     {"path", a.path.generic_string()},
                     {"sha256", Sha256File(a.path)}});
    }
    return arr;
  };
  nlohmann::json config;
  try {
    config = nlohmann::json::parse(config_json_);
  } catch (const nlohmann::json::exception&) {
    config = config_json_;
  }
  nlohmann::json j = {{"tool", "halluprobe"},
                      {"version", HALLUPROBE_VERSION},
                      {"command", command_},
                      {"config", config},
                      {"inputs", list(inputs_)},
                      {"outputs", list(outputs_)}};
  if (include_timestamp) j["started_utc"] = started_utc_;
  return j.dump(2) + "\n";
}

void RunManifest::Write(const std::filesystem::path& path) const {
  binio::WriteFileAtomic(path, ToJson());
}

}  // namespace halluprobe
