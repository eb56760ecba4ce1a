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

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "halluprobe/corpus.hpp"
#include "halluprobe/tokenizer.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("halluprobe-test-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// A tokenized sample with spans located by text (first occurrence).
inline halluprobe::LabeledSample MakeSample(
    const std::string& id, const std::string& prompt, const std::string& completion,
    const std::vector<std::pair<std::string, halluprobe::VerificationLabel>>& spans = {}) {
  halluprobe::LabeledSample s;
  s.id = id;
  s.prompt = prompt;
  s.completion = completion;
  s.tokens = halluprobe::ByteTokenizer{}.Encode(completion);
  halluprobe::SpanAligner aligner(s.completion, s.tokens);
  for (const auto& [text, label] : spans) {
    auto r = aligner.Align({text, label, ""});
    if (r.accepted()) s.spans.push_back(*r.span);
  }
  return s;
}

}  // namespace testing
