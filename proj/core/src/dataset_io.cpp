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

#include "halluprobe/dataset_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "halluprobe/binio.hpp"
#include "halluprobe/error.hpp"

namespace halluprobe {
namespace {

using nlohmann::json;

[[noreturn]] void Fail(std::size_t line, const std::string& msg) {
  ThrowData("line " + std::to_string(line) + ": " + msg);
}

const json& Require(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) Fail(line, std::string("missing field \"") + key + "\"");
  return *it;
}

std::string RequireString(const json& obj, const char* key, std::size_t line) {
  const json& v = Require(obj, key, line);
  if (!v.is_string()) Fail(line, std::string("field \"") + key + "\" must be a string");
  return v.get<std::string>();
}

std::string OptionalString(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string()) Fail(line, std::string("field \"") + key + "\" must be a string");
  return it->get<std::string>();
}

std::optional<std::size_t> OptionalOffset(const json& obj, const char* key,
                                          std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer() || it->get<long long>() < 0) {
    Fail(line, std::string("span field \"") + key +
                   "\" must be a non-negative integer");
  }
  return static_cast<std::size_t>(it->get<long long>());
}

}  // namespace

std::string SampleToJsonLine(const LabeledSample& sample) {
  json spans = json::array();
  for (const auto& s : sample.spans) {
    spans.push_back({{"text", s.text},
                     {"char_start", s.char_start},
                     {"char_end", s.char_end},
                     {"label", LabelName(s.label)},
                     {"note", s.note}});
  }
  for (const auto& p : sample.pending) {
    spans.push_back({{"text", p.text},
                     {"char_start", nullptr},
                     {"char_end", nullptr},
                     {"label", LabelName(p.label)},
                     {"note", p.note}});
  }
  json obj = {{"id", sample.id},
              {"prompt", sample.prompt},
              {"completion", sample.completion},
              {"source_tag", sample.source_tag},
              {"completion_label", nullptr},
              {"spans", std::move(spans)}};
  if (sample.completion_label) obj["completion_label"] = *sample.completion_label;
  return obj.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::vector<LabeledSample> LoadDataset(const std::filesystem::path& path,
                                       LoadReport* report) {
  std::ifstream in(path);
  if (!in) ThrowData("cannot open dataset " + path.string());
  LoadReport rep;
  ByteTokenizer tokenizer;
  std::vector<LabeledSample> out;
  std::set<std::string> ids;
  std::string line_text;
  std::size_t line = 0;
  while (std::getline(in, line_text)) {
    ++line;
    if (line_text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line_text);
    } catch (const json::parse_error& e) {
      Fail(line, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) Fail(line, "record must be a JSON object");

    LabeledSample s;
    s.id = RequireString(obj, "id", line);
    s.prompt = RequireString(obj, "prompt", line);
    s.completion = RequireString(obj, "completion", line);
    s.source_tag = OptionalString(obj, "source_tag", line);
    if (auto it = obj.find("completion_label"); it != obj.end() && !it->is_null()) {
      if (!it->is_number_integer() || (it->get<int>() != 0 && it->get<int>() != 1)) {
        Fail(line, "completion_label must be 0, 1 or null");
      }
      s.completion_label = it->get<int>();
    }
    if (!ids.insert(s.id).second) Fail(line, "duplicate id \"" + s.id + "\"");
    s.tokens = tokenizer.Encode(s.completion);

    const json& spans = Require(obj, "spans", line);
    if (!spans.is_array()) Fail(line, "field \"spans\" must be an array");
    for (const auto& js : spans) {
      if (!js.is_object()) Fail(line, "span must be an object");
      const std::string text = RequireString(js, "text", line);
      const std::string label_name = RequireString(js, "label", line);
      auto label = ParseLabel(label_name);
      if (!label) Fail(line, "unknown span label \"" + label_name + "\"");
      const std::string note = OptionalString(js, "note", line);
      auto cs = OptionalOffset(js, "char_start", line);
      auto ce = OptionalOffset(js, "char_end", line);
      if (!cs && !ce) {
        s.pending.push_back({text, *label, note});
        ++rep.spans_pending;
        continue;
      }
      if (!cs || !ce) Fail(line, "span offsets must both be set or both null");
      EntitySpan span;
      span.text = text;
      span.char_start = *cs;
      span.char_end = *ce;
      span.label = *label;
      span.note = note;
      std::string reason = CheckSpanAgainstCompletion(s.completion, span);
      std::optional<std::pair<std::size_t, std::size_t>> range;
      if (reason.empty()) {
        range = TokenRangeForChars(s.tokens, span.char_start, span.char_end);
        if (!range) reason = "no token covers the span";
      }
      if (!reason.empty()) {
        ++rep.spans_rejected;
        rep.rejections.push_back("line " + std::to_string(line) + ": " + text +
                                 ": " + reason);
        continue;
      }
      span.token_start = range->first;
      span.token_end = range->second;
      s.spans.push_back(std::move(span));
      ++rep.spans_loaded;
    }
    s.spans = MergeDuplicateSpans(std::move(s.spans));
    out.push_back(std::move(s));
  }
  rep.records = out.size();
  if (report) *report = std::move(rep);
  return out;
}

void SaveDataset(const std::vector<LabeledSample>& samples,
                 const std::filesystem::path& path) {
  std::ostringstream os;
  for (const auto& s : samples) os << SampleToJsonLine(s) << '\n';
  binio::WriteFileAtomic(path, os.str());
}

}  // namespace halluprobe
