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

#include "toml_config.hpp"

#include <cstdio>

#include <toml.hpp>

#include "halluprobe/error.hpp"

namespace halluprobe::cli {

namespace {

std::string ScalarToString(const toml::node& node, const std::string& key) {
  if (auto s = node.value_exact<std::string>()) return *s;
  if (auto i = node.value_exact<std::int64_t>()) return std::to_string(*i);
  if (auto d = node.value_exact<double>()) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", *d);
    return buf;
  }
  if (auto b = node.value_exact<bool>()) return *b ? "true" : "false";
  ThrowUsage("config key \"" + key + "\" has an unsupported value type");
}

void Collect(const toml::table& table, std::vector<std::string>& parents,
             std::vector<CLI::ConfigItem>& out) {
  for (auto&& [k, node] : table) {
    const std::string key(k.str());
    if (const auto* sub = node.as_table()) {
      parents.push_back(key);
      Collect(*sub, parents, out);
      parents.pop_back();
      continue;
    }
    CLI::ConfigItem item;
    item.parents = parents;
    item.name = key;
    if (const auto* arr = node.as_array()) {
      for (const auto& el : *arr) item.inputs.push_back(ScalarToString(el, key));
    } else {
      item.inputs.push_back(ScalarToString(node, key));
    }
    out.push_back(std::move(item));
  }
}

}  // namespace

std::vector<CLI::ConfigItem> TomlConfig::from_config(std::istream& input) const {
  toml::table table;
  try {
    table = toml::parse(input);
  } catch (const toml::parse_error& e) {
    ThrowUsage(std::string("config file: ") + std::string(e.description()));
  }
  std::vector<std::string> parents;
  std::vector<CLI::ConfigItem> items;
  Collect(table, parents, items);
  return items;
}

}  // namespace halluprobe::cli
