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

#include <cmath>

#include <json.hpp>

#include "halluprobe/binio.hpp"
#include "halluprobe/error.hpp"
#include "halluprobe/train.hpp"

namespace halluprobe {

namespace {

constexpr char kProbeMagic[4] = {'H', 'P', 'R', 'B'};
constexpr std::uint32_t kProbeVersion = 1;

void CheckFinite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) ThrowNumeric("probe checkpoint: non-finite parameter");
  }
}

}  // namespace

void SaveProbe(const ProbeHead& head, const AdapterSet& adapters,
               const TrainConfig& config, const std::filesystem::path& path) {
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto& a : adapters.adapters) {
    shapes.push_back({{"layer", a.layer},
                      {"target", AttnMatrixName(a.target)},
                      {"rank", a.rank},
                      {"alpha", a.alpha},
                      {"a", {a.a.rows, a.a.cols}},
                      {"b", {a.b.rows, a.b.cols}}});
  }
  nlohmann::json header = {{"version", HALLUPROBE_VERSION},
                           {"d", head.w.size()},
                           {"layer", head.layer},
                           {"config", nlohmann::json::parse(config.ToJson())},
                           {"adapters", shapes}};
  binio::Writer w;
  w.Bytes(std::string_view(kProbeMagic, 4));
  w.U32(kProbeVersion);
  w.String(header.dump());
  CheckFinite(head.w);
  CheckFinite(std::span<const double>(&head.b, 1));
  w.F64s(head.w);
  w.F64(head.b);
  for (const auto& a : adapters.adapters) {
    CheckFinite(a.a.data);
    CheckFinite(a.b.data);
    w.F64s(a.a.data);
    w.F64s(a.b.data);
  }
  binio::WriteFileAtomic(path, w.buffer());
}

ProbeCheckpoint LoadProbe(const std::filesystem::path& path) {
  const std::string raw = binio::ReadFile(path);
  const std::string what = "probe checkpoint " + path.string();
  binio::Reader r(raw, what);
  if (r.Bytes(4) != std::string_view(kProbeMagic, 4)) ThrowData(what + ": bad magic");
  if (const auto v = r.U32(); v != kProbeVersion) {
    ThrowData(what + ": unsupported version " + std::to_string(v));
  }
  ProbeCheckpoint ck;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.String());
    ck.config = TrainConfig::FromJson(header.at("config").dump());
    ck.head = ProbeHead::Zero(header.at("d").get<std::size_t>(), header.at("layer").get<int>());
    for (const auto& s : header.at("adapters")) {
      LoraAdapter a;
      a.layer = s.at("layer").get<int>();
      const auto t = s.at("target").get<std::string>();
      if (t == "Q") a.target = AttnMatrix::kQ;
      else if (t == "K") a.target = AttnMatrix::kK;
      else if (t == "V") a.target = AttnMatrix::kV;
      else if (t == "O") a.target = AttnMatrix::kO;
      else ThrowData(what + ": unknown adapter target " + t);
      a.rank = s.at("rank").get<int>();
      a.alpha = s.at("alpha").get<double>();
      a.a = Matrix(s.at("a").at(0).get<std::size_t>(), s.at("a").at(1).get<std::size_t>());
      a.b = Matrix(s.at("b").at(0).get<std::size_t>(), s.at("b").at(1).get<std::size_t>());
      ck.adapters.adapters.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    ThrowData(what + ": bad header: " + e.what());
  }
  r.F64s(ck.head.w);
  ck.head.b = r.F64();
  for (auto& a : ck.adapters.adapters) {
    r.F64s(a.a.data);
    r.F64s(a.b.data);
  }
  r.ExpectEnd();
  return ck;
}

}  // namespace halluprobe
