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

#include "halluprobe/trace.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "halluprobe/binio.hpp"
#include "halluprobe/error.hpp"

namespace halluprobe {
namespace {

constexpr char kMagic[4] = {'H', 'T', 'R', 'C'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

Matrix ActivationTrace::HiddenMatrix() const {
  Matrix m(n, d);
  for (std::size_t i = 0; i < hidden.size(); ++i) m.data[i] = hidden[i];
  return m;
}

void ActivationTrace::Validate() const {
  const std::string where = "trace " + sample_id + ": ";
  if (hidden.size() != static_cast<std::size_t>(n) * d) {
    ThrowData(where + "hidden has " + std::to_string(hidden.size()) +
              " values, expected n*d");
  }
  if (chosen_logprob.size() != n || next_token_entropy.size() != n) {
    ThrowData(where + "per-token arrays do not match n");
  }
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (!std::isfinite(hidden[i])) {
      ThrowData(where + "non-finite hidden value at row " + std::to_string(i / (d ? d : 1)));
    }
  }
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!std::isfinite(chosen_logprob[i]) || chosen_logprob[i] > 0.0) {
      ThrowData(where + "chosen_logprob at token " + std::to_string(i) +
                " must be finite and <= 0");
    }
    if (!std::isfinite(next_token_entropy[i]) || next_token_entropy[i] < 0.0) {
      ThrowData(where + "next_token_entropy at token " + std::to_string(i) +
                " must be finite and >= 0");
    }
  }
}

void WriteTrace(const ActivationTrace& trace, const std::filesystem::path& path) {
  if (trace.hidden.size() != static_cast<std::size_t>(trace.n) * trace.d ||
      trace.chosen_logprob.size() != trace.n ||
      trace.next_token_entropy.size() != trace.n) {
    ThrowData("trace " + trace.sample_id + ": inconsistent dimensions");
  }
  binio::Writer w;
  w.Bytes(std::string_view(kMagic, 4));
  w.U32(kVersion);
  w.U32(trace.layer);
  w.U32(trace.d);
  w.U32(trace.n);
  for (float v : trace.hidden) {
    if (!std::isfinite(v)) ThrowNumeric("trace " + trace.sample_id + ": non-finite hidden value");
    w.F32(v);
  }
  for (double v : trace.chosen_logprob) {
    if (!std::isfinite(v)) ThrowNumeric("trace " + trace.sample_id + ": non-finite logprob");
  }
  for (double v : trace.next_token_entropy) {
    if (!std::isfinite(v)) ThrowNumeric("trace " + trace.sample_id + ": non-finite entropy");
  }
  w.F64s(trace.chosen_logprob);
  w.F64s(trace.next_token_entropy);
  binio::WriteFileAtomic(path, w.buffer());
}

ActivationTrace ReadTrace(const std::filesystem::path& path) {
  const std::string raw = binio::ReadFile(path);
  binio::Reader r(raw, "trace " + path.string());
  if (r.Bytes(4) != std::string_view(kMagic, 4)) {
    ThrowData("trace " + path.string() + ": bad magic (not an HTRC file)");
  }
  if (const auto v = r.U32(); v != kVersion) {
    ThrowData("trace " + path.string() + ": unsupported HTRC version " + std::to_string(v));
  }
  ActivationTrace t;
  t.sample_id = SampleIdFromTraceFile(path);
  t.layer = r.U32();
  t.d = r.U32();
  t.n = r.U32();
  const std::size_t count = static_cast<std::size_t>(t.n) * t.d;
  if (r.remaining() != count * 4 + static_cast<std::size_t>(t.n) * 16) {
    ThrowData("trace " + path.string() + ": truncated or oversized payload for n=" +
              std::to_string(t.n) + ", d=" + std::to_string(t.d));
  }
  t.hidden.resize(count);
  for (auto& v : t.hidden) v = r.F32();
  t.chosen_logprob.resize(t.n);
  t.next_token_entropy.resize(t.n);
  r.F64s(t.chosen_logprob);
  r.F64s(t.next_token_entropy);
  r.ExpectEnd();
  t.Validate();
  return t;
}

void WriteTraceJsonl(const ActivationTrace& trace,
                     const std::filesystem::path& path) {
  std::ostringstream os;
  for (std::uint32_t i = 0; i < trace.n; ++i) {
    nlohmann::json row = {{"sample_id", trace.sample_id},
                          {"layer", trace.layer},
                          {"index", i},
                          {"chosen_logprob", trace.chosen_logprob[i]},
                          {"next_token_entropy", trace.next_token_entropy[i]}};
    std::vector<double> h(trace.hidden.begin() + static_cast<std::ptrdiff_t>(i) * trace.d,
                          trace.hidden.begin() + static_cast<std::ptrdiff_t>(i + 1) * trace.d);
    row["hidden"] = h;
    os << row.dump() << '\n';
  }
  binio::WriteFileAtomic(path, os.str());
}

std::string TraceFileName(const std::string& sample_id) {
  std::string out;
  for (unsigned char c : sample_id) {
    if (std::isalnum(c) || c == '_' || c == '-' || c == '.') {
      out.push_back(static_cast<char>(c));
    } else {
      char buf[4];
      std::snprintf(buf, sizeof(buf), "%%%02X", c);
      out += buf;
    }
  }
  return out + ".htrc";
}

std::string SampleIdFromTraceFile(const std::filesystem::path& path) {
  const std::string stem = path.stem().string();
  std::string out;
  for (std::size_t i = 0; i < stem.size(); ++i) {
    if (stem[i] == '%' && i + 2 < stem.size()) {
      out.push_back(static_cast<char>(std::stoi(stem.substr(i + 1, 2), nullptr, 16)));
      i += 2;
    } else {
      out.push_back(stem[i]);
    }
  }
  return out;
}

ActivationTrace ExportTrace(const ModelParams& params, const AdapterSet* adapters,
                            const Sequence& seq, int layer,
                            const std::string& sample_id) {
  if (layer < 0 || layer >= params.config.n_layers) {
    ThrowUsage("export_trace: layer " + std::to_string(layer) +
               " out of range for a " + std::to_string(params.config.n_layers) +
               "-layer model");
  }
  if (seq.completion_begin == 0) ThrowUsage("export_trace: sequence needs a prefix token");
  ForwardResult fwd = Forward(params, adapters, seq.tokens);
  const Matrix& stream = fwd.streams[static_cast<std::size_t>(layer)];
  ActivationTrace t;
  t.sample_id = sample_id;
  t.layer = static_cast<std::uint32_t>(layer);
  t.d = static_cast<std::uint32_t>(params.config.d_model);
  t.n = static_cast<std::uint32_t>(seq.completion_length());
  t.hidden.reserve(static_cast<std::size_t>(t.n) * t.d);
  for (std::size_t i = 0; i < t.n; ++i) {
    const std::size_t pos = seq.completion_begin + i;
    for (std::size_t j = 0; j < t.d; ++j) {
      t.hidden.push_back(static_cast<float>(stream.at(pos, j)));
    }
    const auto logits = fwd.logits.row_span(pos - 1);
    auto lp = LogSoftmax(logits);
    t.chosen_logprob.push_back(std::min(0.0, lp[static_cast<std::size_t>(seq.tokens[pos])]));
    t.next_token_entropy.push_back(EntropyFromLogits(logits));
  }
  return t;
}

}  // namespace halluprobe
