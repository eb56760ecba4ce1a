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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "halluprobe/binio.hpp"
#include "halluprobe/error.hpp"
#include "halluprobe/evalproto.hpp"

namespace halluprobe {

RocCurve Roc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) ThrowUsage("roc: scores/labels length mismatch");
  RocCurve curve;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) ThrowData("roc: non-finite score");
    (labels[i] ? curve.n_pos : curve.n_neg)++;
  }
  if (curve.n_pos == 0 || curve.n_neg == 0) {
    ThrowData("roc: need at least one positive and one negative (got " +
              std::to_string(curve.n_pos) + " positive, " +
              std::to_string(curve.n_neg) + " negative)");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const double np = static_cast<double>(curve.n_pos);
  const double nn = static_cast<double>(curve.n_neg);
  curve.points.push_back({INFINITY, 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double t = scores[order[k]];
    while (k < order.size() && scores[order[k]] == t) {
      (labels[order[k]] ? tp : fp)++;
      ++k;
    }
    curve.points.push_back({t, static_cast<double>(fp) / nn,
                            static_cast<double>(tp) / np});
  }
  return curve;
}

RocCurve Roc(std::span<const ScoredSpan> rows) {
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(rows.size());
  labels.reserve(rows.size());
  for (const auto& r : rows) {
    scores.push_back(r.score);
    labels.push_back(r.label);
  }
  return Roc(scores, labels);
}

double Auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  return area;
}

double RecallAtFpr(const RocCurve& curve, double fpr_cap) {
  double best = 0.0;
  for (const auto& p : curve.points) {
    if (p.fpr <= fpr_cap) best = std::max(best, p.tpr);
  }
  return best;
}

double RecallAtFpr(std::span<const double> scores, std::span<const int> labels,
                   double fpr_cap) {
  return RecallAtFpr(Roc(scores, labels), fpr_cap);
}

std::vector<SelectivePoint> SelectiveCurve(std::span<const AnswerRecord> answers,
                                           std::span<const double> thresholds) {
  if (answers.empty()) ThrowData("selective curve: no answers");
  std::vector<SelectivePoint> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    std::size_t attempted = 0, correct = 0;
    for (const auto& a : answers) {
      if (a.max_score <= t) {
        ++attempted;
        if (a.correct) ++correct;
      }
    }
    SelectivePoint p;
    p.threshold = t;
    p.attempt_rate = static_cast<double>(attempted) / static_cast<double>(answers.size());
    if (attempted > 0) {
      p.conditional_accuracy = static_cast<double>(correct) / static_cast<double>(attempted);
    }
    out.push_back(p);
  }
  return out;
}

std::map<std::string, MethodMetrics> EvaluateTable(std::span<const ScoredSpan> rows) {
  std::map<std::string, std::vector<ScoredSpan>> by_method;
  for (const auto& r : rows) by_method[r.method].push_back(r);
  std::map<std::string, MethodMetrics> out;
  for (const auto& [method, group] : by_method) {
    RocCurve curve = Roc(group);
    MethodMetrics m;
    m.auc = Auc(curve);
    m.recall_at_fpr_0_1 = RecallAtFpr(curve, 0.1);
    m.n_pos = curve.n_pos;
    m.n_neg = curve.n_neg;
    out.emplace(method, m);
  }
  return out;
}

std::string ReportJson(const std::map<std::string, MethodMetrics>& report) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [method, m] : report) {
    j[method] = {{"auc", m.auc},
                 {"recall_at_fpr_0_1", m.recall_at_fpr_0_1},
                 {"n_pos", m.n_pos},
                 {"n_neg", m.n_neg}};
  }
  return j.dump(2) + "\n";
}

namespace {

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> ParseCsvLine(const std::string& line, std::size_t lineno) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) ThrowData("csv line " + std::to_string(lineno) + ": unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

std::string ScoredSpansToCsv(std::span<const ScoredSpan> rows) {
  std::ostringstream os;
  os << "sample_id,span_id,method,score,label\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", r.score);
    os << CsvField(r.sample_id) << ',' << CsvField(r.span_id) << ','
       << CsvField(r.method) << ',' << buf << ',' << r.label << '\n';
  }
  return os.str();
}

void WriteScoredSpans(std::span<const ScoredSpan> rows,
                      const std::filesystem::path& path) {
  binio::WriteFileAtomic(path, ScoredSpansToCsv(rows));
}

std::vector<ScoredSpan> ReadScoredSpans(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) ThrowData("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  std::vector<ScoredSpan> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) {
      if (line.rfind("sample_id,span_id,method,score,label", 0) != 0) {
        ThrowData(path.string() + ": missing scored-span CSV header");
      }
      continue;
    }
    if (line.empty()) continue;
    auto f = ParseCsvLine(line, lineno);
    if (f.size() != 5) {
      ThrowData(path.string() + " line " + std::to_string(lineno) +
                ": expected 5 fields, got " + std::to_string(f.size()));
    }
    ScoredSpan r;
    r.sample_id = f[0];
    r.span_id = f[1];
    r.method = f[2];
    try {
      std::size_t used = 0;
      r.score = std::stod(f[3], &used);
      if (used != f[3].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      ThrowData(path.string() + " line " + std::to_string(lineno) + ": bad score \"" + f[3] + "\"");
    }
    if (f[4] != "0" && f[4] != "1") {
      ThrowData(path.string() + " line " + std::to_string(lineno) + ": label must be 0 or 1");
    }
    r.label = f[4] == "1";
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace halluprobe
