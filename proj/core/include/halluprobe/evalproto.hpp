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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "halluprobe/corpus.hpp"

namespace halluprobe {

// One row of the scored-span table shared by probes and baselines.
struct ScoredSpan {
  std::string sample_id;
  std::string span_id;  // span index, or "completion"
  std::string method;
  double score = 0.0;
  int label = 0;

  bool operator==(const ScoredSpan&) const = default;
};

enum class Protocol {
  kLongForm,   // one row per annotated entity, span-max
  kShortForm,  // the single answer span, span-max
  kReasoning,  // one row per completion, max over all tokens
};
Protocol ParseProtocol(const std::string& name);
const char* ProtocolName(Protocol p);

std::vector<ScoredSpan> ScoreSpans(std::span<const double> token_scores,
                                   const LabeledSample& sample, Protocol protocol,
                                   const std::string& method);

// ---- Metrics ---------------------------------------------------------------

struct RocPoint {
  double threshold = 0.0;  // predict positive iff score >= threshold
  double fpr = 0.0;
  double tpr = 0.0;
};

// Threshold sweep over distinct scores, from (0, 0) at +inf down to (1, 1).
// Tied scores move together in one step.
struct RocCurve {
  std::vector<RocPoint> points;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

// Throws a data error unless both classes are present.
RocCurve Roc(std::span<const double> scores, std::span<const int> labels);
RocCurve Roc(std::span<const ScoredSpan> rows);

// Trapezoidal area; equals the rank statistic with ties counted 1/2.
double Auc(const RocCurve& curve);

// Highest recall among sweep points whose FPR does not exceed fpr_cap
// (step function, no interpolation).
double RecallAtFpr(const RocCurve& curve, double fpr_cap = 0.1);
double RecallAtFpr(std::span<const double> scores, std::span<const int> labels,
                   double fpr_cap = 0.1);

struct SelectivePoint {
  double threshold = 0.0;
  double attempt_rate = 0.0;
  std::optional<double> conditional_accuracy;  // absent when nothing attempted
};

struct AnswerRecord {
  double max_score = 0.0;
  bool correct = false;
};

// An answer is attempted at threshold t iff its max token score <= t.
std::vector<SelectivePoint> SelectiveCurve(std::span<const AnswerRecord> answers,
                                           std::span<const double> thresholds);

struct MethodMetrics {
  double auc = 0.0;
  double recall_at_fpr_0_1 = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

// Groups rows by method and computes pooled metrics per method.
std::map<std::string, MethodMetrics> EvaluateTable(std::span<const ScoredSpan> rows);
std::string ReportJson(const std::map<std::string, MethodMetrics>& report);

// CSV columns: sample_id,span_id,method,score,label. Scores are printed with
// 17 significant digits so they read back bit-exactly.
std::string ScoredSpansToCsv(std::span<const ScoredSpan> rows);
void WriteScoredSpans(std::span<const ScoredSpan> rows,
                      const std::filesystem::path& path);
std::vector<ScoredSpan> ReadScoredSpans(const std::filesystem::path& path);

// ---- Transcript rendering --------------------------------------------------

enum class RenderFormat { kAnsi, kHtml };

struct RenderOptions {
  RenderFormat format = RenderFormat::kAnsi;
  double display_floor = 0.4;  // scores below this are not highlighted
};

// Highlights tokens by score and underlines annotated spans (green for
// supported, red for hallucinated).
std::string RenderTranscript(const LabeledSample& sample,
                             std::span<const double> token_scores,
                             const RenderOptions& options);

}  // namespace halluprobe
