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
#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "halluprobe/annotate.hpp"
#include "halluprobe/corpus.hpp"

namespace halluprobe {

enum class EditKind { kDate, kNumber, kName };
const char* EditKindName(EditKind kind);

// A perturbable site found in a passage.
struct InjectionSite {
  std::size_t start = 0;
  std::size_t end = 0;
  EditKind kind = EditKind::kNumber;
};

// Four-digit years in [1000, 2999], other digit runs, and capitalized words
// that do not open a sentence, in order of appearance.
std::vector<InjectionSite> FindInjectionSites(std::string_view passage);

struct InjectedEdit {
  std::size_t start = 0;  // byte range in the perturbed passage
  std::size_t end = 0;
  std::string original;
  std::string perturbed;
  EditKind kind = EditKind::kNumber;

  bool operator==(const InjectedEdit&) const = default;
};

struct InjectionRecord {
  std::string original;
  std::string perturbed;
  std::vector<InjectedEdit> edits;  // sorted, non-overlapping

  bool operator==(const InjectionRecord&) const = default;
};

// Default injection rate: one edit per 40 words.
inline constexpr double kDefaultInjectionRate = 1.0 / 40.0;

// Perturbs round(words * rate) sites (at least one when any site exists)
// chosen from the seeded "injection" stream. Years move by 1 to 9 in either
// direction, other numbers by a nonzero delta, and names are swapped for a
// decoy. A passage without sites yields an empty record.
InjectionRecord InjectErrors(const std::string& passage, std::uint64_t seed,
                             double rate = kDefaultInjectionRate);

// Applies the inverse edits to the perturbed passage.
std::string InvertInjection(const InjectionRecord& record);

struct PipelineScore {
  std::size_t edits = 0;
  std::size_t edits_detected = 0;
  std::size_t clean_spans = 0;
  std::size_t clean_flagged = 0;
  double recall = 0.0;  // edits_detected / edits, 0 when there are no edits
  double fpr = 0.0;     // clean_flagged / clean_spans, 0 when none

  std::string ToJson() const;
};

// spans[i] are the attached annotations of records[i].perturbed. An edit is
// detected when a hallucinated span overlaps it by at least one byte; a span
// is clean when it overlaps no edit.
PipelineScore EvaluatePipeline(std::span<const InjectionRecord> records,
                               std::span<const std::vector<EntitySpan>> spans);

// ---- Mock judges for offline runs -----------------------------------------

// Knows every injection: labels edits "Not Supported" and every other site
// of the perturbed passage "Supported".
class OracleInjectionJudge : public JudgeClient {
 public:
  explicit OracleInjectionJudge(std::span<const InjectionRecord> records);
  std::string Complete(const JudgeRequest& request) override;

 protected:
  struct Entry {
    std::string text;
    bool hallucinated = false;
    bool is_edit = false;
  };
  std::vector<Entry> EntriesFor(const std::string& completion) const;
  static std::string Render(const std::vector<Entry>& entries);

 private:
  std::map<std::string, InjectionRecord> by_passage_;
};

// Oracle judge whose labels are flipped with probability flip_rate, drawn
// from a stream keyed by the seed and the passage. Keeps exact bookkeeping of
// what it flipped.
class FlippingInjectionJudge : public OracleInjectionJudge {
 public:
  FlippingInjectionJudge(std::span<const InjectionRecord> records, std::uint64_t seed,
                         double flip_rate = 0.2);
  std::string Complete(const JudgeRequest& request) override;

  struct Bookkeeping {
    std::size_t edit_entries = 0;
    std::size_t edit_flips = 0;   // hallucinated -> supported (misses)
    std::size_t clean_entries = 0;
    std::size_t clean_flips = 0;  // supported -> hallucinated (false alarms)
  };
  Bookkeeping bookkeeping() const;

 private:
  std::uint64_t seed_;
  double flip_rate_;
  mutable std::mutex mu_;
  Bookkeeping book_;
};

// Returns `count` fabricated spans that never occur in the completion.
class AdversarialJudge : public JudgeClient {
 public:
  AdversarialJudge(std::uint64_t seed, std::size_t count) : seed_(seed), count_(count) {}
  std::string Complete(const JudgeRequest& request) override;

 private:
  std::uint64_t seed_;
  std::size_t count_;
};

}  // namespace halluprobe
