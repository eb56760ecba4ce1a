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

#include "halluprobe/inject.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "halluprobe/error.hpp"
#include "halluprobe/rng.hpp"

namespace halluprobe {

const char* EditKindName(EditKind kind) {
  switch (kind) {
    case EditKind::kDate:
      return "date";
    case EditKind::kNumber:
      return "number";
    case EditKind::kName:
      return "name";
  }
  return "number";
}

namespace {

bool IsDigit(char c) { return c >= '0' && c <= '9'; }
bool IsUpper(char c) { return c >= 'A' && c <= 'Z'; }
bool IsLower(char c) { return c >= 'a' && c <= 'z'; }
bool IsAlpha(char c) { return IsUpper(c) || IsLower(c); }
bool IsAlnum(char c) { return IsAlpha(c) || IsDigit(c); }

// True when the word at `pos` opens a sentence (or the passage).
bool OpensSentence(std::string_view s, std::size_t pos) {
  std::size_t i = pos;
  while (i > 0 && (s[i - 1] == ' ' || s[i - 1] == '\t' || s[i - 1] == '"' ||
                   s[i - 1] == '(')) {
    --i;
  }
  if (i == 0) return true;
  const char c = s[i - 1];
  return c == '.' || c == '!' || c == '?' || c == '\n' || c == ':';
}

constexpr const char* kDecoys[] = {
    "Harrington", "Okafor",  "Lindqvist", "Moreau",  "Castellanos", "Nakamura",
    "Petrov",     "Whitfield", "Abernathy", "Kowalski", "Delacroix", "Brennan",
};

std::size_t CountWords(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : s) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

std::string Perturb(std::string_view text, EditKind kind, Rng& rng) {
  switch (kind) {
    case EditKind::kDate: {
      const long year = std::stol(std::string(text));
      const long delta = 1 + static_cast<long>(UniformIndex(rng, 9));
      long shifted = UniformIndex(rng, 2) == 0 ? year - delta : year + delta;
      if (shifted < 1000 || shifted > 9999) shifted = 2 * year - shifted;
      return std::to_string(shifted);
    }
    case EditKind::kNumber: {
      const unsigned long long v = std::stoull(std::string(text));
      const unsigned long long span = std::max<unsigned long long>(9, v / 5);
      const unsigned long long delta = 1 + UniformIndex(rng, span);
      const bool down = UniformIndex(rng, 2) == 0 && delta <= v;
      return std::to_string(down ? v - delta : v + delta);
    }
    case EditKind::kName: {
      std::vector<std::string> options;
      for (const char* d : kDecoys) {
        if (text != d) options.emplace_back(d);
      }
      return options[UniformIndex(rng, options.size())];
    }
  }
  return std::string(text);
}

}  // namespace

std::vector<InjectionSite> FindInjectionSites(std::string_view s) {
  std::vector<InjectionSite> sites;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!IsAlnum(s[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && IsAlnum(s[j])) ++j;
    const std::string_view word = s.substr(i, j - i);
    const bool all_digits = std::all_of(word.begin(), word.end(), IsDigit);
    if (all_digits) {
      if (word.size() <= 9) {
        const long v = std::stol(std::string(word));
        const bool year = word.size() == 4 && v >= 1000 && v <= 2999;
        sites.push_back({i, j, year ? EditKind::kDate : EditKind::kNumber});
      }
    } else if (word.size() >= 2 && IsUpper(word[0]) &&
               std::all_of(word.begin() + 1, word.end(), IsLower) && !OpensSentence(s, i)) {
      sites.push_back({i, j, EditKind::kName});
    }
    i = j;
  }
  return sites;
}

InjectionRecord InjectErrors(const std::string& passage, std::uint64_t seed, double rate) {
  if (passage.empty()) ThrowUsage("cannot inject errors into an empty passage");
  if (!(rate > 0.0) || !std::isfinite(rate)) ThrowUsage("injection rate must be positive");
  InjectionRecord rec;
  rec.original = passage;
  rec.perturbed = passage;
  const auto sites = FindInjectionSites(passage);
  if (sites.empty()) return rec;
  const double want = std::round(static_cast<double>(CountWords(passage)) * rate);
  const std::size_t n = std::clamp<std::size_t>(static_cast<std::size_t>(want), 1, sites.size());

  auto rng = MakeRng(seed, "injection");
  std::vector<std::size_t> order(sites.size());
  std::iota(order.begin(), order.end(), 0);
  Shuffle(order, rng);
  order.resize(n);
  std::sort(order.begin(), order.end());

  std::string out;
  std::size_t cursor = 0;
  for (auto k : order) {
    const InjectionSite& site = sites[k];
    out.append(passage, cursor, site.start - cursor);
    const std::string original = passage.substr(site.start, site.end - site.start);
    std::string replaced = Perturb(original, site.kind, rng);
    InjectedEdit edit;
    edit.start = out.size();
    edit.end = out.size() + replaced.size();
    edit.original = original;
    edit.perturbed = replaced;
    edit.kind = site.kind;
    out += replaced;
    rec.edits.push_back(std::move(edit));
    cursor = site.end;
  }
  out.append(passage, cursor, std::string::npos);
  rec.perturbed = std::move(out);
  return rec;
}

std::string InvertInjection(const InjectionRecord& record) {
  std::string s = record.perturbed;
  for (auto it = record.edits.rbegin(); it != record.edits.rend(); ++it) {
    if (it->end > s.size() || s.compare(it->start, it->end - it->start, it->perturbed) != 0) {
      ThrowData("injection record does not match its perturbed passage");
    }
    s.replace(it->start, it->end - it->start, it->original);
  }
  return s;
}

std::string PipelineScore::ToJson() const {
  nlohmann::json j = {{"edits", edits},
                      {"edits_detected", edits_detected},
                      {"recall", recall},
                      {"clean_spans", clean_spans},
                      {"clean_flagged", clean_flagged},
                      {"fpr", fpr}};
  return j.dump(2) + "\n";
}

PipelineScore EvaluatePipeline(std::span<const InjectionRecord> records,
                               std::span<const std::vector<EntitySpan>> spans) {
  if (records.size() != spans.size()) {
    ThrowUsage("evaluate_pipeline needs one span list per record");
  }
  auto overlaps = [](std::size_t a0, std::size_t a1, std::size_t b0, std::size_t b1) {
    return a0 < b1 && b0 < a1;
  };
  PipelineScore score;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& edits = records[r].edits;
    for (const auto& e : edits) {
      ++score.edits;
      const bool hit = std::any_of(spans[r].begin(), spans[r].end(), [&](const EntitySpan& s) {
        return s.binary_label() == 1 && overlaps(s.char_start, s.char_end, e.start, e.end);
      });
      if (hit) ++score.edits_detected;
    }
    for (const auto& s : spans[r]) {
      const bool on_edit = std::any_of(edits.begin(), edits.end(), [&](const InjectedEdit& e) {
        return overlaps(s.char_start, s.char_end, e.start, e.end);
      });
      if (on_edit) continue;
      ++score.clean_spans;
      if (s.binary_label() == 1) ++score.clean_flagged;
    }
  }
  if (score.edits > 0) {
    score.recall = static_cast<double>(score.edits_detected) / static_cast<double>(score.edits);
  }
  if (score.clean_spans > 0) {
    score.fpr = static_cast<double>(score.clean_flagged) / static_cast<double>(score.clean_spans);
  }
  return score;
}

OracleInjectionJudge::OracleInjectionJudge(std::span<const InjectionRecord> records) {
  for (const auto& r : records) by_passage_[r.perturbed] = r;
}

std::vector<OracleInjectionJudge::Entry> OracleInjectionJudge::EntriesFor(
    const std::string& completion) const {
  std::vector<std::pair<std::size_t, Entry>> found;
  auto it = by_passage_.find(completion);
  if (it == by_passage_.end()) return {};
  const auto& edits = it->second.edits;
  for (const auto& e : edits) found.push_back({e.start, {e.perturbed, true, true}});
  for (const auto& site : FindInjectionSites(completion)) {
    const bool on_edit = std::any_of(edits.begin(), edits.end(), [&](const InjectedEdit& e) {
      return site.start < e.end && e.start < site.end;
    });
    if (on_edit) continue;
    found.push_back({site.start,
                     {completion.substr(site.start, site.end - site.start), false, false}});
  }
  std::stable_sort(found.begin(), found.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Entry> out;
  for (auto& f : found) out.push_back(std::move(f.second));
  return out;
}

std::string OracleInjectionJudge::Render(const std::vector<Entry>& entries) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries) {
    arr.push_back({{"text", e.text},
                   {"label", e.hallucinated ? "Not Supported" : "Supported"},
                   {"verification_note", e.is_edit ? "injected edit" : "unchanged"}});
  }
  return arr.dump();
}

std::string OracleInjectionJudge::Complete(const JudgeRequest& request) {
  return Render(EntriesFor(request.completion));
}

FlippingInjectionJudge::FlippingInjectionJudge(std::span<const InjectionRecord> records,
                                               std::uint64_t seed, double flip_rate)
    : OracleInjectionJudge(records), seed_(seed), flip_rate_(flip_rate) {}

std::string FlippingInjectionJudge::Complete(const JudgeRequest& request) {
  auto entries = EntriesFor(request.completion);
  Rng rng(DeriveSeed(DeriveSeed(seed_, "flip"), request.completion));
  Bookkeeping delta;
  for (auto& e : entries) {
    const bool flip = UniformUnit(rng) < flip_rate_;
    if (e.is_edit) {
      ++delta.edit_entries;
      if (flip) ++delta.edit_flips;
    } else {
      ++delta.clean_entries;
      if (flip) ++delta.clean_flips;
    }
    if (flip) e.hallucinated = !e.hallucinated;
  }
  {
    std::lock_guard<std::mutex> lock(mu_);
    book_.edit_entries += delta.edit_entries;
    book_.edit_flips += delta.edit_flips;
    book_.clean_entries += delta.clean_entries;
    book_.clean_flips += delta.clean_flips;
  }
  return Render(entries);
}

FlippingInjectionJudge::Bookkeeping FlippingInjectionJudge::bookkeeping() const {
  std::lock_guard<std::mutex> lock(mu_);
  return book_;
}

std::string AdversarialJudge::Complete(const JudgeRequest& request) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789 ";
  static constexpr const char* kLabels[] = {"Not Supported", "Supported",
                                            "Insufficient Information"};
  Rng rng(DeriveSeed(DeriveSeed(seed_, "adversarial"), request.completion));
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < count_; ++i) {
    std::string text;
    do {
      text = "Accel Partners ";
      const std::size_t len = 4 + UniformIndex(rng, 12);
      for (std::size_t c = 0; c < len; ++c) {
        text.push_back(kAlphabet[UniformIndex(rng, sizeof(kAlphabet) - 1)]);
      }
    } while (request.completion.find(text) != std::string::npos);
    arr.push_back({{"text", text},
                   {"label", kLabels[i % 3]},
                   {"verification_note", "fabricated"}});
  }
  return arr.dump();
}

}  // namespace halluprobe
