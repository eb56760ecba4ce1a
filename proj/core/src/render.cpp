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
#include <cstdio>
#include <sstream>

#include "halluprobe/error.hpp"
#include "halluprobe/evalproto.hpp"

namespace halluprobe {
namespace {

// A run of bytes forming one UTF-8 character, scored by its highest byte.
struct Glyph {
  std::size_t begin = 0;
  std::size_t end = 0;
  double score = 0.0;
  int span_label = -1;  // -1 outside spans, else the span's binary label
};

std::vector<Glyph> Glyphs(const LabeledSample& sample, std::span<const double> scores) {
  std::vector<int> span_label(sample.completion.size(), -1);
  for (const auto& s : sample.spans) {
    for (std::size_t i = s.char_start; i < s.char_end && i < span_label.size(); ++i) {
      span_label[i] = std::max(span_label[i], s.binary_label());
    }
  }
  std::vector<Glyph> out;
  for (std::size_t t = 0; t < sample.tokens.size(); ++t) {
    const auto& tok = sample.tokens[t];
    const auto lead = static_cast<unsigned char>(sample.completion[tok.char_start]);
    const bool continuation = (lead & 0xC0) == 0x80;
    if (continuation && !out.empty()) {
      out.back().end = tok.char_end;
      out.back().score = std::max(out.back().score, scores[t]);
      continue;
    }
    out.push_back({tok.char_start, tok.char_end, scores[t], span_label[tok.char_start]});
  }
  return out;
}

std::string HtmlEscape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\n': out += "<br>\n"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string RenderTranscript(const LabeledSample& sample,
                             std::span<const double> token_scores,
                             const RenderOptions& options) {
  if (token_scores.size() != sample.tokens.size()) {
    ThrowData("render: score count does not match token count for " + sample.id);
  }
  const auto glyphs = Glyphs(sample, token_scores);
  std::ostringstream os;
  const std::string_view text = sample.completion;
  if (options.format == RenderFormat::kAnsi) {
    for (const auto& g : glyphs) {
      std::string codes;
      if (g.span_label == 0) codes += "4;32";  // supported: green underline
      if (g.span_label == 1) codes += "4;31";  // hallucinated: red underline
      if (g.score >= options.display_floor) {
        // Yellow background, brighter for higher scores.
        if (!codes.empty()) codes += ';';
        codes += g.score >= 0.7 ? "30;103" : "30;43";
      }
      if (codes.empty()) {
        os << text.substr(g.begin, g.end - g.begin);
      } else {
        os << "\x1b[" << codes << 'm' << text.substr(g.begin, g.end - g.begin) << "\x1b[0m";
      }
    }
    os << '\n';
    return os.str();
  }

  os << "<div class=\"transcript\" data-sample=\"" << HtmlEscape(sample.id) << "\">\n";
  char style[160];
  for (const auto& g : glyphs) {
    std::string css;
    if (g.score >= options.display_floor) {
      std::snprintf(style, sizeof(style), "background:rgba(255,214,0,%.3f);", g.score);
      css += style;
    }
    if (g.span_label == 0) css += "border-bottom:2px solid #2e9b44;";
    if (g.span_label == 1) css += "border-bottom:2px solid #d0312d;";
    const std::string piece = HtmlEscape(text.substr(g.begin, g.end - g.begin));
    if (css.empty()) {
      os << piece;
    } else {
      std::snprintf(style, sizeof(style), "%.3f", g.score);
      os << "<span style=\"" << css << "\" title=\"" << style << "\">" << piece << "</span>";
    }
  }
  os << "\n</div>\n";
  return os.str();
}

}  // namespace halluprobe
