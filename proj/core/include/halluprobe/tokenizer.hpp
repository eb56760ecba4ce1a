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
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace halluprobe {

using TokenId = std::int32_t;

// A token and the half-open byte range of the completion it covers.
struct TokenOffset {
  TokenId id = 0;
  std::size_t char_start = 0;
  std::size_t char_end = 0;

  bool operator==(const TokenOffset&) const = default;
};

// Byte-level tokenizer: one token per UTF-8 byte, plus three specials.
// Alignment between character offsets and tokens is therefore exact.
class ByteTokenizer {
 public:
  static constexpr TokenId kBos = 256;
  static constexpr TokenId kEos = 257;
  static constexpr TokenId kPad = 258;
  static constexpr int kVocabSize = 259;

  std::vector<TokenOffset> Encode(std::string_view text) const;
  std::vector<TokenId> EncodeIds(std::string_view text) const;

  // Specials are skipped.
  std::string Decode(std::span<const TokenId> ids) const;
};

// True when offsets are sorted, non-overlapping and tile [0, text_size).
bool TilesText(std::span<const TokenOffset> tokens, std::size_t text_size);

}  // namespace halluprobe
