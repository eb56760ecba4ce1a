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

#include "halluprobe/tokenizer.hpp"

namespace halluprobe {

std::vector<TokenOffset> ByteTokenizer::Encode(std::string_view text) const {
  std::vector<TokenOffset> out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    out.push_back({static_cast<TokenId>(static_cast<unsigned char>(text[i])),
                   i, i + 1});
  }
  return out;
}

std::vector<TokenId> ByteTokenizer::EncodeIds(std::string_view text) const {
  std::vector<TokenId> out;
  out.reserve(text.size());
  for (unsigned char c : text) out.push_back(static_cast<TokenId>(c));
  return out;
}

std::string ByteTokenizer::Decode(std::span<const TokenId> ids) const {
  std::string out;
  out.reserve(ids.size());
  for (TokenId id : ids) {
    if (id >= 0 && id < 256) out.push_back(static_cast<char>(id));
  }
  return out;
}

bool TilesText(std::span<const TokenOffset> tokens, std::size_t text_size) {
  std::size_t cursor = 0;
  for (const auto& t : tokens) {
    if (t.char_start != cursor || t.char_end <= t.char_start) return false;
    cursor = t.char_end;
  }
  return cursor == text_size;
}

}  // namespace halluprobe
