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
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace halluprobe::binio {

// Little-endian byte buffer writer shared by the HTRC trace format and the
// model/probe checkpoint formats.
class Writer {
 public:
  void Bytes(std::string_view raw);
  void U8(std::uint8_t v);
  void U32(std::uint32_t v);
  void F32(float v);
  void F64(double v);
  void F64s(std::span<const double> values);
  // u32 byte length followed by the raw bytes.
  void String(std::string_view s);

  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

// Reader over an in-memory payload. Every accessor throws a data error
// naming `what` when the payload is truncated.
class Reader {
 public:
  Reader(std::string_view payload, std::string what)
      : data_(payload), what_(std::move(what)) {}

  std::string_view Bytes(std::size_t n);
  std::uint8_t U8();
  std::uint32_t U32();
  float F32();
  double F64();
  void F64s(std::span<double> out);
  std::string String();

  std::size_t remaining() const { return data_.size() - pos_; }
  void ExpectEnd() const;

 private:
  void Need(std::size_t n) const;

  std::string_view data_;
  std::size_t pos_ = 0;
  std::string what_;
};

std::string ReadFile(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it into place.
void WriteFileAtomic(const std::filesystem::path& path, std::string_view data);

}  // namespace halluprobe::binio
