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

#include "halluprobe/binio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "halluprobe/error.hpp"

namespace halluprobe::binio {
namespace {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <typename T>
void Append(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

}  // namespace

void Writer::Bytes(std::string_view raw) { buf_.append(raw); }
void Writer::U8(std::uint8_t v) { Append(buf_, v); }
void Writer::U32(std::uint32_t v) { Append(buf_, v); }
void Writer::F32(float v) { Append(buf_, v); }
void Writer::F64(double v) { Append(buf_, v); }

void Writer::F64s(std::span<const double> values) {
  buf_.append(reinterpret_cast<const char*>(values.data()),
              values.size() * sizeof(double));
}

void Writer::String(std::string_view s) {
  U32(static_cast<std::uint32_t>(s.size()));
  buf_.append(s);
}

void Reader::Need(std::size_t n) const {
  if (remaining() < n) {
    ThrowData(what_ + ": truncated payload (need " + std::to_string(n) +
              " bytes at offset " + std::to_string(pos_) + ", have " +
              std::to_string(remaining()) + ")");
  }
}

std::string_view Reader::Bytes(std::size_t n) {
  Need(n);
  auto out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

template <typename T>
static T Load(std::string_view raw) {
  T v;
  std::memcpy(&v, raw.data(), sizeof(T));
  return v;
}

std::uint8_t Reader::U8() { return Load<std::uint8_t>(Bytes(1)); }
std::uint32_t Reader::U32() { return Load<std::uint32_t>(Bytes(4)); }
float Reader::F32() { return Load<float>(Bytes(4)); }
double Reader::F64() { return Load<double>(Bytes(8)); }

void Reader::F64s(std::span<double> out) {
  auto raw = Bytes(out.size() * sizeof(double));
  std::memcpy(out.data(), raw.data(), raw.size());
}

std::string Reader::String() {
  const std::uint32_t n = U32();
  return std::string(Bytes(n));
}

void Reader::ExpectEnd() const {
  if (remaining() != 0) {
    ThrowData(what_ + ": " + std::to_string(remaining()) +
              " trailing bytes after payload");
  }
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) ThrowData("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileAtomic(const std::filesystem::path& path, std::string_view data) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) ThrowData("cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) ThrowData("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) ThrowData("cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace halluprobe::binio
