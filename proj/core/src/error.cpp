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

#include "halluprobe/error.hpp"

namespace halluprobe {

const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage:
      return "usage";
    case ErrorKind::kData:
      return "data";
    case ErrorKind::kNumeric:
      return "numeric";
    case ErrorKind::kExternal:
      return "external";
  }
  return "unknown";
}

void ThrowUsage(const std::string& msg) { throw Error(ErrorKind::kUsage, msg); }
void ThrowData(const std::string& msg) { throw Error(ErrorKind::kData, msg); }
void ThrowNumeric(const std::string& msg) {
  throw Error(ErrorKind::kNumeric, msg);
}
void ThrowExternal(const std::string& msg) {
  throw Error(ErrorKind::kExternal, msg);
}

}  // namespace halluprobe
