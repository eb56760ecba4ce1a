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

// HTTP transport for the external judge. Kept in its own translation unit
// so the rest of the library does not pull in the HTTP client header.

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <thread>

#include "halluprobe/annotate.hpp"
#include "halluprobe/error.hpp"

namespace halluprobe {

JudgeEndpoint JudgeEndpoint::FromEnvironment() {
  JudgeEndpoint e;
  const char* url = std::getenv("HALLUPROBE_JUDGE_URL");
  if (url == nullptr || *url == '\0') {
    ThrowUsage("HALLUPROBE_JUDGE_URL is not set");
  }
  e.url = url;
  if (const char* token = std::getenv("HALLUPROBE_JUDGE_TOKEN")) e.token = token;
  return e;
}

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl Split(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) ThrowUsage("judge URL lacks a scheme: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    ThrowUsage("judge URL must be http or https: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::string PostJson(const JudgeEndpoint& endpoint, const std::string& body) {
  if (endpoint.max_attempts < 1) ThrowUsage("max_attempts must be >= 1");
  const SplitUrl target = Split(endpoint.url);
  httplib::Client client(target.origin);
  client.set_connection_timeout(endpoint.timeout);
  client.set_read_timeout(endpoint.timeout);
  client.set_write_timeout(endpoint.timeout);
  httplib::Headers headers;
  if (!endpoint.token.empty()) {
    headers.emplace("Authorization", "Bearer " + endpoint.token);
  }
  std::string last_error;
  auto backoff = endpoint.initial_backoff;
  for (int attempt = 1; attempt <= endpoint.max_attempts; ++attempt) {
    auto res = client.Post(target.path, headers, body, "application/json");
    if (res && res->status >= 200 && res->status < 300) return res->body;
    last_error = res ? "HTTP status " + std::to_string(res->status)
                     : "transport error: " + httplib::to_string(res.error());
    if (attempt < endpoint.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  ThrowExternal("judge request to " + endpoint.url + " failed after " +
                std::to_string(endpoint.max_attempts) + " attempts: " + last_error);
}

}  // namespace halluprobe
