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

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "halluprobe/manifest.hpp"
#include "helpers.hpp"

#ifdef HALLUPROBE_CLI

namespace {

namespace fs = std::filesystem;

// Runs the CLI through the shell and returns its exit status.
int Run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " \"" HALLUPROBE_CLI "\" -q " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string Capture(const std::string& args) {
  const std::string cmd = "\"" HALLUPROBE_CLI "\" -q " + args + " 2>/dev/null";
  std::string out;
  if (FILE* p = popen(cmd.c_str(), "r")) {
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof(buf), p)) > 0) out.append(buf, n);
    pclose(p);
  }
  return out;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small corpus, model and traces shared by the cases below.
struct Fixture {
  ::testing::TempDir dir;
  std::string d, m, tr;
  Fixture() {
    d = (dir / "d.jsonl").string();
    m = (dir / "m.bin").string();
    tr = (dir / "tr").string();
    REQUIRE(Run("make-toy --samples 12 --out " + d) == 0);
    REQUIRE(Run("init-model --out " + m) == 0);
    REQUIRE(Run("trace --data " + d + " --model " + m + " --out-dir " + tr) == 0);
  }
  std::string Train(const std::string& extra) const {
    return "train --data " + d + " --traces " + tr + " " + extra;
  }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("linear probe with a regularizer is a usage error") {
  Fixture f;
  CHECK(Run(f.Train("--out " + (f.dir / "p.bin").string() + " --lambda-reg 0.5 --regularizer kl")) == 1);
  CHECK_FALSE(fs::exists(f.dir / "p.bin"));
  CHECK(Run("train --bogus-flag") == 1);
}

TEST_CASE("exit codes map error kinds") {
  Fixture f;
  CHECK(Run("align --in " + (f.dir / "missing.jsonl").string() + " --out " + (f.dir / "x").string()) == 2);
  CHECK(Run(f.Train("--out " + (f.dir / "p.bin").string() + " --optimizer adam --lr-head 1e308 --steps 5")) == 3);
  // Nothing listens on the discard port.
  CHECK(Run("annotate --in " + f.d + " --out " + (f.dir / "o.jsonl").string(),
            "HALLUPROBE_JUDGE_URL=http://127.0.0.1:9") == 4);
}

TEST_CASE("command-line flags take precedence over the TOML file") {
  Fixture f;
  const auto cfg = f.dir / "c.toml";
  std::ofstream(cfg) << "seed = 5\n[train]\nsteps = 7\noptimizer = \"adam\"\n";
  const auto p = (f.dir / "p.bin").string();
  REQUIRE(Run("--config " + cfg.string() + " " + f.Train("--out " + p + " --steps 3")) == 0);
  auto j = nlohmann::json::parse(Slurp(p + ".manifest.json"));
  CHECK(j.at("config").at("options").at("--steps") == "3");
  CHECK(j.at("config").at("options").at("--optimizer") == "adam");
  CHECK(j.at("config").at("seed") == 5);
  std::ofstream(cfg) << "[train]\nno-such-key = 1\n";
  CHECK(Run("--config " + cfg.string() + " " + f.Train("--out " + p)) == 1);
}

TEST_CASE("manifest hashes match the written artifacts") {
  Fixture f;
  const auto p = (f.dir / "p.bin").string();
  const auto mf = (f.dir / "run.json").string();
  REQUIRE(Run("--manifest " + mf + " " + f.Train("--out " + p + " --steps 2")) == 0);
  auto j = nlohmann::json::parse(Slurp(mf));
  bool found = false;
  for (const auto& o : j.at("outputs")) {
    if (o.at("path") == p) {
      found = true;
      CHECK(o.at("sha256") == halluprobe::Sha256File(p));
    }
  }
  CHECK(found);
  CHECK(j.at("inputs")[0].at("sha256") == halluprobe::Sha256File(f.d));
}

TEST_CASE("render floor suppresses score highlighting") {
  Fixture f;
  const auto p = (f.dir / "p.bin").string();
  REQUIRE(Run(f.Train("--out " + p + " --steps 2")) == 0);
  const auto id = nlohmann::json::parse(Slurp(f.d).substr(0, Slurp(f.d).find('\n'))).at("id").get<std::string>();
  const std::string base = "render --data " + f.d + " --sample-id " + id + " --probe " + p + " --traces " + f.tr;
  const auto all = Capture(base + " --floor 0");
  const auto none = Capture(base + " --floor 1");
  CHECK(all.find("30;43") != std::string::npos);
  CHECK_FALSE(all.empty());
  CHECK(none.find("30;4") == std::string::npos);
  CHECK(none.find("30;10") == std::string::npos);
}

TEST_CASE("reruns with the same seed are byte-identical") {
  Fixture f;
  const auto a = (f.dir / "a.bin").string();
  const auto b = (f.dir / "b.bin").string();
  REQUIRE(Run("--seed 3 " + f.Train("--out " + a + " --steps 5")) == 0);
  REQUIRE(Run("--seed 3 " + f.Train("--out " + b + " --steps 5")) == 0);
  CHECK(Slurp(a) == Slurp(b));
  CHECK(Slurp(a + ".curves.csv") == Slurp(b + ".curves.csv"));
}

}  // TEST_SUITE

#endif  // HALLUPROBE_CLI
