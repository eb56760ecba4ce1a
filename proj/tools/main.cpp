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

#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "common.hpp"
#include "halluprobe/error.hpp"
#include "toml_config.hpp"

int main(int argc, char** argv) {
  using namespace halluprobe;
  CLI::App app{"Token-level hallucination probes: data, training, evaluation and monitoring"};
  app.set_version_flag("--version", HALLUPROBE_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<cli::TomlConfig>());
  app.set_config("--config", "", "TOML file; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);

  cli::GlobalOptions global;
  app.add_option("--seed", global.seed, "Global seed for every random stream")
      ->capture_default_str();
  app.add_option("--manifest", global.manifest, "Where to write the run manifest");
  app.add_flag("-q,--quiet", global.quiet, "Suppress progress messages");

  cli::RegisterDataCommands(app, global);
  cli::RegisterModelCommands(app, global);
  cli::RegisterReportCommands(app, global);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorKind::kUsage);
  } catch (const Error& e) {
    std::cerr << "halluprobe: " << ErrorKindName(e.kind()) << " error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "halluprobe: data error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kData);
  }
  return 0;
}
