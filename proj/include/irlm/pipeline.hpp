// Copyright 2026 The irlm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Declarative experiment runner: a JSON config with sections model,
// observable, diagnostics, simulation, spectral and harness drives the
// stages diagnose -> simulate -> variance -> spectral -> clt and writes one
// JSON report (plus CSV tables) per stage.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "irlm/core.hpp"
#include "irlm/error.hpp"

namespace irlm::pipeline {

using json = nlohmann::json;

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitHypothesis = 3;
inline constexpr int kExitNumerical = 4;

int exit_code_for(ErrorKind kind);

/// A validated config with every default filled in.
struct Config {
  json doc;
  std::string source = "<inline>";
  std::uint64_t seed = 1;
};

/// Parses and validates; every problem is a kConfig error naming the
/// offending path (e.g. "model.atoms[1].weight").
Config parse_config(const json& doc, const std::string& source = "<inline>");
Config load_config(const std::filesystem::path& path);

/// Names of the built-in model presets.
std::vector<std::string> preset_names();

/// FNV-1a 64 of the canonical dump of the effective config, as hex.
std::string config_hash(const Config& config);

/// Builds the model described by the model and observable sections,
/// including the centering step.
SystemModel build_model(const Config& config);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;    // every path count in the config
  std::optional<std::size_t> horizon;  // simulation.horizon
};

/// Applies command-line overrides and re-validates.
Config apply_overrides(const Config& config, const Overrides& overrides);

enum class Stage { kDiagnose, kSimulate, kVariance, kSpectral, kClt };
const char* to_string(Stage stage);

/// The stages a subcommand runs, including prerequisites.
std::set<Stage> stages_for(const std::string& subcommand);

struct RunResult {
  int exit_code = kExitOk;
  std::vector<std::string> written;  // file names relative to the output dir
  std::vector<std::string> messages;
};

/// Runs `stages` (prerequisites must be included) and writes the reports
/// into `out_dir`. Never throws for model or numerical errors; they map
/// to exit codes and are recorded in the reports.
RunResult run_experiment(const Config& config, const std::set<Stage>& stages,
                         const std::filesystem::path& out_dir);

}  // namespace irlm::pipeline
