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

// Command-line front end for the experiment pipeline.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>

#include "irlm/parallel.hpp"
#include "irlm/pipeline.hpp"

namespace pl = irlm::pipeline;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "irlm-out";
  std::optional<unsigned> threads;
  std::optional<std::size_t> paths;
  std::optional<std::size_t> horizon;
  bool quiet = false;
};

void add_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON experiment config")->required();
  cmd->add_option("--seed", f.seed, "master seed (overrides the config)");
  cmd->add_option("--out", f.out, "output directory")->capture_default_str();
  cmd->add_option("--threads", f.threads, "worker threads (default: $IRLM_THREADS or all cores)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--paths", f.paths, "override every Monte Carlo path count")->check(CLI::PositiveNumber);
  cmd->add_option("--horizon", f.horizon, "override the ergodicity horizon")->check(CLI::PositiveNumber);
  cmd->add_flag("-q,--quiet", f.quiet, "suppress warnings");
}

int run(const std::string& sub, const Flags& f) {
  if (f.quiet) spdlog::set_level(spdlog::level::err);
  if (f.threads) {
    irlm::set_default_threads(*f.threads);
  } else if (const char* env = std::getenv("IRLM_THREADS")) {
    char* end = nullptr;
    const unsigned long n = std::strtoul(env, &end, 10);
    if (end == env || *end != '\0' || n == 0) {
      std::cerr << "error: IRLM_THREADS must be a positive integer\n";
      return pl::kExitConfig;
    }
    irlm::set_default_threads(static_cast<unsigned>(n));
  }
  try {
    pl::Config cfg = pl::load_config(f.config);
    cfg = pl::apply_overrides(cfg, {f.seed, f.paths, f.horizon});
    const auto result = pl::run_experiment(cfg, pl::stages_for(sub), f.out);
    std::cout << "config_hash " << pl::config_hash(cfg) << " seed " << cfg.seed << "\n";
    for (const auto& w : result.written) std::cout << "wrote " << (std::filesystem::path(f.out) / w).string() << "\n";
    for (const auto& m : result.messages) std::cerr << "error: " << m << "\n";
    std::cout << "exit " << result.exit_code << "\n";
    return result.exit_code;
  } catch (const irlm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pl::exit_code_for(e.kind());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"irlm: limit theorems for iterated random Lipschitz maps"};
  app.require_subcommand(1);
  Flags flags;
  std::string chosen;
  const std::pair<const char*, const char*> subs[] = {
      {"diagnose", "check the moment and contraction hypothesis"},
      {"simulate", "empirical stationary law and ergodicity decay"},
      {"variance", "asymptotic variance by batch means and the Poisson route"},
      {"spectral", "Fourier operator spectrum, Taylor residuals and peripheral scan"},
      {"clt", "Kolmogorov-Smirnov and local limit checks"},
      {"run", "full pipeline"},
  };
  for (const auto& [name, help] : subs) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_flags(cmd, flags);
    cmd->callback([&chosen, n = std::string(name)] { chosen = n; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pl::kExitConfig;
  }
  return run(chosen, flags);
}
