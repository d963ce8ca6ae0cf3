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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "irlm/error.hpp"
#include "irlm/pipeline.hpp"

using namespace irlm;
namespace pl = irlm::pipeline;
namespace fs = std::filesystem;
using pl::json;

namespace {

json small_doubling() {
  return json::parse(R"({
    "seed": 17,
    "model": {"preset": "doubling_ifs"},
    "diagnostics": {"nsamples": 2000},
    "simulation": {"cesaro_n": 256, "cesaro_chains": 8, "decay_paths": 1000, "horizon": 10,
                   "drift_steps": 256, "drift_paths": 8,
                   "batch": {"n_grid": [64, 128, 256], "paths": 2000},
                   "poisson": {"paths": 16, "support_points": 2048}},
    "spectral": {"nodes": 129, "char_checks": {"count": 1, "paths": 2000, "max_n": 5}},
    "harness": {"clt": {"n_grid": [64, 256], "paths": 2000}}
  })");
}

std::string kind_and_message(const json& doc) {
  try {
    pl::parse_config(doc, "test.json");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfig);
    return e.what();
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("irlm_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("exit codes") {
  CHECK(pl::exit_code_for(ErrorKind::kConfig) == 2);
  CHECK(pl::exit_code_for(ErrorKind::kParameter) == 2);
  CHECK(pl::exit_code_for(ErrorKind::kHypothesis) == 3);
  CHECK(pl::exit_code_for(ErrorKind::kDegenerate) == 3);
  CHECK(pl::exit_code_for(ErrorKind::kNumerical) == 4);
  CHECK(pl::exit_code_for(ErrorKind::kAmbiguousDominance) == 4);
}

TEST_CASE("config errors name the offending path") {
  CHECK(kind_and_message(json::parse(R"({"model": {"preset": "doubling_ifs"}, "simulation": {"horizn": 3}})"))
            .find("simulation.horizn") != std::string::npos);
  CHECK(kind_and_message(json::parse(R"({"model": {"family": "quadratic"}})")).find("model.family") !=
        std::string::npos);
  CHECK(kind_and_message(json::parse(R"({"model": {"preset": "nope"}})")).find("model.preset") !=
        std::string::npos);
  CHECK(kind_and_message(json::parse(R"({"model": {"preset": "doubling_ifs", "dim": 1}})"))
            .find("model.dim") != std::string::npos);
  CHECK(kind_and_message(json::parse(R"({"model": {"family": "affine", "atoms": [{"a": 0.5, "weight": 0.4}]}})"))
            .find("weights must sum to 1") != std::string::npos);
  CHECK(kind_and_message(json::parse(R"({"model": {"preset": "doubling_ifs"}, "simulation": {"batch": {"n_grid": [64]}}})"))
            .find("simulation.batch") != std::string::npos);
  CHECK(kind_and_message(json::parse(R"({"model": {"preset": "doubling_ifs"}, "seed": "x"})")).find("seed") !=
        std::string::npos);
  CHECK(kind_and_message(json::parse("[1, 2]")) != "");
  CHECK_THROWS_AS(pl::load_config("/nonexistent/irlm.json"), Error);
}

TEST_CASE("presets expand into explicit models") {
  for (const auto& name : pl::preset_names()) {
    const auto cfg = pl::parse_config(json{{"model", {{"preset", name}}}});
    CHECK(cfg.doc.at("model").contains("family"));
    CHECK_FALSE(cfg.doc.at("model").contains("preset"));
    CHECK(cfg.doc.at("observable").contains("kind"));
    const SystemModel m = pl::build_model(cfg);
    CHECK(m.name() == name);
  }
}

TEST_CASE("defaults, overrides and the config hash") {
  const auto a = pl::parse_config(json{{"model", {{"preset", "doubling_ifs"}}}});
  CHECK(a.seed == 1);
  CHECK(a.doc.at("diagnostics").at("gamma0").get<double>() == 4.5);
  CHECK(a.doc.at("spectral").at("nodes").get<int>() == 513);
  const auto b = pl::parse_config(json{{"model", {{"preset", "doubling_ifs"}}}});
  CHECK(pl::config_hash(a) == pl::config_hash(b));
  CHECK(pl::config_hash(a).size() == 16);

  pl::Overrides o;
  o.seed = 99;
  o.paths = 123;
  o.horizon = 7;
  const auto c = pl::apply_overrides(a, o);
  CHECK(c.seed == 99);
  CHECK(c.doc.at("simulation").at("horizon").get<int>() == 7);
  CHECK(c.doc.at("simulation").at("decay_paths").get<int>() == 123);
  CHECK(c.doc.at("simulation").at("batch").at("paths").get<int>() == 123);
  CHECK(c.doc.at("harness").at("clt").at("paths").get<int>() == 123);
  CHECK(pl::config_hash(c) != pl::config_hash(a));
}

TEST_CASE("subcommands select stages") {
  using S = pl::Stage;
  CHECK(pl::stages_for("diagnose") == std::set<S>{S::kDiagnose});
  CHECK(pl::stages_for("simulate") == std::set<S>{S::kDiagnose, S::kSimulate});
  CHECK(pl::stages_for("variance") == std::set<S>{S::kDiagnose, S::kSimulate, S::kVariance});
  CHECK(pl::stages_for("spectral") == std::set<S>{S::kDiagnose, S::kSimulate, S::kSpectral});
  CHECK(pl::stages_for("run").size() == 5);
  CHECK_THROWS_AS(pl::stages_for("fly"), Error);
}

TEST_CASE("a failed hypothesis stops the pipeline with exit 3") {
  const auto cfg = pl::parse_config(json{{"model", {{"preset", "identity"}}}});
  const fs::path out = scratch("identity");
  const auto r = pl::run_experiment(cfg, pl::stages_for("run"), out);
  CHECK(r.exit_code == 3);
  CHECK(fs::exists(out / "diagnose.json"));
  CHECK_FALSE(fs::exists(out / "variance.json"));
  const json d = json::parse(slurp(out / "diagnose.json"));
  CHECK(d.at("config_hash").get<std::string>() == pl::config_hash(cfg));
  fs::remove_all(out);
}

TEST_CASE("full run writes every report and is byte-identical across runs") {
  const auto cfg = pl::parse_config(small_doubling());
  const fs::path out1 = scratch("run1");
  const fs::path out2 = scratch("run2");
  const auto r1 = pl::run_experiment(cfg, pl::stages_for("run"), out1);
  const auto r2 = pl::run_experiment(cfg, pl::stages_for("run"), out2);
  for (const auto& m : r1.messages) MESSAGE(m);
  CHECK(r1.exit_code == 0);
  CHECK(r2.exit_code == 0);
  for (const char* f : {"diagnose.json", "simulate.json", "variance.json", "spectral.json", "clt.json"})
    CHECK(fs::exists(out1 / f));
  REQUIRE(r1.written == r2.written);
  for (const auto& f : r1.written) {
    INFO(f);
    CHECK(slurp(out1 / f) == slurp(out2 / f));
  }
  const std::string csv = slurp(out1 / "variance_batch.csv");
  CHECK(csv.rfind("# config_hash=" + pl::config_hash(cfg) + " seed=17", 0) == 0);
  const json v = json::parse(slurp(out1 / "variance.json"));
  CHECK(v.at("seed").get<std::uint64_t>() == 17);
  fs::remove_all(out1);
  fs::remove_all(out2);
}

}  // TEST_SUITE
