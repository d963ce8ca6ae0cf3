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

#include "irlm/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "irlm/diagnostics.hpp"
#include "irlm/harness.hpp"
#include "irlm/models.hpp"
#include "irlm/simulate.hpp"
#include "irlm/spectral.hpp"
#include "irlm/variance.hpp"

namespace irlm::pipeline {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kParameter:
    case ErrorKind::kInvalidInput:
    case ErrorKind::kUnsupported:
    case ErrorKind::kDependency:
      return kExitConfig;
    case ErrorKind::kHypothesis:
    case ErrorKind::kDegenerate:
      return kExitHypothesis;
    case ErrorKind::kNumerical:
    case ErrorKind::kAmbiguousDominance:
    case ErrorKind::kEvaluation:
      return kExitNumerical;
  }
  return kExitFailure;
}

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::kDiagnose: return "diagnose";
    case Stage::kSimulate: return "simulate";
    case Stage::kVariance: return "variance";
    case Stage::kSpectral: return "spectral";
    case Stage::kClt: return "clt";
  }
  return "?";
}

std::set<Stage> stages_for(const std::string& sub) {
  if (sub == "diagnose") return {Stage::kDiagnose};
  if (sub == "simulate") return {Stage::kDiagnose, Stage::kSimulate};
  if (sub == "variance") return {Stage::kDiagnose, Stage::kSimulate, Stage::kVariance};
  if (sub == "spectral") return {Stage::kDiagnose, Stage::kSimulate, Stage::kSpectral};
  if (sub == "clt") return {Stage::kDiagnose, Stage::kSimulate, Stage::kVariance, Stage::kClt};
  if (sub == "run")
    return {Stage::kDiagnose, Stage::kSimulate, Stage::kVariance, Stage::kSpectral, Stage::kClt};
  throw Error(ErrorKind::kConfig, "unknown subcommand '" + sub + "'");
}

// ---------------------------------------------------------------------------
// Config schema

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::kConfig, path + ": " + what);
}

json linspace(double lo, double hi, int count) {
  json a = json::array();
  for (int i = 0; i < count; ++i) a.push_back(lo + (hi - lo) * i / (count - 1));
  return a;
}

json defaults() {
  json t_grid = linspace(-0.5, 0.5, 21);
  t_grid[10] = 0.0;
  return {
      {"seed", 1},
      {"diagnostics",
       {{"gamma0", 4.5}, {"n0max", 4}, {"nsamples", 20000}, {"confidence", 2.0},
        {"enumeration_cap", 65536}}},
      {"simulation",
       {{"initial", nullptr},
        {"cesaro_n", 4096},
        {"cesaro_chains", 64},
        {"burn_in", nullptr},
        {"horizon", 30},
        {"decay_paths", 10000},
        {"decay_initial", nullptr},
        {"drift_steps", 4096},
        {"drift_paths", 64},
        {"batch", {{"n_grid", {256, 1024, 4096}}, {"paths", 32768}}},
        {"poisson", {{"paths", 64}, {"max_terms", 200}, {"support_points", 65536}}}}},
      {"spectral",
       {{"enabled", true},
        {"nodes", 513},
        {"window", nullptr},
        {"simplex_resolution", 40},
        {"h", nullptr},
        {"t_grid", t_grid},
        {"taylor_order", 2},
        {"taylor_ladder", {0.2, 0.1, 0.05, 0.025}},
        {"scan", {{"from", 0.25}, {"to", std::numbers::pi}, {"count", 24}, {"margin", 1e-3}}},
        {"char_checks", {{"count", 3}, {"paths", 20000}, {"max_n", 20}}}}},
      {"harness",
       {{"clt", {{"n_grid", {256, 1024, 4096}}, {"paths", 20000}}}, {"local_clt", nullptr}}},
  };
}

json local_clt_defaults() {
  return {{"h", "gaussian"},
          {"width", 1.0},
          {"n_grid", {256, 1024, 4096}},
          {"paths", 20000},
          {"override", false}};
}

bool same_type(const json& def, const json& val) {
  if (def.is_null()) return true;
  if (def.is_boolean()) return val.is_boolean();
  if (def.is_number_integer()) return val.is_number_integer();
  if (def.is_number()) return val.is_number();
  if (def.is_string()) return val.is_string();
  if (def.is_array()) return val.is_array();
  if (def.is_object()) return val.is_object();
  return false;
}

const char* type_name(const json& def) {
  if (def.is_boolean()) return "a boolean";
  if (def.is_number_integer()) return "an integer";
  if (def.is_number()) return "a number";
  if (def.is_string()) return "a string";
  if (def.is_array()) return "an array";
  if (def.is_object()) return "an object";
  return "a value";
}

json merge(const json& def, const json& user, const std::string& path) {
  if (!user.is_object()) fail(path, "must be an object");
  json out = def;
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string p = path.empty() ? it.key() : path + "." + it.key();
    if (!def.contains(it.key())) fail(p, "unknown key");
    const json& d = def.at(it.key());
    if (it.key() == "local_clt" && !it.value().is_null()) {
      out[it.key()] = merge(local_clt_defaults(), it.value(), p);
      continue;
    }
    if (d.is_object() && !d.empty()) {
      out[it.key()] = merge(d, it.value(), p);
      continue;
    }
    if (!it.value().is_null() && !same_type(d, it.value())) fail(p, std::string("must be ") + type_name(d));
    out[it.key()] = it.value();
  }
  return out;
}

std::size_t count_at(const json& doc, const std::string& path, std::size_t min = 1) {
  const json* node = &doc;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) node = &node->at(part);
  if (!node->is_number_integer() || node->get<long long>() < static_cast<long long>(min))
    fail(path, "must be an integer >= " + std::to_string(min));
  return node->get<std::size_t>();
}

std::vector<std::size_t> grid_at(const json& doc, const std::string& path, std::size_t min_len) {
  const json* node = &doc;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) node = &node->at(part);
  if (!node->is_array() || node->size() < min_len)
    fail(path, "must be an array of at least " + std::to_string(min_len) + " counts");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < node->size(); ++i) {
    const json& v = (*node)[i];
    if (!v.is_number_integer() || v.get<long long>() < 1)
      fail(path + "[" + std::to_string(i) + "]", "must be a positive integer");
    if (!out.empty() && v.get<std::size_t>() <= out.back())
      fail(path, "must be strictly increasing");
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

double number_at(const json& obj, const std::string& key, const std::string& path, double def) {
  if (!obj.contains(key) || obj.at(key).is_null()) return def;
  if (!obj.at(key).is_number()) fail(path + "." + key, "must be a number");
  const double v = obj.at(key).get<double>();
  if (!std::isfinite(v)) fail(path + "." + key, "must be finite");
  return v;
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) fail(path, "must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) fail(path + "." + it.key(), "unknown key");
  }
}

// -- presets ---------------------------------------------------------------

json preset(const std::string& name, json& observable) {
  auto affine = [](json atoms) { return json{{"family", "affine"}, {"dim", 1}, {"atoms", atoms}}; };
  if (name == "doubling_ifs") {
    observable = {{"kind", "state"}, {"shift", 0.5}};
    json m = affine({{{"a", 0.5}, {"b", 0.0}, {"weight", 0.5}},
                     {{"a", 0.5}, {"b", 0.5}, {"weight", 0.5}}});
    m["name"] = name;
    return m;
  }
  if (name == "ar1_gaussian") {
    observable = {{"kind", "state"}};
    json m = affine({{{"a", 0.5}, {"b", 0.0}, {"weight", 1.0}}});
    m["noise"] = {{"gaussian_sd", 1.0}};
    m["name"] = name;
    return m;
  }
  if (name == "ar1_binary") {
    observable = {{"kind", "state"}};
    json m = affine({{{"a", 0.5}, {"b", -1.0}, {"weight", 0.5}},
                     {{"a", 0.5}, {"b", 1.0}, {"weight", 0.5}}});
    m["name"] = name;
    return m;
  }
  if (name == "label_pm1") {
    observable = {{"kind", "label"}};
    json m = affine({{{"a", 0.5}, {"b", -1.0}, {"weight", 0.5}, {"label", -1.0}},
                     {{"a", 0.5}, {"b", 1.0}, {"weight", 0.5}, {"label", 1.0}}});
    m["name"] = name;
    return m;
  }
  if (name == "identity") {
    observable = {{"kind", "state"}};
    json m = affine({{{"a", 1.0}, {"b", 0.0}, {"weight", 1.0}}});
    m["name"] = name;
    return m;
  }
  if (name == "matrix_2x2") {
    observable = {{"kind", "cocycle"}};
    return {{"family", "matrix"},
            {"name", name},
            {"dim", 2},
            {"atoms", {{{"matrix", {{2.0, 1.0}, {1.0, 2.0}}}, {"weight", 1.0}}}}};
  }
  fail("model.preset", "unknown preset '" + name + "'");
}

void validate_model(json& model, json& observable) {
  if (!model.is_object()) fail("model", "must be an object");
  if (model.contains("preset")) {
    if (!model.at("preset").is_string()) fail("model.preset", "must be a string");
    const std::string name = model.at("preset").get<std::string>();
    for (auto it = model.begin(); it != model.end(); ++it)
      if (it.key() != "preset") fail("model." + it.key(), "cannot be combined with a preset");
    json preset_obs;
    json expanded = preset(name, preset_obs);
    model = expanded;
    if (observable.is_null()) observable = preset_obs;
  }
  if (!model.contains("family") || !model.at("family").is_string())
    fail("model.family", "must be one of affine, functional_ar, matrix");
  const std::string family = model.at("family").get<std::string>();
  if (family == "affine") {
    check_keys(model, "model", {"family", "name", "dim", "alpha", "atoms", "noise"});
  } else if (family == "functional_ar") {
    check_keys(model, "model",
               {"family", "name", "dim", "alpha", "function", "kappa", "f_lip", "translations",
                "noise"});
  } else if (family == "matrix") {
    check_keys(model, "model",
               {"family", "name", "dim", "atoms", "noise", "gamma1_hint", "positivity_search_cap"});
  } else {
    fail("model.family", "unknown model family '" + family + "'");
  }
  if (!model.contains("name")) model["name"] = family;
  if (!model.contains("dim")) model["dim"] = family == "matrix" ? 2 : 1;
  if (!model.at("dim").is_number_integer()) fail("model.dim", "must be an integer");
  const int dim = model.at("dim").get<int>();
  if (dim < 1 || dim > kMaxDim) fail("model.dim", "must be in [1, 4]");
  if (family == "matrix" && dim < 2) fail("model.dim", "matrix models need dim >= 2");
  if (family != "matrix") {
    if (!model.contains("alpha")) model["alpha"] = 1.0;
    const double alpha = number_at(model, "alpha", "model", 1.0);
    if (!(alpha > 0.0 && alpha <= 1.0)) fail("model.alpha", "must be in (0, 1]");
  }
  const char* list = family == "functional_ar" ? "translations" : "atoms";
  if (!model.contains(list) || !model.at(list).is_array() || model.at(list).empty())
    fail(std::string("model.") + list, "must be a non-empty array");
  double total = 0.0;
  for (std::size_t i = 0; i < model.at(list).size(); ++i) {
    const std::string p = std::string("model.") + list + "[" + std::to_string(i) + "]";
    const json& a = model.at(list)[i];
    if (family == "matrix") check_keys(a, p, {"matrix", "weight"});
    else if (family == "functional_ar") check_keys(a, p, {"b", "weight", "label"});
    else check_keys(a, p, {"a", "b", "weight", "label"});
    const double w = number_at(a, "weight", p, -1.0);
    if (!(w > 0.0)) fail(p + ".weight", "must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) fail(std::string("model.") + list, "weights must sum to 1");
  if (model.contains("noise")) {
    const json& n = model.at("noise");
    if (family == "matrix") {
      check_keys(n, "model.noise", {"lognormal_sigma"});
      if (!(number_at(n, "lognormal_sigma", "model.noise", -1.0) >= 0.0))
        fail("model.noise.lognormal_sigma", "must be >= 0");
    } else {
      check_keys(n, "model.noise", {"gaussian_sd"});
      if (!(number_at(n, "gaussian_sd", "model.noise", -1.0) > 0.0))
        fail("model.noise.gaussian_sd", "must be > 0");
    }
  }
  if (family == "functional_ar") {
    if (!model.contains("function") || !model.at("function").is_string())
      fail("model.function", "must be \"tanh\" or \"sin\"");
    const std::string f = model.at("function").get<std::string>();
    if (f != "tanh" && f != "sin") fail("model.function", "must be \"tanh\" or \"sin\"");
    number_at(model, "kappa", "model", 1.0);
  }

  if (observable.is_null()) observable = json::object();
  check_keys(observable, "observable",
             {"kind", "coord", "shift", "value", "c0", "c_prev", "c_next", "c_label", "centering"});
  if (!observable.contains("kind")) observable["kind"] = family == "matrix" ? "cocycle" : "state";
  if (!observable.at("kind").is_string()) fail("observable.kind", "must be a string");
  const std::string kind = observable.at("kind").get<std::string>();
  static const std::set<std::string> kinds = {"zero",   "constant",   "state",
                                              "label",  "linear",     "coboundary",
                                              "label_times_state", "cocycle"};
  if (!kinds.count(kind)) fail("observable.kind", "unknown observable kind '" + kind + "'");
  if (family == "matrix" && kind != "cocycle")
    fail("observable.kind", "matrix models use the cocycle observable");
  if (family != "matrix" && kind == "cocycle")
    fail("observable.kind", "the cocycle observable needs a matrix model");
  if (observable.contains("coord")) {
    if (!observable.at("coord").is_number_integer()) fail("observable.coord", "must be an integer");
    const int c = observable.at("coord").get<int>();
    if (c < 0 || c >= dim) fail("observable.coord", "must index a state coordinate");
  }
  if (!observable.contains("centering")) observable["centering"] = family == "matrix" ? "estimate" : "none";
  const json& c = observable.at("centering");
  if (!(c.is_number() || (c.is_string() && (c == "estimate" || c == "none"))))
    fail("observable.centering", "must be a number, \"estimate\" or \"none\"");
}

StatePoint point_from(const json& v, int dim, const std::string& path) {
  if (v.is_number()) {
    if (dim != 1) fail(path, "needs " + std::to_string(dim) + " coordinates");
    return StatePoint(v.get<double>());
  }
  if (!v.is_array() || static_cast<int>(v.size()) != dim)
    fail(path, "needs " + std::to_string(dim) + " coordinates");
  VecQ x(dim);
  for (int i = 0; i < dim; ++i) {
    if (!v[static_cast<std::size_t>(i)].is_number()) fail(path, "coordinates must be numbers");
    x[i] = v[static_cast<std::size_t>(i)].get<double>();
  }
  return StatePoint(x);
}

MatQ matrix_from(const json& v, int dim, const std::string& path) {
  if (v.is_number()) {
    if (dim != 1) fail(path, "must be a " + std::to_string(dim) + "x" + std::to_string(dim) + " matrix");
    return MatQ::Constant(1, 1, v.get<double>());
  }
  if (!v.is_array() || static_cast<int>(v.size()) != dim)
    fail(path, "must be a " + std::to_string(dim) + "x" + std::to_string(dim) + " matrix");
  MatQ m(dim, dim);
  for (int r = 0; r < dim; ++r) {
    const json& row = v[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != dim)
      fail(path, "must be a " + std::to_string(dim) + "x" + std::to_string(dim) + " matrix");
    for (int c = 0; c < dim; ++c) {
      if (!row[static_cast<std::size_t>(c)].is_number()) fail(path, "entries must be numbers");
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

VecQ vector_from(const json& v, int dim, const std::string& path) {
  return point_from(v, dim, path).coords;
}

void validate_numbers(const json& doc) {
  count_at(doc, "diagnostics.n0max");
  count_at(doc, "diagnostics.nsamples", 10);
  count_at(doc, "diagnostics.enumeration_cap");
  if (!(doc["diagnostics"]["gamma0"].get<double>() > 0.0)) fail("diagnostics.gamma0", "must be > 0");
  if (!(doc["diagnostics"]["confidence"].get<double>() > 0.0)) fail("diagnostics.confidence", "must be > 0");
  count_at(doc, "simulation.cesaro_n");
  count_at(doc, "simulation.cesaro_chains");
  count_at(doc, "simulation.horizon");
  count_at(doc, "simulation.decay_paths", 2);
  count_at(doc, "simulation.drift_steps");
  count_at(doc, "simulation.drift_paths");
  if (!doc["simulation"]["burn_in"].is_null() && !doc["simulation"]["burn_in"].is_number_integer())
    fail("simulation.burn_in", "must be an integer or null");
  if (!doc["simulation"]["burn_in"].is_null()) count_at(doc, "simulation.burn_in", 0);
  grid_at(doc, "simulation.batch.n_grid", 3);
  count_at(doc, "simulation.batch.paths", 2);
  count_at(doc, "simulation.poisson.paths", 2);
  count_at(doc, "simulation.poisson.max_terms");
  count_at(doc, "simulation.poisson.support_points", 16);
  count_at(doc, "spectral.nodes", 3);
  count_at(doc, "spectral.simplex_resolution", 2);
  const int order = doc["spectral"]["taylor_order"].get<int>();
  if (order < 1 || order > 3) fail("spectral.taylor_order", "must be 1, 2 or 3");
  const json& w = doc["spectral"]["window"];
  if (!w.is_null() && !(w.is_array() && w.size() == 2 && w[0].is_number() && w[1].is_number() &&
                        w[0].get<double>() < w[1].get<double>()))
    fail("spectral.window", "must be [lo, hi] with lo < hi");
  const json& h = doc["spectral"]["h"];
  if (!h.is_null() && !(h.is_number() && h.get<double>() > 0.0)) fail("spectral.h", "must be > 0");
  for (const char* key : {"t_grid", "taylor_ladder"}) {
    const json& a = doc["spectral"][key];
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!a[i].is_number()) fail(std::string("spectral.") + key + "[" + std::to_string(i) + "]", "must be a number");
  }
  count_at(doc, "spectral.scan.count");
  if (!(doc["spectral"]["scan"]["from"].get<double>() > 0.0) ||
      !(doc["spectral"]["scan"]["to"].get<double>() >= doc["spectral"]["scan"]["from"].get<double>()))
    fail("spectral.scan", "needs 0 < from <= to");
  count_at(doc, "spectral.char_checks.count", 0);
  count_at(doc, "spectral.char_checks.paths", 2);
  count_at(doc, "spectral.char_checks.max_n");
  grid_at(doc, "harness.clt.n_grid", 1);
  count_at(doc, "harness.clt.paths", 2);
  if (!doc["harness"]["local_clt"].is_null()) {
    grid_at(doc, "harness.local_clt.n_grid", 1);
    count_at(doc, "harness.local_clt.paths", 2);
    const std::string name = doc["harness"]["local_clt"]["h"].get<std::string>();
    if (name != "gaussian" && name != "triangle" && name != "raised_cosine")
      fail("harness.local_clt.h", "must be gaussian, triangle or raised_cosine");
    if (!(doc["harness"]["local_clt"]["width"].get<double>() > 0.0))
      fail("harness.local_clt.width", "must be > 0");
  }
  const int dim = doc["model"]["dim"].get<int>();
  for (const char* key : {"initial", "decay_initial"})
    if (!doc["simulation"][key].is_null())
      point_from(doc["simulation"][key], dim, std::string("simulation.") + key);
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"doubling_ifs", "ar1_gaussian", "ar1_binary", "label_pm1", "identity", "matrix_2x2"};
}

Config parse_config(const json& doc, const std::string& source) {
  try {
    if (!doc.is_object()) fail("<root>", "config must be a JSON object");
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      static const std::set<std::string> sections = {"seed",       "model",    "observable",
                                                     "diagnostics", "simulation", "spectral",
                                                     "harness"};
      if (!sections.count(it.key())) fail(it.key(), "unknown section");
    }
    if (!doc.contains("model")) fail("model", "section is required");
    json rest = doc;
    json model = rest["model"];
    json observable = rest.contains("observable") ? rest["observable"] : json();
    rest.erase("model");
    rest.erase("observable");
    json merged = merge(defaults(), rest, "");
    validate_model(model, observable);
    merged["model"] = model;
    merged["observable"] = observable;
    if (!merged["seed"].is_number_unsigned() && !(merged["seed"].is_number_integer() && merged["seed"].get<long long>() >= 0))
      fail("seed", "must be a non-negative integer");
    validate_numbers(merged);
    Config cfg;
    cfg.doc = merged;
    cfg.source = source;
    cfg.seed = merged["seed"].get<std::uint64_t>();
    return cfg;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig) throw Error(ErrorKind::kConfig, source + ": " + e.what());
    throw;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfig, source + ": " + e.what());
  }
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kConfig, path.string() + ": cannot open config");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
  return parse_config(doc, path.string());
}

std::string config_hash(const Config& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.doc.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

Config apply_overrides(const Config& config, const Overrides& o) {
  json doc = config.doc;
  if (o.seed) doc["seed"] = *o.seed;
  if (o.horizon) doc["simulation"]["horizon"] = *o.horizon;
  if (o.paths) {
    doc["simulation"]["decay_paths"] = *o.paths;
    doc["simulation"]["batch"]["paths"] = *o.paths;
    doc["spectral"]["char_checks"]["paths"] = *o.paths;
    doc["harness"]["clt"]["paths"] = *o.paths;
    if (!doc["harness"]["local_clt"].is_null()) doc["harness"]["local_clt"]["paths"] = *o.paths;
  }
  return parse_config(doc, config.source);
}

// ---------------------------------------------------------------------------
// Model construction

SystemModel build_model(const Config& config) {
  const json& m = config.doc.at("model");
  const json& o = config.doc.at("observable");
  const std::string family = m.at("family").get<std::string>();
  const int dim = m.at("dim").get<int>();
  const int coord = o.value("coord", 0);
  const double shift = o.value("shift", 0.0);
  const std::string kind = o.at("kind").get<std::string>();
  const json& centering = o.at("centering");
  const std::uint64_t seed = config.seed;

  if (family == "matrix") {
    models::PositiveMatrixSpec spec;
    spec.name = m.at("name").get<std::string>();
    spec.dim = dim;
    for (std::size_t i = 0; i < m.at("atoms").size(); ++i) {
      const json& a = m.at("atoms")[i];
      const std::string p = "model.atoms[" + std::to_string(i) + "]";
      if (!a.contains("matrix")) fail(p + ".matrix", "is required");
      MatQ g = matrix_from(a.at("matrix"), dim, p + ".matrix");
      if ((g.array() < 0.0).any()) fail(p + ".matrix", "entries must be nonnegative");
      if (!models::allowable(g)) fail(p + ".matrix", "must be allowable (a positive entry in every row and column)");
      spec.atoms.push_back({g, a.at("weight").get<double>()});
    }
    if (m.contains("noise")) spec.noise = LogNormalEntries{m["noise"]["lognormal_sigma"].get<double>()};
    if (m.contains("positivity_search_cap")) spec.positivity_search_cap = m["positivity_search_cap"].get<int>();
    std::optional<double> hint;
    if (m.contains("gamma1_hint")) hint = m["gamma1_hint"].get<double>();
    if (centering.is_number()) hint = centering.get<double>();
    models::DriftOptions drift;
    drift.steps = config.doc["simulation"]["drift_steps"].get<std::size_t>();
    drift.paths = config.doc["simulation"]["drift_paths"].get<std::size_t>();
    drift.seed = stream_seed(seed, 2);
    if (centering.is_string() && centering == "none") hint = 0.0;
    SystemModel model = models::make_matrix_model(spec, hint, drift);
    if (centering.is_string() && centering == "none") return model.with_centering(0.0, "none");
    return model;
  }

  Observable xi;
  if (kind == "zero") xi = Observable::zero();
  else if (kind == "constant") xi = Observable::constant(o.value("value", 0.0));
  else if (kind == "state") xi = Observable::state(coord, shift);
  else if (kind == "label") xi = Observable::label();
  else if (kind == "linear")
    xi = Observable::linear(o.value("c0", 0.0), o.value("c_prev", 0.0), o.value("c_next", 0.0),
                            o.value("c_label", 0.0), coord);
  else if (kind == "coboundary") xi = Observable::coboundary_of_state(coord);
  else if (kind == "label_times_state") xi = Observable::label_times_state(coord, shift);

  std::optional<GaussianTranslation> noise;
  if (m.contains("noise")) noise = GaussianTranslation{m["noise"]["gaussian_sd"].get<double>()};

  SystemModel model = [&]() {
    if (family == "affine") {
      models::AffineSpec spec;
      spec.name = m.at("name").get<std::string>();
      spec.dim = dim;
      spec.alpha = m.at("alpha").get<double>();
      spec.noise = noise;
      for (std::size_t i = 0; i < m.at("atoms").size(); ++i) {
        const json& a = m.at("atoms")[i];
        const std::string p = "model.atoms[" + std::to_string(i) + "]";
        models::AffineAtom atom;
        atom.a = a.contains("a") ? matrix_from(a.at("a"), dim, p + ".a") : MatQ::Identity(dim, dim);
        atom.b = a.contains("b") ? vector_from(a.at("b"), dim, p + ".b") : VecQ::Zero(dim);
        atom.weight = a.at("weight").get<double>();
        atom.label = a.value("label", 0.0);
        spec.atoms.push_back(atom);
      }
      return models::make_affine(spec, xi);
    }
    models::FunctionalARSpec spec;
    spec.name = m.at("name").get<std::string>();
    spec.dim = dim;
    spec.alpha = m.at("alpha").get<double>();
    const double kappa = m.value("kappa", 1.0);
    spec.f = models::named_function(m.at("function").get<std::string>(), kappa);
    spec.f_lip = m.contains("f_lip") ? m["f_lip"].get<double>() : std::abs(kappa);
    spec.noise = noise;
    for (std::size_t i = 0; i < m.at("translations").size(); ++i) {
      const json& a = m.at("translations")[i];
      models::AffineAtom atom;
      atom.b = a.contains("b") ? vector_from(a.at("b"), dim, "model.translations[" + std::to_string(i) + "].b")
                               : VecQ::Zero(dim);
      atom.weight = a.at("weight").get<double>();
      atom.label = a.value("label", 0.0);
      spec.translations.push_back(atom);
    }
    return models::make_functional_ar(spec, xi);
  }();

  if (centering.is_number()) return model.with_centering(centering.get<double>(), "config");
  if (centering == "estimate") {
    const auto& sim = config.doc["simulation"];
    const Estimate e = simulate::estimate_drift(model, sim["drift_steps"].get<std::size_t>(),
                                                sim["drift_paths"].get<std::size_t>(),
                                                stream_seed(seed, 2), 64);
    return model.with_centering(e.value, "estimated");
  }
  return model;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

json est_json(const Estimate& e) {
  return {{"value", e.value}, {"se", e.se}, {"count", e.count}, {"excluded", e.excluded}, {"exact", e.exact}};
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

class Csv {
 public:
  Csv(const std::string& hash, std::uint64_t seed, std::initializer_list<const char*> header) {
    os_ << "# config_hash=" << hash << " seed=" << seed << "\n";
    bool first = true;
    for (const char* h : header) {
      os_ << (first ? "" : ",") << h;
      first = false;
    }
    os_ << "\n";
  }
  template <class... T>
  void row(const T&... values) {
    bool first = true;
    ((os_ << (first ? "" : ",") << cell(values), first = false), ...);
    os_ << "\n";
  }
  std::string str() const { return os_.str(); }

 private:
  static std::string cell(double v) { return num(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }
  std::ostringstream os_;
};

struct Context {
  const Config& config;
  std::filesystem::path out;
  std::string hash;
  RunResult result;
  std::optional<SystemModel> model;
  std::optional<double> kappa0;
  std::optional<simulate::EmpiricalMeasure> nu;
  StatePoint initial;
  std::optional<variance::VarianceEstimate> batch, poisson;
  std::optional<variance::DegeneracyReport> degeneracy;
  double sigma2_used = 0.0;
  std::string sigma2_source;
  std::optional<std::string> scan_verdict;

  std::uint64_t seed(std::uint64_t stage) const { return stream_seed(config.seed, stage); }

  json header(const std::string& name) const {
    json j;
    j["report"] = name;
    j["config_hash"] = hash;
    j["seed"] = config.seed;
    j["model"] = model ? model->name() : config.doc["model"]["name"].get<std::string>();
    return j;
  }

  void write(const std::string& file, const std::string& text) {
    std::ofstream f(out / file, std::ios::binary);
    if (!f) throw Error(ErrorKind::kConfig, "cannot write " + (out / file).string());
    f << text;
    result.written.push_back(file);
  }
  void write_json(const std::string& name, const json& j) { write(name + ".json", j.dump(2) + "\n"); }

  void hard_fail(int code, const std::string& msg) {
    if (result.exit_code == kExitOk) result.exit_code = code;
    result.messages.push_back(msg);
  }
};

json envelope_json(const SystemModel& m) {
  const auto env = m.envelope();
  return {{"r", env.r}, {"s", env.s}};
}

bool stage_diagnose(Context& cx) {
  const json& d = cx.config.doc["diagnostics"];
  diagnostics::Options opts;
  opts.nsamples = d["nsamples"].get<std::size_t>();
  opts.seed = cx.seed(1);
  opts.confidence = d["confidence"].get<double>();
  opts.enumeration_cap = d["enumeration_cap"].get<std::size_t>();
  const double gamma0 = d["gamma0"].get<double>();
  json j = cx.header("diagnose");
  j["family"] = to_string(cx.model->family());
  j["finite_support"] = cx.model->finite_support();
  j["centering"] = {{"value", cx.model->centering()}, {"source", cx.model->centering_source()}};
  j["envelope"] = envelope_json(*cx.model);
  const auto rep = diagnostics::check_H(*cx.model, gamma0, d["n0max"].get<std::size_t>(), opts);
  auto integral = [](const diagnostics::IntegralEstimate& e) {
    return json{{"estimate", est_json(e.estimate)},
                {"finite", diagnostics::to_string(e.finite)},
                {"basis", e.basis},
                {"empirical", diagnostics::to_string(e.empirical)},
                {"running_mean_spread", e.running_mean_spread},
                {"tail_share", e.tail_share}};
  };
  j["gamma0"] = gamma0;
  j["eta_M"] = rep.eta_M;
  j["eta_Mprime"] = rep.eta_Mprime;
  j["M"] = integral(rep.M);
  j["Mprime"] = integral(rep.Mprime);
  json cs = json::array();
  Csv csv(cx.hash, cx.config.seed, {"n", "C", "se", "exact"});
  for (const auto& [n, e] : rep.C) {
    cs.push_back({{"n", n}, {"estimate", est_json(e)}});
    csv.row(n, e.value, e.se, e.exact ? "true" : "false");
  }
  j["C"] = cs;
  j["verdicts"] = {{"M", diagnostics::to_string(rep.M_verdict)},
                   {"Mprime", diagnostics::to_string(rep.Mprime_verdict)},
                   {"C", diagnostics::to_string(rep.C_verdict)},
                   {"H", diagnostics::to_string(rep.H_verdict)}};
  j["n0"] = rep.n0 ? json(*rep.n0) : json();
  j["exact_lipschitz"] = rep.exact_lipschitz;
  json th = json::array();
  for (const auto& t : rep.thresholds)
    th.push_back({{"claim", t.claim}, {"threshold", t.threshold}, {"cleared", t.cleared}});
  j["thresholds"] = th;
  if (rep.n0) {
    cx.kappa0 = diagnostics::kappa0(rep);
    j["kappa0"] = *cx.kappa0;
    try {
      const auto l0 = diagnostics::find_lambda0(*cx.model, gamma0, *rep.n0, opts);
      j["lambda0"] = {{"lambda0", l0.lambda0}, {"theta0", est_json(l0.theta0)}};
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kHypothesis) throw;
      j["lambda0"] = {{"lambda0", nullptr}, {"note", e.what()}};
    }
  }
  const bool failed = rep.H_verdict == diagnostics::Verdict::kFails;
  j["status"] = failed ? "hypothesis-fails" : "ok";
  if (rep.H_verdict == diagnostics::Verdict::kInconclusive)
    spdlog::warn("the moment hypothesis is inconclusive; continuing");
  cx.write_json("diagnose", j);
  cx.write("diagnose_contraction.csv", csv.str());
  if (failed) {
    cx.hard_fail(kExitHypothesis, "the contraction hypothesis fails for gamma0 = " + num(gamma0));
    return false;
  }
  return true;
}

bool stage_simulate(Context& cx) {
  const json& s = cx.config.doc["simulation"];
  const std::size_t burn =
      s["burn_in"].is_null() ? (cx.kappa0 ? simulate::default_burn_in(*cx.kappa0) : 64)
                             : s["burn_in"].get<std::size_t>();
  cx.nu = simulate::cesaro_measure(*cx.model, s["cesaro_n"].get<std::size_t>(), cx.seed(3),
                                   s["cesaro_chains"].get<std::size_t>(), burn, cx.initial);
  json j = cx.header("simulate");
  j["centering"] = {{"value", cx.model->centering()}, {"source", cx.model->centering_source()}};
  if (cx.model->family() == Family::kPositiveMatrix) j["lyapunov_exponent"] = cx.model->centering();
  j["burn_in"] = burn;
  j["nu_hat"] = {{"points", cx.nu->points.size()}, {"chains", cx.nu->chains}, {"origin", cx.nu->origin}};
  json coords = json::array();
  for (int c = 0; c < cx.model->dim(); ++c)
    coords.push_back({{"coord", c},
                      {"mean", est_json(simulate::measure_mean(*cx.nu, c))},
                      {"variance", est_json(simulate::measure_variance(*cx.nu, c))}});
  j["stationary"] = coords;
  const StatePoint start =
      s["decay_initial"].is_null() ? cx.initial : point_from(s["decay_initial"], cx.model->dim(), "simulation.decay_initial");
  const auto decay = simulate::ergodicity_decay(
      *cx.model, simulate::InitialLaw::point_mass(start), *cx.nu, s["horizon"].get<std::size_t>(),
      s["decay_paths"].get<std::size_t>(), cx.seed(4), cx.kappa0);
  Csv csv(cx.hash, cx.config.seed, {"n", "w1"});
  for (const auto& p : decay.table) csv.row(p.n, p.w1);
  j["decay"] = {{"initial", describe(start)},
                {"noise_floor", decay.noise_floor},
                {"slope", std::isfinite(decay.slope) ? json(decay.slope) : json()},
                {"fitted_points", decay.fitted_points},
                {"reference_slope", decay.reference_slope ? json(*decay.reference_slope) : json()},
                {"projected", decay.projected}};
  j["status"] = "ok";
  cx.write_json("simulate", j);
  cx.write("simulate_decay.csv", csv.str());
  return true;
}

simulate::EmpiricalMeasure thin(const simulate::EmpiricalMeasure& nu, std::size_t max_points) {
  if (nu.points.size() <= max_points) return nu;
  const std::size_t chains = std::max<std::size_t>(1, nu.chains);
  const std::size_t len = nu.points.size() / chains;
  const std::size_t stride = (nu.points.size() + max_points - 1) / max_points;
  simulate::EmpiricalMeasure out;
  out.chains = chains;
  out.origin = nu.origin + "-thinned";
  for (std::size_t c = 0; c < chains; ++c)
    for (std::size_t k = 0; k < len; k += stride) out.points.push_back(nu.points[c * len + k]);
  out.weights.assign(out.points.size(), 1.0 / static_cast<double>(out.points.size()));
  out.n_used = out.points.size();
  return out;
}

json variance_json(const variance::VarianceEstimate& v) {
  const auto& d = v.diagnostics;
  json j = {{"method", v.method}, {"sigma2", v.sigma2}, {"raw", v.raw},
            {"se", v.se},         {"tail_bound", v.tail_bound}, {"clamped", v.clamped}};
  if (v.method == "batch") {
    j["n_grid"] = d.n_grid;
    j["slope"] = d.slope;
  } else {
    j["truncation"] = d.truncation;
    j["decay_rate"] = d.decay_rate;
    j["eval_points"] = d.eval_points;
    j["pairs"] = d.pairs;
    j["recentering"] = d.recentering;
    j["residual_max"] = d.residual_max;
    j["residual_exact"] = d.residual_exact;
    j["se_nu"] = d.se_nu;
    j["se_paths"] = d.se_paths;
  }
  return j;
}

std::optional<variance::ProductForm> product_form(const Config& config) {
  const json& o = config.doc["observable"];
  const std::string kind = o["kind"].get<std::string>();
  const int coord = o.value("coord", 0);
  const double shift = o.value("shift", 0.0);
  if (kind == "label")
    return variance::ProductForm{[](const Map& g) { return g.label; },
                                 [](const StatePoint&) { return 1.0; }};
  if (kind == "label_times_state")
    return variance::ProductForm{[](const Map& g) { return g.label; },
                                 [coord, shift](const StatePoint& x) { return x[coord] - shift; }};
  return std::nullopt;
}

bool stage_variance(Context& cx) {
  const json& s = cx.config.doc["simulation"];
  json j = cx.header("variance");
  cx.batch = variance::sigma2_batch(*cx.model, simulate::InitialLaw::point_mass(cx.initial),
                                    grid_at(cx.config.doc, "simulation.batch.n_grid", 3),
                                    s["batch"]["paths"].get<std::size_t>(), cx.seed(5));
  const auto nu = thin(*cx.nu, s["poisson"]["support_points"].get<std::size_t>());
  variance::PoissonOptions po;
  po.paths = s["poisson"]["paths"].get<std::size_t>();
  po.max_terms = s["poisson"]["max_terms"].get<std::size_t>();
  po.seed = cx.seed(6);
  cx.poisson = variance::sigma2_poisson(*cx.model, nu, po);
  variance::DegeneracyOptions dopt;
  dopt.seed = cx.seed(7);
  cx.degeneracy = variance::degeneracy_test(*cx.model, nu, *cx.batch, cx.poisson,
                                            product_form(cx.config), dopt);
  const auto& b = *cx.batch;
  const auto& p = *cx.poisson;
  const double tol = 3.0 * (std::hypot(b.se, p.se) + p.tail_bound) + 1e-9;
  const bool agree = std::abs(b.sigma2 - p.sigma2) <= tol;
  // The estimate with the smaller standard error feeds later stages.
  const bool use_batch = b.se <= p.se;
  cx.sigma2_used = use_batch ? b.sigma2 : p.sigma2;
  cx.sigma2_source = use_batch ? "batch" : "poisson";
  j["batch"] = variance_json(b);
  j["poisson"] = variance_json(p);
  j["agreement"] = {{"difference", b.sigma2 - p.sigma2}, {"tolerance", tol}, {"agree", agree}};
  const auto& dg = *cx.degeneracy;
  j["degeneracy"] = {{"verdict", variance::to_string(dg.verdict)},
                     {"reason", dg.reason},
                     {"positivity_guaranteed", dg.positivity_guaranteed},
                     {"u_mean", dg.u_mean ? est_json(*dg.u_mean) : json()},
                     {"fitted", dg.fitted},
                     {"residual_rms", dg.residual_rms},
                     {"residual_max", dg.residual_max},
                     {"basis", dg.basis},
                     {"coefficients", dg.coefficients}};
  j["sigma2_used"] = {{"value", cx.sigma2_used}, {"source", cx.sigma2_source}};
  j["status"] = agree ? "ok" : "routes-disagree";
  Csv csv(cx.hash, cx.config.seed, {"n", "n_inv_mean_s2", "se", "mean_s"});
  for (std::size_t k = 0; k < b.diagnostics.n_grid.size(); ++k)
    csv.row(b.diagnostics.n_grid[k], b.diagnostics.per_n[k].value, b.diagnostics.per_n[k].se,
            b.diagnostics.mean_sum[k]);
  cx.write_json("variance", j);
  cx.write("variance_batch.csv", csv.str());
  if (!agree) {
    cx.hard_fail(kExitNumerical, "batch and Poisson variance estimates disagree");
    return false;
  }
  return true;
}

bool stage_spectral(Context& cx) {
  const json& sp = cx.config.doc["spectral"];
  json j = cx.header("spectral");
  auto skip = [&](const std::string& why) {
    j["status"] = "skipped";
    j["reason"] = why;
    cx.write_json("spectral", j);
    return true;
  };
  if (!sp["enabled"].get<bool>()) return skip("disabled in the config");
  if (!cx.model->finite_support()) return skip("operator routes need a finite-support map law");
  spectral::GridOptions go;
  go.nodes = sp["nodes"].get<std::size_t>();
  go.simplex_resolution = sp["simplex_resolution"].get<std::size_t>();
  if (!sp["window"].is_null()) go.window = std::make_pair(sp["window"][0].get<double>(), sp["window"][1].get<double>());
  std::optional<spectral::OperatorGrid> grid;
  try {
    grid = spectral::default_grid(*cx.model, *cx.nu, go);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kUnsupported) throw;
    return skip(e.what());
  }
  const auto w = spectral::node_weights(*grid, *cx.nu);
  j["grid"] = {{"description", grid->describe()}, {"nodes", grid->size()},
               {"window_mass", spectral::window_mass(*grid, *cx.nu)}};
  const auto p0 = spectral::build_operator(*cx.model, *grid, 0.0);
  const auto e0 = spectral::leading_eigen(p0, w);
  const double row_err = p0.max_row_sum_error();
  j["p0"] = {{"row_sum_error", row_err},
             {"leak_mean", p0.leak_mean},
             {"leak_max", p0.leak_max},
             {"lambda", {e0.lambda.real(), e0.lambda.imag()}},
             {"second_modulus", e0.second_modulus},
             {"second_converged", e0.second_converged},
             {"gap", e0.gap}};

  spectral::ExpansionOptions eo;
  if (!sp["h"].is_null()) eo.h = sp["h"].get<double>();
  eo.sigma2_prior = cx.sigma2_used;
  for (const auto& t : sp["t_grid"]) eo.t_grid.push_back(t.get<double>());
  const auto ex = spectral::lambda_expansion(*cx.model, *grid, w, eo);
  Csv lam(cx.hash, cx.config.seed, {"t", "re", "im", "modulus", "gap", "remainder_ratio"});
  for (const auto& p : ex.table)
    lam.row(p.t, p.lambda.real(), p.lambda.imag(), std::abs(p.lambda), p.gap, p.remainder_ratio);
  j["expansion"] = {{"m_hat", ex.m_hat},
                    {"sigma2_hat", ex.sigma2_hat},
                    {"h", ex.h},
                    {"sigma2_pair", ex.sigma2_pair},
                    {"m_pair", ex.m_pair},
                    {"max_modulus", ex.max_modulus},
                    {"max_conjugate_error", ex.max_conjugate_error}};

  std::vector<double> ladder;
  for (const auto& t : sp["taylor_ladder"]) ladder.push_back(t.get<double>());
  const auto dk = spectral::derivative_kernels(*cx.model, *grid, sp["taylor_order"].get<int>(), ladder);
  Csv tay(cx.hash, cx.config.seed, {"order", "t", "residual", "normalized"});
  json tj = json::array();
  for (const auto& r : dk.residuals) {
    tay.row(r.order, r.t, r.residual, r.normalized);
    tj.push_back({{"order", r.order}, {"t", r.t}, {"residual", r.residual}, {"normalized", r.normalized}});
  }
  j["taylor"] = tj;

  const json& sc = sp["scan"];
  std::vector<double> ts;
  const std::size_t count = sc["count"].get<std::size_t>();
  for (std::size_t k = 0; k < count; ++k)
    ts.push_back(count == 1 ? sc["from"].get<double>()
                            : sc["from"].get<double>() + (sc["to"].get<double>() - sc["from"].get<double>()) *
                                                             static_cast<double>(k) / static_cast<double>(count - 1));
  const auto scan = spectral::peripheral_scan(*cx.model, *grid, ts, sc["margin"].get<double>());
  cx.scan_verdict = scan.verdict;
  Csv scsv(cx.hash, cx.config.seed, {"t", "modulus", "note"});
  for (const auto& p : scan.points) scsv.row(p.t, p.modulus, p.note);
  json rj = json::array();
  for (const auto& r : scan.rational)
    rj.push_back({{"rho1", r.rho1}, {"rho2", r.rho2}, {"ratio", std::isfinite(r.ratio) ? json(r.ratio) : json()},
                  {"fraction", r.fraction ? json{r.fraction->first, r.fraction->second} : json()},
                  {"status", r.status}});
  j["scan"] = {{"max_modulus", scan.max_modulus}, {"worst_t", scan.worst_t}, {"verdict", scan.verdict},
               {"rational", rj}, {"rational_verdict", scan.rational_verdict}};

  const json& cc = sp["char_checks"];
  Rng rng = make_rng(cx.seed(8), 0);
  json cj = json::array();
  double worst_z = 0.0;
  for (std::size_t k = 0; k < cc["count"].get<std::size_t>(); ++k) {
    const double t = 2.0 * uniform01(rng) - 1.0;
    const std::size_t n = 1 + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(cc["max_n"].get<std::size_t>()));
    const double omega = 2.0 * uniform01(rng), phase = std::numbers::pi * uniform01(rng);
    const int coord = 0;
    auto f = [omega, phase, coord](const StatePoint& x) { return std::cos(omega * x[coord] + phase); };
    const auto c = spectral::char_function_check(*cx.model, *grid, simulate::InitialLaw::point_mass(cx.initial), f, t,
                                                 n, cc["paths"].get<std::size_t>(), stream_seed(cx.seed(8), k + 1));
    worst_z = std::max(worst_z, c.z);
    cj.push_back({{"t", t}, {"n", n}, {"omega", omega}, {"phase", phase},
                  {"operator", {c.operator_value.real(), c.operator_value.imag()}},
                  {"monte_carlo", {c.mc_value.real(), c.mc_value.imag()}},
                  {"se", {c.se_re, c.se_im}},
                  {"interpolation_allowance", c.interpolation_allowance},
                  {"z", c.z}});
  }
  j["char_checks"] = cj;

  json three = {{"spectral", ex.sigma2_hat}};
  if (cx.batch) {
    three["batch"] = cx.batch->sigma2;
    three["poisson"] = cx.poisson->sigma2;
    const double tol = 3.0 * (std::hypot(cx.batch->se, cx.poisson->se) + cx.poisson->tail_bound) +
                       0.01 * std::abs(ex.sigma2_hat);
    three["tolerance"] = tol;
    three["agree"] = std::abs(ex.sigma2_hat - cx.batch->sigma2) <= tol &&
                     std::abs(ex.sigma2_hat - cx.poisson->sigma2) <= tol;
  }
  j["three_way"] = three;

  std::vector<std::string> problems;
  if (row_err > 1e-10) problems.push_back("P(0) is not row-stochastic");
  if (std::abs(e0.lambda - 1.0) > 1e-8) problems.push_back("lambda(0) differs from 1");
  if (ex.max_modulus > 1.0 + 1e-8) problems.push_back("|lambda(t)| exceeds 1");
  if (ex.max_conjugate_error > 1e-10) problems.push_back("lambda(-t) differs from conj lambda(t)");
  j["problems"] = problems;
  j["status"] = problems.empty() ? "ok" : "inconsistent";
  cx.write_json("spectral", j);
  cx.write("spectral_lambda.csv", lam.str());
  cx.write("spectral_taylor.csv", tay.str());
  cx.write("spectral_scan.csv", scsv.str());
  if (!problems.empty()) {
    for (const auto& p : problems) cx.hard_fail(kExitNumerical, p);
    return false;
  }
  return true;
}

bool stage_clt(Context& cx) {
  const json& h = cx.config.doc["harness"];
  json j = cx.header("clt");
  j["footnote"] =
      "the Berry-Esseen constant depends on moments of the initial law; only max D_n sqrt(n) is reported";
  const bool degenerate = cx.degeneracy && cx.degeneracy->verdict == variance::Degeneracy::kCoboundarySuspected;
  const auto init = simulate::InitialLaw::point_mass(cx.initial);
  Csv csv(cx.hash, cx.config.seed, {"n", "paths", "ks", "ks_sqrt_n"});
  if (degenerate || !(cx.sigma2_used > 0.0)) {
    j["clt"] = {{"status", "refused"}, {"reason", "sigma^2 is zero or a coboundary is suspected"}};
  } else {
    const auto rep = harness::clt_test(*cx.model, init, cx.sigma2_used, cx.sigma2_source,
                                       grid_at(cx.config.doc, "harness.clt.n_grid", 1),
                                       h["clt"]["paths"].get<std::size_t>(), cx.seed(9));
    json rows = json::array();
    for (const auto& r : rep.rows) {
      rows.push_back({{"n", r.n}, {"paths", r.paths}, {"ks", r.ks}, {"ks_sqrt_n", r.ks_sqrt_n}});
      csv.row(r.n, r.paths, r.ks, r.ks_sqrt_n);
    }
    j["clt"] = {{"status", "ok"},
                {"sigma2", rep.sigma2},
                {"sigma2_source", rep.sigma2_source},
                {"rows", rows},
                {"max_ks_sqrt_n", rep.max_ks_sqrt_n},
                {"trend", {{"rho", rep.trend.rho}, {"p_value", rep.trend.p_value},
                           {"increasing", rep.trend.increasing}, {"method", rep.trend.method}}},
                {"verdict", rep.verdict}};
  }
  cx.write("clt.csv", csv.str());
  if (!h["local_clt"].is_null()) {
    const json& l = h["local_clt"];
    const auto fn = harness::TestFunction::by_name(l["h"].get<std::string>(), l["width"].get<double>());
    try {
      if (degenerate || !(cx.sigma2_used > 0.0))
        throw Error(ErrorKind::kDegenerate, "local limit test refused: sigma^2 = 0");
      const auto rep = harness::local_clt_test(
          *cx.model, init, cx.sigma2_used, fn, grid_at(cx.config.doc, "harness.local_clt.n_grid", 1),
          l["paths"].get<std::size_t>(), cx.seed(10),
          cx.scan_verdict && *cx.scan_verdict == "nonarithmetic-consistent", l["override"].get<bool>());
      Csv lc(cx.hash, cx.config.seed, {"n", "value", "se", "gap"});
      json rows = json::array();
      for (const auto& r : rep.rows) {
        rows.push_back({{"n", r.n}, {"value", r.value}, {"se", r.se}, {"gap", r.gap}});
        lc.row(r.n, r.value, r.se, r.gap);
      }
      j["local_clt"] = {{"status", "ok"}, {"h", rep.h}, {"width", rep.width}, {"integral", rep.integral},
                        {"rows", rows}, {"allowance", rep.allowance}, {"consistent", rep.consistent}};
      cx.write("local_clt.csv", lc.str());
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kHypothesis && e.kind() != ErrorKind::kDegenerate) throw;
      j["local_clt"] = {{"status", "refused"}, {"reason", e.what()}};
    }
  }
  j["status"] = "ok";
  cx.write_json("clt", j);
  return true;
}

}  // namespace

RunResult run_experiment(const Config& config, const std::set<Stage>& stages,
                         const std::filesystem::path& out_dir) {
  Context cx{config, out_dir, config_hash(config), {}, {}, {}, {}, {}, {}, {}, {}, 0.0, {}, {}};
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    cx.result.exit_code = kExitConfig;
    cx.result.messages.push_back("cannot create output directory " + out_dir.string());
    return cx.result;
  }
  auto needs = [&](Stage s) { return stages.count(s) > 0; };
  Stage current = Stage::kDiagnose;
  try {
    cx.model = build_model(config);
    const json& init = config.doc["simulation"]["initial"];
    cx.initial = init.is_null() ? cx.model->x0() : point_from(init, cx.model->dim(), "simulation.initial");
    cx.model->check_point(cx.initial);
    bool ok = true;
    if (ok && needs(Stage::kDiagnose)) ok = stage_diagnose(cx);
    current = Stage::kSimulate;
    if (ok && (needs(Stage::kSimulate) || needs(Stage::kVariance) || needs(Stage::kSpectral) || needs(Stage::kClt)))
      ok = stage_simulate(cx);
    current = Stage::kVariance;
    if (ok && (needs(Stage::kVariance) || needs(Stage::kClt))) ok = stage_variance(cx);
    current = Stage::kSpectral;
    if (ok && needs(Stage::kSpectral)) ok = stage_spectral(cx);
    current = Stage::kClt;
    if (ok && needs(Stage::kClt)) {
      if (!cx.batch) throw Error(ErrorKind::kDependency, "harness.clt: needs the variance stage");
      stage_clt(cx);
    }
  } catch (const Error& e) {
    cx.hard_fail(exit_code_for(e.kind()), std::string(to_string(current)) + ": " + e.what());
    json j = cx.header(to_string(current));
    j["status"] = "error";
    j["error"] = {{"kind", irlm::to_string(e.kind())}, {"message", e.what()}};
    try {
      cx.write_json(std::string(to_string(current)) + "_error", j);
    } catch (const Error&) {
    }
  }
  return cx.result;
}

}  // namespace irlm::pipeline
