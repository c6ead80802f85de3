/*
 * Copyright 2026 The gnndcm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "app/app.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <thread>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "dataset/dataset.hpp"
#include "interpret/interpret.hpp"
#include "models/model.hpp"
#include "train/cv.hpp"
#include "train/metrics.hpp"
#include "train/train.hpp"
#include "verify/verify.hpp"

namespace gnndcm {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Config access

template <class T>
T get_or(const json& c, const char* key, T fallback) {
  if (!c.contains(key) || c[key].is_null()) return fallback;
  try {
    return c[key].get<T>();
  } catch (const json::exception&) {
    throw UsageError(std::string("config key '") + key + "' has the wrong type");
  }
}

std::string require_string(const json& c, const char* key) {
  if (!c.contains(key) || c[key].is_null()) throw UsageError(std::string("missing required option '") + key + "'");
  return get_or<std::string>(c, key, "");
}

unsigned long long seed_of(const json& c) { return get_or<unsigned long long>(c, "seed", 1); }

std::string out_dir(const json& c) {
  const auto dir = get_or<std::string>(c, "out", ".");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create output directory " + dir + ": " + ec.message());
  return dir;
}

std::string banner(const std::string& hash, unsigned long long seed) {
  return "config_hash=" + hash + " seed=" + std::to_string(seed);
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << '\n';
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("file not found: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Data, graph and model resolution

ChoiceDataset load_data(const json& c) {
  const auto dir = require_string(c, "data");
  if (!fs::is_directory(dir)) throw DataError("data directory not found: " + dir);
  return load_dataset_dir(dir, get_or<std::string>(c, "feature_spec", ""));
}

std::string graph_path(const json& c) {
  if (c.contains("graph") && !c["graph"].is_null()) return c["graph"].get<std::string>();
  return (fs::path(require_string(c, "data")) / "edges.csv").string();
}

// Nest file: {"nests": [[alternative ids]], "mu": [...]}; mu optional.
NestStructure read_nests(const std::string& path, const ChoiceDataset& ds) {
  const auto j = read_json_file(path);
  if (!j.contains("nests")) throw DataError(path + ": missing 'nests'");
  NestStructure n;
  for (const auto& nest : j["nests"]) {
    std::vector<NodeIndex> members;
    for (const auto& id : nest) members.push_back(ds.alternative_index(id.get<long long>()));
    std::sort(members.begin(), members.end());
    n.nests.push_back(std::move(members));
  }
  if (j.contains("mu")) n.mu = j["mu"].get<std::vector<double>>();
  return n;
}

json model_json(const json& c, const ChoiceDataset& ds) {
  json m = json::object();
  if (c.contains("model") && c["model"].is_object()) m = c["model"];
  else m["family"] = get_or<std::string>(c, "model", "mnl");
  for (const char* key : {"layers", "update", "aggregation", "hidden", "embed_layers", "skip", "dropout", "initial_mu"})
    if (c.contains(key) && !c[key].is_null()) m[key] = c[key];
  const auto family = m.value("family", std::string("mnl"));
  if (family == "nl" && !m.contains("nests")) {
    if (!c.contains("nests")) throw UsageError("the nl model needs --nests");
    const auto n = read_nests(c["nests"].get<std::string>(), ds);
    m["nests"] = n.nests;
    if (!n.mu.empty()) m["mu"] = n.mu;
  }
  return m;
}

TrainConfig train_config(const json& c) {
  TrainConfig t;
  if (c.contains("train") && c["train"].is_object()) t.merge_json(c["train"]);
  json flat = json::object();
  for (const char* key : {"batch_size", "learning_rate", "dropout", "max_epochs", "patience", "optimizer",
                          "max_iterations", "gradient_tolerance", "lbfgs_memory"})
    if (c.contains(key) && !c[key].is_null()) flat[key] = c[key];
  if (c.contains("epochs") && !c["epochs"].is_null()) flat["max_epochs"] = c["epochs"];
  t.merge_json(flat);
  t.seed = seed_of(c);
  t.validate();
  return t;
}

struct LoadedModel {
  ChoiceModel model;
  ChoiceDataset data; // standardized with the model's own statistics
  std::string hash;
  unsigned long long seed;
};

LoadedModel load_model_and_data(const json& c, const std::string& command) {
  const auto path = require_string(c, "model_file");
  if (!fs::exists(path)) throw DataError("model file not found: " + path);
  FeatureScaling scaling;
  auto model = ChoiceModel::load(path, &scaling);
  auto ds = scaling.apply(load_data(c));
  if (ds.num_alternatives != model.num_alternatives())
    throw DataError("dataset has " + std::to_string(ds.num_alternatives) + " alternatives but the model expects " +
                    std::to_string(model.num_alternatives()));
  json resolved = c;
  resolved["command"] = command;
  return {std::move(model), std::move(ds), config_hash_of(resolved), seed_of(c)};
}

int household_index(const json& c, const ChoiceDataset& ds) {
  if (!c.contains("household") || c["household"].is_null()) return 0;
  const auto id = c["household"].get<long long>();
  for (int n = 0; n < ds.num_households; ++n)
    if (ds.household_ids[n] == id) return n;
  throw UsageError("unknown household id " + std::to_string(id));
}

int alternative_of(const json& c, const ChoiceDataset& ds) {
  if (!c.contains("alt") || c["alt"].is_null()) throw UsageError("missing required option 'alt'");
  return ds.alternative_index(c["alt"].get<long long>());
}

// ---------------------------------------------------------------------------
// Commands

json cmd_fit(const json& c) {
  auto ds = load_data(c);
  auto graph = AlternativeGraph::read_csv(graph_path(c), ds.num_alternatives);
  const auto mj = model_json(c, ds);
  const auto spec = spec_from_json(mj);
  const auto train = train_config(c);

  json resolved{{"command", "fit"},
                {"data", require_string(c, "data")},
                {"graph", graph_path(c)},
                {"feature_spec", get_or<std::string>(c, "feature_spec", "")},
                {"model", spec_to_json(spec)},
                {"train", train.to_json()},
                {"seed", train.seed}};
  const auto hash = config_hash_of(resolved);

  ChoiceModel model(spec, graph, ds.num_features);
  model.init_params(train.seed);
  const auto result = fit(model, ds, train);
  const auto dir = out_dir(c);
  model.save((fs::path(dir) / "model.bin").string(), FeatureScaling::of(ds));

  json summary{{"config_hash", hash},
               {"seed", train.seed},
               {"model", spec_to_json(spec)},
               {"label", model_label(spec)},
               {"train", train.to_json()},
               {"households", ds.num_households},
               {"alternatives", ds.num_alternatives},
               {"features", ds.feature_names},
               {"num_parameters", model.params().flat_values().size()},
               {"optimizer", result.optimizer},
               {"iterations", result.iterations},
               {"converged", result.converged},
               {"gradient_max_norm", result.gradient_max_norm},
               {"train_log_likelihood", -result.train_nll},
               {"loss_trace", result.loss_trace},
               {"notes", result.notes}};
  const auto mu = model.mu();
  if (!mu.empty()) summary["mu"] = mu;
  if (result.stats) {
    json coefs = json::array();
    for (int d = 0; d < ds.num_features; ++d)
      coefs.push_back({{"name", ds.feature_names[d]},
                       {"estimate", result.stats->coefficients[d]},
                       {"std_error", result.stats->standard_errors[d]},
                       {"t_stat", result.stats->t_stats[d]}});
    summary["coefficients"] = coefs;
  }
  auto train_metrics = evaluate(model, ds, false).to_json();
  train_metrics.erase("test_log_likelihood");
  summary["train_metrics"] = train_metrics;
  write_json(summary, (fs::path(dir) / "fit.json").string());
  return summary;
}

std::optional<std::pair<int, int>> parse_injection(const json& c) {
  if (!c.contains("inject_fold_failure") || c["inject_fold_failure"].is_null()) return std::nullopt;
  const auto& v = c["inject_fold_failure"];
  if (v.is_array() && v.size() == 2) return std::make_pair(v[0].get<int>(), v[1].get<int>());
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    const auto colon = s.find(':');
    try {
      if (colon != std::string::npos) return std::make_pair(std::stoi(s.substr(0, colon)), std::stoi(s.substr(colon + 1)));
    } catch (const std::exception&) {
    }
  }
  throw UsageError("inject_fold_failure must be ROW:FOLD");
}

json cmd_cv(const json& c) {
  auto ds = load_data(c);
  auto graph = AlternativeGraph::read_csv(graph_path(c), ds.num_alternatives);
  CvConfig cv;
  cv.train = train_config(c);
  cv.folds = get_or<int>(c, "folds", 10);
  cv.jobs = get_or<int>(c, "jobs", static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
  cv.save_models = get_or<bool>(c, "save_models", false);
  cv.inject_fold_failure = parse_injection(c);
  if (c.contains("grid") && !c["grid"].is_null()) {
    const auto g = c["grid"].is_string() ? read_json_file(c["grid"].get<std::string>()) : c["grid"];
    cv.grid = grid_from_json(g.is_object() && g.contains("grid") ? g["grid"] : g);
  } else if (c.contains("preset") && !c["preset"].is_null()) {
    cv.preset = c["preset"].get<std::string>();
    cv.grid = preset_grid(cv.preset, cv.train);
  } else {
    cv.grid = {GridEntry{model_label(spec_from_json(model_json(c, ds))), spec_from_json(model_json(c, ds)), "", ""}};
  }
  const auto dir = out_dir(c);
  const auto model_dir = cv.save_models ? (fs::path(dir) / "models").string() : std::string();
  const auto report = cross_validate(ds, graph, cv, model_dir);
  write_cv_outputs(report, cv, dir);
  json rows = json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"label", r.entry.label}, {"folds_ok", r.folds_ok}, {"failed", r.failed()}, {"mean", r.mean.to_json()}});
  return {{"config_hash", hex64(report.config_hash)}, {"seed", report.seed}, {"rows", rows}};
}

json cmd_predict(const json& c) {
  auto lm = load_model_and_data(c, "predict");
  const auto probs = lm.model.predict(lm.data);
  const auto dir = out_dir(c);
  {
    std::ofstream out(fs::path(dir) / "predictions.csv", std::ios::binary);
    if (!out) throw DataError("cannot write predictions.csv");
    out << "# " << banner(lm.hash, lm.seed) << '\n' << "household_id,alternative_id,probability\n";
    char buf[32];
    for (int n = 0; n < lm.data.num_households; ++n)
      for (int i = 0; i < lm.data.num_alternatives; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", probs(n, i));
        out << lm.data.household_ids[n] << ',' << lm.data.alternative_ids[i] << ',' << buf << '\n';
      }
  }
  auto metrics = evaluate_probabilities(probs, lm.data.chosen, lm.data.centroids).to_json();
  metrics["log_likelihood"] = metrics["test_log_likelihood"];
  metrics.erase("test_log_likelihood");
  metrics.erase("train_log_likelihood");
  json summary{{"config_hash", lm.hash}, {"seed", lm.seed}, {"label", model_label(lm.model.spec())},
               {"metrics", metrics}};
  write_json(summary, (fs::path(dir) / "metrics.json").string());
  return summary;
}

json cmd_elasticity(const json& c) {
  auto lm = load_model_and_data(c, "elasticity");
  const auto mode_name = get_or<std::string>(c, "mode", "relative");
  if (mode_name != "relative" && mode_name != "semi") throw UsageError("mode must be relative or semi");
  const auto mode = mode_name == "semi" ? ElasticityMode::semi : ElasticityMode::relative;
  const int n = household_index(c, lm.data);
  const int j = alternative_of(c, lm.data);
  const auto r = elasticity(lm.model, lm.data, n, j, require_string(c, "attr"), mode);
  const auto path = (fs::path(out_dir(c)) / "elasticity.csv").string();
  write_elasticity_csv(r, lm.data, path, {banner(lm.hash, lm.seed)});
  const auto check = khop_constancy_check(r, 1e-8);
  return {{"config_hash", lm.hash},         {"seed", lm.seed},
          {"output", path},                 {"hops", r.hops},
          {"direct", r.values[j]},          {"outside_spread", check.outside_spread},
          {"outside_count", check.outside_count}};
}

json cmd_ice(const json& c) {
  auto lm = load_model_and_data(c, "ice");
  const int i = alternative_of(c, lm.data);
  int count = lm.data.num_households;
  if (c.contains("max_households") && !c["max_households"].is_null())
    count = std::min(count, std::max(1, c["max_households"].get<int>()));
  std::vector<int> households(count);
  std::iota(households.begin(), households.end(), 0);
  const auto curves = ice_curve(lm.model, lm.data, households, i, require_string(c, "attr"), get_or<int>(c, "points", 50),
                                get_or<double>(c, "lo", 0.0), get_or<double>(c, "hi", 0.0),
                                get_or<std::string>(c, "color_key", "income_interact"));
  const auto path = (fs::path(out_dir(c)) / "ice.csv").string();
  write_ice_csv(curves, path, {banner(lm.hash, lm.seed)});
  return {{"config_hash", lm.hash}, {"seed", lm.seed}, {"output", path}, {"households", count},
          {"points", curves.grid.size()}, {"color_key", curves.color_key_name}, {"extrapolated", curves.extrapolated}};
}

json cmd_submap(const json& c) {
  auto lm = load_model_and_data(c, "submap");
  const int n = household_index(c, lm.data);
  const int j = alternative_of(c, lm.data);
  const auto m = substitution_map(lm.model, lm.data, n, j, require_string(c, "attr"), get_or<double>(c, "pct", 10.0));
  const auto path = (fs::path(out_dir(c)) / "submap.csv").string();
  write_submap_csv(m, lm.data, path, {banner(lm.hash, lm.seed)});
  return {{"config_hash", lm.hash}, {"seed", lm.seed}, {"output", path}};
}

json cmd_verify(const json& c) {
  VerifyOptions o;
  o.trials = get_or<int>(c, "trials", 1000);
  o.seed = seed_of(c);
  if (!c.contains("seed")) o.seed = 7;
  o.inject_scl_alpha_fault = get_or<bool>(c, "inject_fault", false);
  const auto results = run_verify(o);
  json lines = json::array();
  bool ok = true;
  for (const auto& r : results) {
    lines.push_back(r.line());
    ok = ok && r.passed;
  }
  return {{"passed", ok}, {"lines", lines}, {"seed", o.seed}, {"trials", o.trials}};
}

GeneratorModel parse_generator(const std::string& s) {
  if (s == "mnl") return GeneratorModel::mnl;
  if (s == "nl") return GeneratorModel::nl;
  if (s == "scl") return GeneratorModel::scl;
  throw UsageError("synth model must be mnl, nl or scl");
}

json cmd_synth(const json& c) {
  const auto dir = out_dir(c);
  const auto layout = get_or<std::string>(c, "layout", "long");
  const auto seed = seed_of(c);
  if (layout == "residential") {
    json resolved{{"command", "synth"}, {"layout", layout}, {"n", get_or<int>(c, "n", 1000)},
                  {"alternatives", get_or<int>(c, "alternatives", 77)}, {"seed", seed}};
    const auto hash = config_hash_of(resolved);
    synthesize_residential(dir, resolved["n"].get<int>(), resolved["alternatives"].get<int>(), seed,
                           {{"config_hash", hash}, {"seed", seed}});
    return {{"config_hash", hash}, {"seed", seed}, {"layout", layout}, {"out", dir}};
  }
  if (layout != "long") throw UsageError("layout must be long or residential");
  SynthConfig s;
  s.generator = parse_generator(get_or<std::string>(c, "model", "mnl"));
  s.num_households = get_or<int>(c, "n", 1000);
  s.num_alternatives = get_or<int>(c, "alternatives", 20);
  s.num_features = get_or<int>(c, "features", 5);
  s.mu = get_or<double>(c, "mu", s.generator == GeneratorModel::mnl ? 1.0 : 0.5);
  s.num_nests = get_or<int>(c, "num_nests", 3);
  s.region_km = get_or<double>(c, "region_km", 0.0);
  if (c.contains("coefficients")) s.true_coefficients = c["coefficients"].get<std::vector<double>>();
  s.seed = seed;
  json resolved = s.to_json();
  resolved["command"] = "synth";
  resolved["layout"] = layout;
  const auto hash = config_hash_of(resolved);
  const auto r = synthesize(s);
  const json prov{{"config_hash", hash}, {"seed", seed}};
  write_dataset(r.dataset, dir, prov);
  write_graph_csv(r.graph, (fs::path(dir) / "edges.csv").string(), banner(hash, seed));
  auto truth = r.truth.to_json();
  truth["config_hash"] = hash;
  truth["feature_names"] = r.dataset.feature_names;
  if (r.truth.nests) {
    json nests = json::array();
    for (const auto& nest : r.truth.nests->nests) {
      json ids = json::array();
      for (auto i : nest) ids.push_back(r.dataset.alternative_ids[i]);
      nests.push_back(ids);
    }
    write_json({{"config_hash", hash}, {"seed", seed}, {"nests", nests}, {"mu", r.truth.nests->mu}},
               (fs::path(dir) / "nests.json").string());
  }
  write_json(truth, (fs::path(dir) / "truth.json").string());
  return {{"config_hash", hash}, {"seed", seed}, {"layout", layout}, {"out", dir},
          {"households", s.num_households}, {"alternatives", s.num_alternatives}};
}

} // namespace

std::string config_hash_of(const json& resolved) {
  json j = resolved;
  if (j.is_object())
    for (const char* key : {"out", "jobs"}) j.erase(key);
  return hex64(fnv1a64(j.dump()));
}

json run_command(const std::string& command, const json& config) {
  if (!config.is_object()) throw UsageError("configuration must be a JSON object");
  if (command == "fit") return cmd_fit(config);
  if (command == "cv") return cmd_cv(config);
  if (command == "predict") return cmd_predict(config);
  if (command == "elasticity") return cmd_elasticity(config);
  if (command == "ice") return cmd_ice(config);
  if (command == "submap") return cmd_submap(config);
  if (command == "verify") return cmd_verify(config);
  if (command == "synth") return cmd_synth(config);
  throw UsageError("unknown command '" + command + "'");
}

} // namespace gnndcm
