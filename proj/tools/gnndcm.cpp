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

// Command-line front end. Builds a flat JSON configuration from --config and
// flags (flags win) and hands it to the library through the C API.

#include <cstdio>
#include <deque>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "CLI11.hpp"
#include "gnndcm/gnndcm.h"
#include "json.hpp"

using nlohmann::json;

namespace {

enum class Kind { string, integer, real, boolean };

struct Flag {
  std::string key;
  Kind kind;
  std::string value;
  CLI::Option* option = nullptr;
  bool bool_value = true; // for switch-style flags
};

struct Command {
  CLI::App* app = nullptr;
  std::deque<Flag> flags;
  std::string config_path;

  CLI::Option* opt(const std::string& names, const std::string& key, Kind kind, const std::string& help) {
    flags.push_back({key, kind, "", nullptr, true});
    flags.back().option = app->add_option(names, flags.back().value, help);
    return flags.back().option;
  }
  void toggle(const std::string& names, const std::string& key, bool value, const std::string& help) {
    flags.push_back({key, Kind::boolean, "", nullptr, value});
    flags.back().option = app->add_flag(names, help);
  }

  json build() const {
    json config = json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw CLI::ValidationError("--config", "file not found: " + config_path);
      try {
        config = json::parse(in);
      } catch (const json::exception& e) {
        throw CLI::ValidationError("--config", e.what());
      }
      if (!config.is_object()) throw CLI::ValidationError("--config", "must hold a JSON object");
    }
    for (const auto& f : flags) {
      if (f.option->count() == 0) continue;
      if (f.option->get_expected_min() == 0) {
        config[f.key] = f.bool_value;
        continue;
      }
      try {
        switch (f.kind) {
        case Kind::string: config[f.key] = f.value; break;
        case Kind::integer: config[f.key] = std::stoll(f.value); break;
        case Kind::real: config[f.key] = std::stod(f.value); break;
        case Kind::boolean: config[f.key] = (f.value == "true" || f.value == "1"); break;
        }
      } catch (const std::exception&) {
        throw CLI::ValidationError(f.option->get_name(), "not a number: " + f.value);
      }
    }
    return config;
  }
};

void data_flags(Command& c) {
  c.opt("--data,-d", "data", Kind::string, "Dataset directory");
  c.opt("--feature-spec", "feature_spec", Kind::string, "Feature spec JSON for raw-table datasets");
  c.opt("--out,-o", "out", Kind::string, "Output directory (default .)");
  c.opt("--seed", "seed", Kind::integer, "Random seed (default 1)");
}

void model_flags(Command& c) {
  c.opt("--graph,-g", "graph", Kind::string, "Edge list CSV (default <data>/edges.csv)");
  c.opt("--model", "model", Kind::string, "mnl, nl, scl, asu-dnn or gnn");
  c.opt("--layers", "layers", Kind::integer, "Message-passing layers");
  c.opt("--update", "update", Kind::string, "mpnn, gcn or gat");
  c.opt("--aggregation", "aggregation", Kind::string, "sum, mean, max or lse");
  c.opt("--hidden", "hidden", Kind::integer, "Hidden width");
  c.opt("--embed-layers", "embed_layers", Kind::integer, "Embedding MLP depth");
  c.toggle("--skip", "skip", true, "Gated skip connections (default)");
  c.toggle("--no-skip", "skip", false, "Plain ReLU updates");
  c.opt("--dropout", "dropout", Kind::real, "Dropout rate");
  c.opt("--initial-mu", "initial_mu", Kind::real, "Starting SCL mu");
  c.opt("--nests", "nests", Kind::string, "Nest file for nl");
  c.opt("--epochs", "epochs", Kind::integer, "Maximum epochs");
  c.opt("--batch-size", "batch_size", Kind::integer, "Mini-batch size");
  c.opt("--learning-rate", "learning_rate", Kind::real, "Adam learning rate");
  c.opt("--patience", "patience", Kind::integer, "Early-stopping patience in epochs");
  c.opt("--optimizer", "optimizer", Kind::string, "auto, adam or lbfgs");
  c.opt("--max-iterations", "max_iterations", Kind::integer, "Quasi-newton iteration cap");
  c.opt("--gradient-tolerance", "gradient_tolerance", Kind::real, "Quasi-newton gradient max-norm");
}

void interpret_flags(Command& c, bool household) {
  c.opt("--model-file,-m", "model_file", Kind::string, "Fitted model file")->required();
  if (household) c.opt("--household", "household", Kind::integer, "Household id (default first)");
  c.opt("--alt", "alt", Kind::integer, "Alternative id");
  c.opt("--attr", "attr", Kind::string, "Feature name");
}

int fail(gnndcm_status s) {
  std::cerr << "error: " << gnndcm_last_error() << '\n';
  return static_cast<int>(s);
}

} // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Training allocates many short-lived tensors above glibc's default mmap
  // threshold; keeping them on the heap avoids a page-fault storm.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
  CLI::App app{"Graph neural network discrete choice models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", gnndcm_version());
  std::map<std::string, Command> commands;
  auto add = [&](const std::string& name, const std::string& help) -> Command& {
    auto& c = commands[name];
    c.app = app.add_subcommand(name, help);
    c.app->add_option("--config,-c", c.config_path, "JSON configuration; flags take precedence");
    return c;
  };

  auto& fit = add("fit", "Fit one model; writes model.bin and fit.json");
  data_flags(fit);
  model_flags(fit);

  auto& cv = add("cv", "Cross-validate a model grid; writes metrics.csv and friends");
  data_flags(cv);
  model_flags(cv);
  cv.opt("--folds", "folds", Kind::integer, "Number of folds (default 10)");
  cv.opt("--preset", "preset", Kind::string, "table4 or table5");
  cv.opt("--grid", "grid", Kind::string, "Grid JSON file");
  cv.opt("--jobs,-j", "jobs", Kind::integer, "Parallel fold/grid cells (default: all cores)");
  cv.toggle("--save-models", "save_models", true, "Keep each fold's model");
  cv.opt("--inject-fold-failure", "inject_fold_failure", Kind::string, "Testing hook: ROW:FOLD throws");

  auto& predict = add("predict", "Choice probabilities; writes predictions.csv and metrics.json");
  data_flags(predict);
  predict.opt("--model-file,-m", "model_file", Kind::string, "Fitted model file")->required();

  auto& el = add("elasticity", "Elasticities of all alternatives to one attribute; writes elasticity.csv");
  data_flags(el);
  interpret_flags(el, true);
  el.opt("--mode", "mode", Kind::string, "relative or semi");

  auto& ice = add("ice", "Individual conditional expectation curves; writes ice.csv");
  data_flags(ice);
  interpret_flags(ice, false);
  ice.opt("--points", "points", Kind::integer, "Grid points (default 50)");
  ice.opt("--lo", "lo", Kind::real, "Grid start in original units");
  ice.opt("--hi", "hi", Kind::real, "Grid end in original units");
  ice.opt("--color-key", "color_key", Kind::string, "Feature reported per curve");
  ice.opt("--max-households", "max_households", Kind::integer, "Use only the first households");

  auto& sub = add("submap", "Probability changes after a percentage shock; writes submap.csv");
  data_flags(sub);
  interpret_flags(sub, true);
  sub.opt("--pct", "pct", Kind::real, "Percentage change (default 10)");

  auto& ver = add("verify", "Run the theory and gradient suites");
  ver.opt("--trials", "trials", Kind::integer, "Randomized instances (default 1000)");
  ver.opt("--seed", "seed", Kind::integer, "Random seed (default 7)");
  ver.toggle("--inject-fault", "inject_fault", true, "Testing hook: perturb SCL allocation weights");

  auto& syn = add("synth", "Generate a synthetic dataset with known truth");
  syn.opt("--out,-o", "out", Kind::string, "Output directory (default .)");
  syn.opt("--seed", "seed", Kind::integer, "Random seed (default 1)");
  syn.opt("--layout", "layout", Kind::string, "long or residential");
  syn.opt("--model", "model", Kind::string, "Generator: mnl, nl or scl");
  syn.opt("--mu", "mu", Kind::real, "Generator mu (nl, scl)");
  syn.opt("--n", "n", Kind::integer, "Households");
  syn.opt("--alternatives", "alternatives", Kind::integer, "Alternatives");
  syn.opt("--features", "features", Kind::integer, "Features (long layout)");
  syn.opt("--num-nests", "num_nests", Kind::integer, "Nests (nl)");
  syn.opt("--region-km", "region_km", Kind::real, "Side of the square region");

  json config;
  std::string name;
  try {
    app.parse(argc, argv);
    for (auto& [n, c] : commands)
      if (c.app->parsed()) {
        name = n;
        config = c.build();
      }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  char* summary = nullptr;
  const auto status = gnndcm_run(name.c_str(), config.dump().c_str(), &summary);
  if (summary != nullptr) {
    const auto j = json::parse(summary);
    gnndcm_string_free(summary);
    if (name == "verify") {
      for (const auto& line : j["lines"]) std::cout << line.get<std::string>() << '\n';
      std::cout << (j["passed"].get<bool>() ? "verify: all suites passed" : "verify: FAILED") << '\n';
    } else {
      auto brief = j;
      brief.erase("loss_trace");
      std::cout << brief.dump(2) << '\n';
    }
  }
  if (status != GNNDCM_OK) return fail(status);
  return 0;
}
