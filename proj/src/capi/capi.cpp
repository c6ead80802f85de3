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

#include "gnndcm/gnndcm.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "app/app.hpp"
#include "common/error.hpp"
#include "dataset/dataset.hpp"
#include "models/model.hpp"
#include "train/train.hpp"

struct gnndcm_graph {
  gnndcm::AlternativeGraph graph;
};
struct gnndcm_dataset {
  gnndcm::ChoiceDataset data;
};
struct gnndcm_model {
  gnndcm::ChoiceModel model;
};

namespace {

thread_local std::string last_error;

template <class F>
gnndcm_status guarded(F&& f) {
  try {
    last_error.clear();
    return f();
  } catch (const gnndcm::UsageError& e) {
    last_error = e.what();
    return GNNDCM_ERR_USAGE;
  } catch (const gnndcm::DataError& e) {
    last_error = e.what();
    return GNNDCM_ERR_DATA;
  } catch (const gnndcm::NumericalError& e) {
    last_error = e.what();
    return GNNDCM_ERR_NUMERICAL;
  } catch (const nlohmann::json::exception& e) {
    last_error = std::string("invalid JSON: ") + e.what();
    return GNNDCM_ERR_USAGE;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return GNNDCM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return GNNDCM_ERR_INTERNAL;
  }
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

nlohmann::json parse_or_empty(const char* text) {
  if (text == nullptr || *text == '\0') return nlohmann::json::object();
  return nlohmann::json::parse(text);
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw gnndcm::UsageError(std::string(what) + " must not be null");
}

} // namespace

extern "C" {

const char* gnndcm_last_error(void) { return last_error.c_str(); }

const char* gnndcm_version(void) { return "0.1.0"; }

void gnndcm_string_free(char* s) { delete[] s; }

gnndcm_status gnndcm_run(const char* command, const char* config_json, char** summary_json) {
  return guarded([&] {
    require(command, "command");
    const auto summary = gnndcm::run_command(command, parse_or_empty(config_json));
    if (summary_json) *summary_json = copy_string(summary.dump(2));
    if (summary.contains("passed") && !summary["passed"].get<bool>()) {
      last_error = "verification failed";
      return GNNDCM_ERR_NUMERICAL;
    }
    return GNNDCM_OK;
  });
}

gnndcm_status gnndcm_dataset_load(const char* dir, const char* spec_path, gnndcm_dataset** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    *out = new gnndcm_dataset{gnndcm::load_dataset_dir(dir, spec_path ? spec_path : "")};
    return GNNDCM_OK;
  });
}

int gnndcm_dataset_num_households(const gnndcm_dataset* ds) { return ds ? ds->data.num_households : 0; }
int gnndcm_dataset_num_alternatives(const gnndcm_dataset* ds) { return ds ? ds->data.num_alternatives : 0; }
int gnndcm_dataset_num_features(const gnndcm_dataset* ds) { return ds ? ds->data.num_features : 0; }
void gnndcm_dataset_free(gnndcm_dataset* ds) { delete ds; }

gnndcm_status gnndcm_graph_load(const char* path, const gnndcm_dataset* ds, gnndcm_graph** out) {
  return guarded([&] {
    require(path, "path");
    require(ds, "dataset");
    require(out, "out");
    *out = new gnndcm_graph{gnndcm::AlternativeGraph::read_csv(path, ds->data.num_alternatives)};
    return GNNDCM_OK;
  });
}

int gnndcm_graph_num_nodes(const gnndcm_graph* g) { return g ? g->graph.num_nodes() : 0; }
size_t gnndcm_graph_num_edges(const gnndcm_graph* g) { return g ? g->graph.num_edges() : 0; }
void gnndcm_graph_free(gnndcm_graph* g) { delete g; }

gnndcm_status gnndcm_model_create(const char* spec_json, const gnndcm_graph* g, int num_features,
                                  unsigned long long seed, gnndcm_model** out) {
  return guarded([&] {
    require(g, "graph");
    require(out, "out");
    if (num_features < 1) throw gnndcm::UsageError("num_features must be positive");
    gnndcm::ChoiceModel m(gnndcm::spec_from_json(parse_or_empty(spec_json)), g->graph, num_features);
    m.init_params(seed);
    *out = new gnndcm_model{std::move(m)};
    return GNNDCM_OK;
  });
}

gnndcm_status gnndcm_model_load(const char* path, gnndcm_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new gnndcm_model{gnndcm::ChoiceModel::load(path)};
    return GNNDCM_OK;
  });
}

gnndcm_status gnndcm_model_save(const gnndcm_model* m, const gnndcm_dataset* ds, const char* path) {
  return guarded([&] {
    require(m, "model");
    require(ds, "dataset");
    require(path, "path");
    m->model.save(path, gnndcm::FeatureScaling::of(ds->data));
    return GNNDCM_OK;
  });
}

namespace {
void check_compatible(const gnndcm::ChoiceModel& m, const gnndcm::ChoiceDataset& ds) {
  if (m.num_alternatives() != ds.num_alternatives || m.num_features() != ds.num_features)
    throw gnndcm::DataError("dataset shape does not match the model");
}
} // namespace

gnndcm_status gnndcm_model_fit(gnndcm_model* m, const gnndcm_dataset* ds, const char* train_json, char** result_json) {
  return guarded([&] {
    require(m, "model");
    require(ds, "dataset");
    check_compatible(m->model, ds->data);
    gnndcm::TrainConfig t;
    t.merge_json(parse_or_empty(train_json));
    t.validate();
    const auto r = gnndcm::fit(m->model, ds->data, t);
    if (result_json) {
      nlohmann::json j{{"optimizer", r.optimizer},
                       {"train_nll", r.train_nll},
                       {"iterations", r.iterations},
                       {"converged", r.converged},
                       {"gradient_max_norm", r.gradient_max_norm},
                       {"notes", r.notes}};
      if (r.stats) {
        j["coefficients"] = r.stats->coefficients;
        j["standard_errors"] = r.stats->standard_errors;
        j["t_stats"] = r.stats->t_stats;
      }
      *result_json = copy_string(j.dump());
    }
    return GNNDCM_OK;
  });
}

gnndcm_status gnndcm_model_predict(const gnndcm_model* m, const gnndcm_dataset* ds, double* out, size_t capacity) {
  return guarded([&] {
    require(m, "model");
    require(ds, "dataset");
    require(out, "out");
    check_compatible(m->model, ds->data);
    const size_t need = static_cast<size_t>(ds->data.num_households) * ds->data.num_alternatives;
    if (capacity < need) throw gnndcm::UsageError("output buffer holds fewer than households x alternatives values");
    const auto p = m->model.predict(ds->data);
    for (int n = 0; n < ds->data.num_households; ++n)
      for (int i = 0; i < ds->data.num_alternatives; ++i)
        out[static_cast<size_t>(n) * ds->data.num_alternatives + i] = p(n, i);
    return GNNDCM_OK;
  });
}

gnndcm_status gnndcm_model_nll(const gnndcm_model* m, const gnndcm_dataset* ds, double* out) {
  return guarded([&] {
    require(m, "model");
    require(ds, "dataset");
    require(out, "out");
    check_compatible(m->model, ds->data);
    *out = gnndcm::nll(m->model, ds->data);
    return GNNDCM_OK;
  });
}

int gnndcm_model_num_parameters(const gnndcm_model* m) {
  return m ? static_cast<int>(m->model.params().flat_values().size()) : 0;
}

void gnndcm_model_free(gnndcm_model* m) { delete m; }

} // extern "C"
