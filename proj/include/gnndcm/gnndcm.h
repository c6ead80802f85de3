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

#ifndef GNNDCM_GNNDCM_H
#define GNNDCM_GNNDCM_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define GNNDCM_API __declspec(dllexport)
#else
#define GNNDCM_API __attribute__((visibility("default")))
#endif

/* Status codes double as CLI exit codes. */
typedef enum gnndcm_status {
  GNNDCM_OK = 0,
  GNNDCM_ERR_USAGE = 1,     /* bad arguments or configuration */
  GNNDCM_ERR_DATA = 2,      /* missing, malformed or inconsistent input */
  GNNDCM_ERR_NUMERICAL = 3, /* overflow, divergence, singular system */
  GNNDCM_ERR_INTERNAL = 4   /* unexpected failure */
} gnndcm_status;

typedef struct gnndcm_graph gnndcm_graph;
typedef struct gnndcm_dataset gnndcm_dataset;
typedef struct gnndcm_model gnndcm_model;

/* Message for the last failing call on this thread; "" after success. */
GNNDCM_API const char* gnndcm_last_error(void);
GNNDCM_API const char* gnndcm_version(void);
/* Releases strings returned through char** out-parameters. */
GNNDCM_API void gnndcm_string_free(char* s);

/* Runs a subcommand (fit, cv, predict, elasticity, ice, submap, verify,
 * synth) from a flat JSON configuration and returns a JSON summary. verify
 * returns GNNDCM_ERR_NUMERICAL when any suite fails, with the summary still
 * set. */
GNNDCM_API gnndcm_status gnndcm_run(const char* command, const char* config_json, char** summary_json);

/* Datasets: a directory in the long or raw-table layout. spec_path may be
 * NULL. */
GNNDCM_API gnndcm_status gnndcm_dataset_load(const char* dir, const char* spec_path, gnndcm_dataset** out);
GNNDCM_API int gnndcm_dataset_num_households(const gnndcm_dataset* ds);
GNNDCM_API int gnndcm_dataset_num_alternatives(const gnndcm_dataset* ds);
GNNDCM_API int gnndcm_dataset_num_features(const gnndcm_dataset* ds);
GNNDCM_API void gnndcm_dataset_free(gnndcm_dataset* ds);

/* Graphs: edge list with 0-based src,dst positions in the dataset's
 * alternative order (ascending id). */
GNNDCM_API gnndcm_status gnndcm_graph_load(const char* path, const gnndcm_dataset* ds, gnndcm_graph** out);
GNNDCM_API int gnndcm_graph_num_nodes(const gnndcm_graph* g);
GNNDCM_API size_t gnndcm_graph_num_edges(const gnndcm_graph* g);
GNNDCM_API void gnndcm_graph_free(gnndcm_graph* g);

/* Models. spec_json is e.g. {"family":"gnn","layers":2,"update":"gat"}. */
GNNDCM_API gnndcm_status gnndcm_model_create(const char* spec_json, const gnndcm_graph* g, int num_features,
                                             unsigned long long seed, gnndcm_model** out);
GNNDCM_API gnndcm_status gnndcm_model_load(const char* path, gnndcm_model** out);
/* Stores the dataset's feature scaling alongside the parameters. */
GNNDCM_API gnndcm_status gnndcm_model_save(const gnndcm_model* m, const gnndcm_dataset* ds, const char* path);
/* train_json holds TrainConfig keys and may be NULL; result_json may be NULL. */
GNNDCM_API gnndcm_status gnndcm_model_fit(gnndcm_model* m, const gnndcm_dataset* ds, const char* train_json,
                                          char** result_json);
/* Writes num_households x num_alternatives probabilities, row major. */
GNNDCM_API gnndcm_status gnndcm_model_predict(const gnndcm_model* m, const gnndcm_dataset* ds, double* out,
                                              size_t capacity);
GNNDCM_API gnndcm_status gnndcm_model_nll(const gnndcm_model* m, const gnndcm_dataset* ds, double* out);
GNNDCM_API int gnndcm_model_num_parameters(const gnndcm_model* m);
GNNDCM_API void gnndcm_model_free(gnndcm_model* m);

#ifdef __cplusplus
}
#endif

#endif
