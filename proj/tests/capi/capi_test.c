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

/* Exercises the public C interface only. Usage: capi_test <scratch-dir> */

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "gnndcm/gnndcm.h"

static int failures = 0;

#define EXPECT(cond)                                                   \
  do {                                                                 \
    if (!(cond)) {                                                     \
      fprintf(stderr, "%s:%d: expected %s (last error: %s)\n", __FILE__, \
              __LINE__, #cond, gnndcm_last_error());                   \
      ++failures;                                                      \
    }                                                                  \
  } while (0)

int main(int argc, char** argv) {
  if (argc < 2) {
    fprintf(stderr, "usage: capi_test <scratch-dir>\n");
    return 1;
  }
  const char* dir = argv[1];
  char config[1024], path[1024];
  char* summary = NULL;

  EXPECT(strlen(gnndcm_version()) > 0);

  snprintf(config, sizeof config, "{\"out\":\"%s\",\"n\":300,\"alternatives\":8,\"features\":3,\"seed\":3}", dir);
  EXPECT(gnndcm_run("synth", config, &summary) == GNNDCM_OK);
  EXPECT(summary != NULL && strstr(summary, "config_hash") != NULL);
  gnndcm_string_free(summary);
  summary = NULL;

  gnndcm_dataset* ds = NULL;
  EXPECT(gnndcm_dataset_load(dir, NULL, &ds) == GNNDCM_OK);
  if (!ds) return 1;
  EXPECT(gnndcm_dataset_num_households(ds) == 300);
  EXPECT(gnndcm_dataset_num_alternatives(ds) == 8);
  EXPECT(gnndcm_dataset_num_features(ds) == 3);

  gnndcm_graph* g = NULL;
  snprintf(path, sizeof path, "%s/edges.csv", dir);
  EXPECT(gnndcm_graph_load(path, ds, &g) == GNNDCM_OK);
  if (!g) return 1;
  EXPECT(gnndcm_graph_num_nodes(g) == 8);
  EXPECT(gnndcm_graph_num_edges(g) > 0);

  gnndcm_graph* missing = NULL;
  snprintf(path, sizeof path, "%s/no-such-edges.csv", dir);
  EXPECT(gnndcm_graph_load(path, ds, &missing) == GNNDCM_ERR_DATA);
  EXPECT(missing == NULL);
  EXPECT(strstr(gnndcm_last_error(), "graph file not found") != NULL);

  gnndcm_model* bad = NULL;
  EXPECT(gnndcm_model_create("{\"family\":\"probit\"}", g, 3, 1, &bad) == GNNDCM_ERR_USAGE);
  EXPECT(gnndcm_model_create("not json", g, 3, 1, &bad) == GNNDCM_ERR_USAGE);
  EXPECT(bad == NULL);

  gnndcm_model* m = NULL;
  EXPECT(gnndcm_model_create("{\"family\":\"mnl\"}", g, 3, 1, &m) == GNNDCM_OK);
  if (!m) return 1;
  EXPECT(gnndcm_model_num_parameters(m) == 3);
  EXPECT(strcmp(gnndcm_last_error(), "") == 0);

  double before = 0.0, after = 0.0;
  EXPECT(gnndcm_model_nll(m, ds, &before) == GNNDCM_OK);
  EXPECT(fabs(before - 300.0 * log(8.0)) < 1e-9);
  EXPECT(gnndcm_model_fit(m, ds, "{\"optimizer\":\"lbfgs\"}", &summary) == GNNDCM_OK);
  EXPECT(summary != NULL && strstr(summary, "converged") != NULL);
  gnndcm_string_free(summary);
  EXPECT(gnndcm_model_nll(m, ds, &after) == GNNDCM_OK);
  EXPECT(after < before);

  const size_t cells = 300 * 8;
  double* p = malloc(cells * sizeof(double));
  double* q = malloc(cells * sizeof(double));
  EXPECT(gnndcm_model_predict(m, ds, p, cells - 1) == GNNDCM_ERR_USAGE);
  EXPECT(gnndcm_model_predict(m, ds, p, cells) == GNNDCM_OK);
  for (int n = 0; n < 300; ++n) {
    double s = 0.0;
    for (int i = 0; i < 8; ++i) s += p[n * 8 + i];
    EXPECT(fabs(s - 1.0) < 1e-12);
  }

  snprintf(path, sizeof path, "%s/model.bin", dir);
  EXPECT(gnndcm_model_save(m, ds, path) == GNNDCM_OK);
  gnndcm_model* loaded = NULL;
  EXPECT(gnndcm_model_load(path, &loaded) == GNNDCM_OK);
  if (loaded) {
    EXPECT(gnndcm_model_predict(loaded, ds, q, cells) == GNNDCM_OK);
    EXPECT(memcmp(p, q, cells * sizeof(double)) == 0);
    gnndcm_model_free(loaded);
  }
  snprintf(path, sizeof path, "%s/features.csv", dir);
  EXPECT(gnndcm_model_load(path, &loaded) == GNNDCM_ERR_DATA);

  EXPECT(gnndcm_run("bogus", "{}", NULL) == GNNDCM_ERR_USAGE);
  EXPECT(gnndcm_run("verify", "{\"trials\":20}", &summary) == GNNDCM_OK);
  gnndcm_string_free(summary);

  free(p);
  free(q);
  gnndcm_model_free(m);
  gnndcm_graph_free(g);
  gnndcm_dataset_free(ds);
  gnndcm_model_free(NULL);
  if (failures == 0) printf("capi: all checks passed\n");
  return failures == 0 ? 0 : 1;
}
