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

#ifndef GNNDCM_TRAIN_CV_HPP
#define GNNDCM_TRAIN_CV_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "train/metrics.hpp"
#include "train/train.hpp"

namespace gnndcm {

struct GridEntry {
  std::string label;
  ModelSpec spec;
  // Pivot coordinates for grid-shaped presets; empty otherwise.
  std::string row;
  std::string column;
};

/// "table4": MNL, SCL, ASU-DNN and 1-3 layer GAT models.
/// "table5": six update rows (MPNN sum/max/mean/lse, GCN, GAT), each over
/// K_g in {1,2,3} at h=64, h in {1,16,32,128} at K_g=2, and no skip.
std::vector<GridEntry> preset_grid(const std::string& name, const TrainConfig& train);

/// Array of spec objects, each optionally carrying "label", "row", "column".
std::vector<GridEntry> grid_from_json(const nlohmann::json& j);

struct CvConfig {
  std::vector<GridEntry> grid;
  int folds = 10;
  TrainConfig train;
  int jobs = 1;
  bool save_models = false;
  std::string preset;
  // Testing hook: (config index, fold) that throws inside its job.
  std::optional<std::pair<int, int>> inject_fold_failure;

  nlohmann::json to_json() const;
  std::uint64_t hash() const;
};

struct FoldOutcome {
  bool ok = false;
  std::string error;
  unsigned long long seed = 0;
  std::string optimizer;
  MetricReport metrics;
  std::vector<double> loss_trace;
};

struct CvRow {
  GridEntry entry;
  std::vector<FoldOutcome> folds;
  MetricReport mean; // over successful folds
  int folds_ok = 0;
  bool failed() const { return folds_ok < static_cast<int>(folds.size()); }
};

struct CvReport {
  std::vector<CvRow> rows;
  FoldPlan plan;
  std::uint64_t config_hash = 0;
  unsigned long long seed = 0;
  std::string preset;
};

/// Runs every (config, fold) cell; a failing cell marks its row failed and
/// the sweep goes on. Cell seeds depend only on the base seed and the fold,
/// so results do not depend on `jobs`. Fitted models go to
/// `model_dir/<config>-fold<k>.bin` when `save_models` is set.
CvReport cross_validate(const ChoiceDataset& ds, const AlternativeGraph& graph, const CvConfig& config,
                        const std::string& model_dir = "");

/// metrics.csv, folds.csv, loss_trace.csv, cv.json, plus table4.csv or
/// table5.csv for the presets.
void write_cv_outputs(const CvReport& report, const CvConfig& config, const std::string& dir);

} // namespace gnndcm

#endif
