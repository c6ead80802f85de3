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

#ifndef GNNDCM_DATASET_DATASET_HPP
#define GNNDCM_DATASET_DATASET_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "graph/graph.hpp"

namespace gnndcm {

/// Households choosing among alternatives.
///
/// `features` is an N x V x D array, household-major. Columns flagged in
/// `scaled` hold standardized values; `scale_mean`/`scale_sd` map them back
/// to original units. Immutable once loaded.
struct ChoiceDataset {
  int num_households = 0;
  int num_alternatives = 0;
  int num_features = 0;
  std::vector<double> features;
  std::vector<int> chosen;
  std::vector<std::pair<double, double>> centroids; // km, planar
  std::vector<std::string> feature_names;
  std::vector<long long> household_ids;
  std::vector<long long> alternative_ids;
  std::vector<bool> scaled;
  std::vector<double> scale_mean;
  std::vector<double> scale_sd;

  double feature(int n, int i, int d) const {
    return features[(static_cast<std::size_t>(n) * num_alternatives + i) * num_features + d];
  }
  double& feature(int n, int i, int d) {
    return features[(static_cast<std::size_t>(n) * num_alternatives + i) * num_features + d];
  }
  /// V x D block of one household.
  std::span<const double> household(int n) const {
    return {features.data() + static_cast<std::size_t>(n) * num_alternatives * num_features,
            static_cast<std::size_t>(num_alternatives) * num_features};
  }

  double to_original(int d, double model_value) const { return scale_mean[d] + scale_sd[d] * model_value; }
  double to_model(int d, double original_value) const { return (original_value - scale_mean[d]) / scale_sd[d]; }
  double original_feature(int n, int i, int d) const { return to_original(d, feature(n, i, d)); }

  int feature_index(const std::string& name) const;
  int alternative_index(long long id) const;
  bool has_centroids() const { return static_cast<int>(centroids.size()) == num_alternatives; }

  ChoiceDataset subset(std::span<const int> households) const;

  /// Checks shapes, index ranges, finiteness, and name uniqueness.
  void validate() const;
};

enum class FeatureSource { community, interaction, work_distance };
enum class InteractionOp { product, difference };

struct FeatureRule {
  std::string name;
  FeatureSource source = FeatureSource::community;
  std::string community_column; // community and interaction sources
  std::string household_column; // interaction source
  InteractionOp op = InteractionOp::product;
  bool scale = false;
};

/// How raw community/household tables become model features.
struct FeatureSpec {
  std::vector<FeatureRule> features;
  // Work-location coordinate column pairs; the furthest one is used.
  std::vector<std::pair<std::string, std::string>> work_locations{{"work_x", "work_y"}};
  double distance_floor_km = 0.1;

  std::vector<std::string> scaled_columns() const;
  static FeatureSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static FeatureSpec read(const std::string& path);
  /// Residential-choice variables under their short names.
  static FeatureSpec residential_default();
};

/// Builds the feature array from raw tables and standardizes the flagged
/// columns. Community ids order the alternatives (ascending).
ChoiceDataset load_dataset(const std::string& community_csv, const std::string& household_csv,
                           const std::string& centroid_csv, const FeatureSpec& spec);

/// Standardizes `columns` to mean 0 / sample variance 1 over all (n, i)
/// cells, recording the constants. Throws on zero variance.
ChoiceDataset standardize(const ChoiceDataset& ds, const std::vector<std::string>& columns);

/// Maps every scaled column back to original units.
ChoiceDataset unstandardize(const ChoiceDataset& ds);

struct FoldPlan {
  int k = 0;
  unsigned long long seed = 0;
  std::vector<int> assignments;

  std::vector<int> test_indices(int fold) const;
  std::vector<int> train_indices(int fold) const;
};

FoldPlan make_folds(int num_households, int k, unsigned long long seed);

enum class GeneratorModel { mnl, nl, scl };

struct SynthConfig {
  int num_households = 1000;
  int num_alternatives = 20;
  int num_features = 5;
  std::vector<double> true_coefficients; // empty: drawn uniformly in [-1, 1]
  std::optional<AlternativeGraph> graph;  // empty: Gabriel graph of the centroids
  GeneratorModel generator = GeneratorModel::mnl;
  double mu = 1.0;                        // SCL dissimilarity
  std::optional<NestStructure> nests;     // NL; empty: spatial bands with `mu`
  int num_nests = 3;
  double region_km = 0.0;                 // 0: 3 km per sqrt(alternative)
  unsigned long long seed = 1;

  void validate() const;
  nlohmann::json to_json() const;
};

struct SynthResult {
  ChoiceDataset dataset;
  AlternativeGraph graph;
  SynthConfig truth; // coefficients, graph and nests filled in
};

/// Standard normal features, choices sampled from the generator's exact
/// probabilities.
SynthResult synthesize(const SynthConfig& config);

/// AlternativeGraph::write_csv with an optional "# banner" first line.
void write_graph_csv(const AlternativeGraph& g, const std::string& path, const std::string& banner = "");

/// Raw community/household tables whose assembled features follow
/// FeatureSpec::residential_default(); choices come from an MNL on the
/// standardized features. Writes community.csv, households.csv, centroids.csv,
/// feature_spec.json, edges.csv and truth.json into `dir`. `provenance` keys
/// are copied into truth.json; its config_hash and seed head every CSV.
void synthesize_residential(const std::string& dir, int num_households, int num_alternatives,
                            unsigned long long seed, const nlohmann::json& provenance = {});

// Long layout: features.csv (original units), choices.csv, centroids.csv and
// dataset.json listing the scaled columns. `extra` is merged into
// dataset.json; its config_hash and seed head every CSV.
void write_dataset(const ChoiceDataset& ds, const std::string& dir, const nlohmann::json& extra = {});
ChoiceDataset read_dataset(const std::string& dir);

/// Loads either layout from a directory: long layout when features.csv
/// exists, raw tables (with feature_spec.json or `spec_path`) otherwise.
ChoiceDataset load_dataset_dir(const std::string& dir, const std::string& spec_path = "");

} // namespace gnndcm

#endif
