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

#ifndef GNNDCM_MODELS_MODEL_HPP
#define GNNDCM_MODELS_MODEL_HPP

#include <iosfwd>
#include <map>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "autodiff/params.hpp"
#include "dataset/dataset.hpp"
#include "graph/graph.hpp"
#include "models/layers.hpp"

namespace gnndcm {

struct MnlSpec {};

/// Nest membership; `nests.mu` gives starting values (empty: 0.73 each).
struct NlSpec {
  NestStructure nests;
};

/// One shared dissimilarity over pair nests with equal allocation.
struct SclSpec {
  double initial_mu = 0.0; // 0: sigmoid(1)
};

enum class UpdateKind { mpnn, gcn, gat };

struct GnnSpec {
  int layers = 2;
  UpdateKind update = UpdateKind::mpnn;
  ad::Aggregation aggregation = ad::Aggregation::sum; // MPNN only
  int hidden = 64;
  int embed_layers = 1;
  bool skip = true;
  double dropout = 0.05;

  /// GAT head count: 8 from h = 8 upward, otherwise 1.
  int heads() const { return hidden >= 8 ? 8 : 1; }
  void validate() const;
};

using ModelSpec = std::variant<MnlSpec, NlSpec, SclSpec, GnnSpec>;

/// "mnl", "nl", "scl", "asu-dnn" (a GNN without layers) or "gnn".
std::string model_family(const ModelSpec& spec);
/// Short human-readable label, e.g. "gnn-gat-k2-h64-skip".
std::string model_label(const ModelSpec& spec);
nlohmann::json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

const char* update_name(UpdateKind k);
const char* aggregation_name(ad::Aggregation a);
UpdateKind parse_update(const std::string& s);
ad::Aggregation parse_aggregation(const std::string& s);

/// Standardization constants a model was trained under.
struct FeatureScaling {
  std::vector<std::string> names;
  std::vector<bool> scaled;
  std::vector<double> mean;
  std::vector<double> sd;

  static FeatureScaling of(const ChoiceDataset& ds);
  /// Re-expresses `ds` under these constants; feature names must match.
  ChoiceDataset apply(const ChoiceDataset& ds) const;
  nlohmann::json to_json() const;
  static FeatureScaling from_json(const nlohmann::json& j);
};

/// A model family bound to an alternative graph and feature count, with its
/// parameters. Forward passes are const and may run concurrently.
class ChoiceModel {
public:
  ChoiceModel(ModelSpec spec, AlternativeGraph graph, int num_features);

  const ModelSpec& spec() const { return spec_; }
  const AlternativeGraph& graph() const { return graph_; }
  int num_alternatives() const { return graph_.num_nodes(); }
  int num_features() const { return num_features_; }
  ad::ParamStore& params() { return params_; }
  const ad::ParamStore& params() const { return params_; }

  bool is_neural() const { return std::holds_alternative<GnnSpec>(spec_); }
  /// Hop radius of each utility's dependence (0 for MNL and ASU-DNN).
  int receptive_hops() const;

  /// Glorot-uniform weights, zero biases and coefficients.
  void init_params(unsigned long long seed);

  /// Utilities (batch x V) of a block-diagonal batch; x is (batch*V) x D.
  ad::Var utilities(ad::Tape& tape, const ad::Binding& p, const ad::Tensor& x, int batch, bool train,
                    std::mt19937_64* rng) const;
  ad::Var log_probs(ad::Tape& tape, const ad::Binding& p, const ad::Tensor& x, int batch, bool train,
                    std::mt19937_64* rng) const;

  /// Inference on one household's V x D block.
  std::vector<double> utilities(std::span<const double> household) const;
  std::vector<double> probabilities(std::span<const double> household) const;
  /// N x V probabilities for the listed households (all when empty).
  ad::Tensor predict(const ChoiceDataset& ds, std::span<const int> households = {}) const;

  /// Fitted dissimilarities (NL: one per nest, SCL: one).
  std::vector<double> mu() const;
  std::vector<double> theta() const;

  void save(const std::string& path, const FeatureScaling& scaling) const;
  static ChoiceModel load(const std::string& path, FeatureScaling* scaling = nullptr);

private:
  ad::Var forward_gnn(ad::Tape& tape, const ad::Binding& p, const ad::Tensor& x, int batch, bool train,
                      std::mt19937_64* rng) const;

  ModelSpec spec_;
  AlternativeGraph graph_;
  int num_features_;
  ad::ParamStore params_;
  std::vector<int> nest_of_;
};

/// Copies a dataset's households into a (batch*V) x D matrix.
ad::Tensor stack_households(const ChoiceDataset& ds, std::span<const int> households);

// Message-passing forms of the logit family, on plain utilities.

/// V1 = V0/mu_k + (mu_k - 1) LSE over the nest (self included) of V0/mu_k.
std::vector<double> nl_utilities_mp(std::span<const double> utilities, const NestStructure& nests);
std::vector<double> nl_probs_mp(std::span<const double> utilities, const NestStructure& nests);

/// Per-edge embedding (V_i + log alpha_ij)/mu, pair-nest messages, LSE over
/// neighbors.
std::vector<double> scl_utilities_mp(std::span<const double> utilities, const AlternativeGraph& graph, double mu,
                                     const std::vector<std::map<NodeIndex, double>>& alpha);
std::vector<double> scl_probs_mp(std::span<const double> utilities, const AlternativeGraph& graph, double mu,
                                 const std::vector<std::map<NodeIndex, double>>& alpha);

// Tape forms shared by the fitted NL/SCL models and the functions above.
// v0 is (batch*V) x 1; mu is 1 x 1 (SCL) or one row per nest (NL).
ad::Var nl_message_passing(ad::Var v0, ad::Var mu_per_nest, const std::vector<int>& nest_of, int batch);
ad::Var scl_message_passing(ad::Var v0, ad::Var mu, const AlternativeGraph& graph,
                            const std::vector<std::map<NodeIndex, double>>& alpha, int batch);

} // namespace gnndcm

#endif
