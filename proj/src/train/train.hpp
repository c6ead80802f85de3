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

#ifndef GNNDCM_TRAIN_TRAIN_HPP
#define GNNDCM_TRAIN_TRAIN_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dataset/dataset.hpp"
#include "models/model.hpp"

namespace gnndcm {

enum class OptimizerKind { adam, lbfgs };

struct TrainConfig {
  int batch_size = 32;
  double learning_rate = 0.01;
  double dropout = 0.05; // applied to neural specs built from presets
  int max_epochs = 200;
  int patience = 20;     // epochs without full-train NLL improvement
  unsigned long long seed = 1;
  std::optional<OptimizerKind> optimizer; // empty: adam for neural, lbfgs otherwise
  int max_iterations = 500;               // quasi-newton
  double gradient_tolerance = 1e-6;       // quasi-newton, max-norm
  int lbfgs_memory = 10;

  OptimizerKind optimizer_for(const ModelSpec& spec) const;
  void validate() const;
  nlohmann::json to_json() const;
  /// Fields missing from `j` keep their current values.
  void merge_json(const nlohmann::json& j);
};

const char* optimizer_name(OptimizerKind k);

struct InferenceStats {
  std::vector<double> coefficients;
  std::vector<double> standard_errors;
  std::vector<double> t_stats;
};

struct FitResult {
  std::string optimizer;   // as run; "lbfgs+adam" after a fallback
  double train_nll = 0.0;
  std::vector<double> loss_trace; // per epoch (adam) or accepted iteration (lbfgs)
  int iterations = 0;
  bool converged = false;
  double gradient_max_norm = 0.0; // full-batch, at the returned parameters
  double seconds = 0.0;
  std::vector<std::string> notes;
  std::optional<InferenceStats> stats; // MNL only
};

/// -sum log P(chosen) over the listed households (all when empty), in
/// inference mode.
double nll(const ChoiceModel& model, const ChoiceDataset& ds, std::span<const int> households = {});

/// Full-batch loss and gradient over the trainable parameters, flattened in
/// ParamStore order.
double nll_gradient(const ChoiceModel& model, const ChoiceDataset& ds, std::vector<double>& grad);

/// One Adam state over a flat parameter vector.
class Adam {
public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}
  void step(std::vector<double>& x, const std::vector<double>& g);
  long long steps() const { return t_; }

private:
  double lr_, b1_, b2_, eps_;
  long long t_ = 0;
  std::vector<double> m_, v_;
};

/// Fits from the model's current parameters.
FitResult fit(ChoiceModel& model, const ChoiceDataset& train, const TrainConfig& config);

/// Observed-information standard errors of a fitted MNL. Throws
/// NumericalError when the information matrix is singular.
InferenceStats mnl_inference_stats(const ChoiceModel& model, const ChoiceDataset& ds);

} // namespace gnndcm

#endif
