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

#ifndef GNNDCM_TRAIN_METRICS_HPP
#define GNNDCM_TRAIN_METRICS_HPP

#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"

#include "autodiff/tensor.hpp"
#include "dataset/dataset.hpp"
#include "models/model.hpp"

namespace gnndcm {

/// Held-out metrics. Ties in argmax and ranking go to the lowest index.
struct MetricReport {
  int households = 0;
  double log_likelihood = 0.0; // sum over the evaluated households
  double train_log_likelihood = std::numeric_limits<double>::quiet_NaN();
  double accuracy = 0.0;
  double top5_accuracy = 0.0;
  double avg_distance_km = std::numeric_limits<double>::quiet_NaN(); // NaN without centroids
  double macro_f1 = 0.0;
  double mrr = 0.0;

  nlohmann::json to_json() const;
  /// Field-wise mean.
  static MetricReport mean(std::span<const MetricReport> reports);
};

/// Index of the largest entry; the lowest index wins ties.
int argmax_lowest(std::span<const double> p);
/// 1-based rank of alternative c by descending probability, same tie rule.
int rank_of(std::span<const double> p, int c);

/// probs is N x V; centroids may be empty (distance then NaN).
MetricReport evaluate_probabilities(const ad::Tensor& probs, std::span<const int> chosen,
                                    const std::vector<std::pair<double, double>>& centroids);

/// Throws DataError when `require_distance` is set and centroids are missing.
MetricReport evaluate(const ChoiceModel& model, const ChoiceDataset& test, bool require_distance = false);

} // namespace gnndcm

#endif
