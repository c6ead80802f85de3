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

#include "train/metrics.hpp"

#include <cmath>

#include "common/error.hpp"

namespace gnndcm {

using nlohmann::json;

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

} // namespace

json MetricReport::to_json() const {
  return {{"households", households},
          {"test_log_likelihood", number_or_null(log_likelihood)},
          {"train_log_likelihood", number_or_null(train_log_likelihood)},
          {"accuracy", accuracy},
          {"top5_accuracy", top5_accuracy},
          {"avg_distance_km", number_or_null(avg_distance_km)},
          {"macro_f1", macro_f1},
          {"mrr", mrr}};
}

MetricReport MetricReport::mean(std::span<const MetricReport> reports) {
  MetricReport m;
  if (reports.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    m.log_likelihood = m.accuracy = m.top5_accuracy = m.macro_f1 = m.mrr = nan;
    return m;
  }
  m.train_log_likelihood = 0.0;
  m.avg_distance_km = 0.0;
  for (const auto& r : reports) {
    m.households += r.households;
    m.log_likelihood += r.log_likelihood;
    m.train_log_likelihood += r.train_log_likelihood;
    m.accuracy += r.accuracy;
    m.top5_accuracy += r.top5_accuracy;
    m.avg_distance_km += r.avg_distance_km;
    m.macro_f1 += r.macro_f1;
    m.mrr += r.mrr;
  }
  const double k = static_cast<double>(reports.size());
  m.log_likelihood /= k;
  m.train_log_likelihood /= k;
  m.accuracy /= k;
  m.top5_accuracy /= k;
  m.avg_distance_km /= k;
  m.macro_f1 /= k;
  m.mrr /= k;
  return m;
}

int argmax_lowest(std::span<const double> p) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(p.size()); ++i)
    if (p[i] > p[best]) best = i;
  return best;
}

int rank_of(std::span<const double> p, int c) {
  int rank = 1;
  for (int j = 0; j < static_cast<int>(p.size()); ++j)
    if (p[j] > p[c] || (p[j] == p[c] && j < c)) ++rank;
  return rank;
}

MetricReport evaluate_probabilities(const ad::Tensor& probs, std::span<const int> chosen,
                                    const std::vector<std::pair<double, double>>& centroids) {
  const int n = static_cast<int>(probs.rows());
  const int v = static_cast<int>(probs.cols());
  if (static_cast<int>(chosen.size()) != n) throw UsageError("one chosen alternative per probability row required");
  if (n == 0) throw DataError("cannot evaluate an empty test set");
  const bool with_distance = static_cast<int>(centroids.size()) == v;
  MetricReport r;
  r.households = n;
  std::vector<int> tp(v, 0), fp(v, 0), fn(v, 0);
  double distance = 0.0;
  for (int row = 0; row < n; ++row) {
    std::span<const double> p(probs.data() + static_cast<Eigen::Index>(row) * v, static_cast<std::size_t>(v));
    const int c = chosen[row];
    if (c < 0 || c >= v) throw DataError("chosen alternative out of range");
    if (!(p[c] > 0.0)) throw NumericalError("zero probability for a chosen alternative");
    r.log_likelihood += std::log(p[c]);
    const int pred = argmax_lowest(p);
    const int rank = rank_of(p, c);
    if (pred == c) {
      r.accuracy += 1.0;
      ++tp[c];
    } else {
      ++fp[pred];
      ++fn[c];
    }
    if (rank <= 5) r.top5_accuracy += 1.0;
    r.mrr += 1.0 / rank;
    if (with_distance) {
      const double dx = centroids[pred].first - centroids[c].first;
      const double dy = centroids[pred].second - centroids[c].second;
      distance += std::sqrt(dx * dx + dy * dy);
    }
  }
  r.accuracy /= n;
  r.top5_accuracy /= n;
  r.mrr /= n;
  if (with_distance) r.avg_distance_km = distance / n;
  double f1 = 0.0;
  for (int k = 0; k < v; ++k) {
    const double prec = tp[k] + fp[k] > 0 ? static_cast<double>(tp[k]) / (tp[k] + fp[k]) : 0.0;
    const double rec = tp[k] + fn[k] > 0 ? static_cast<double>(tp[k]) / (tp[k] + fn[k]) : 0.0;
    if (prec + rec > 0.0) f1 += 2.0 * prec * rec / (prec + rec);
  }
  r.macro_f1 = f1 / v;
  return r;
}

MetricReport evaluate(const ChoiceModel& model, const ChoiceDataset& test, bool require_distance) {
  if (require_distance && !test.has_centroids()) throw DataError("centroids are required for the distance metric");
  const auto probs = model.predict(test);
  return evaluate_probabilities(probs, test.chosen, test.has_centroids() ? test.centroids : decltype(test.centroids){});
}

} // namespace gnndcm
