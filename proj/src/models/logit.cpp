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

#include "models/logit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "common/error.hpp"

namespace gnndcm {

double logsumexp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

std::vector<double> linear_utilities(std::span<const double> household, int num_features,
                                     std::span<const double> coefficients) {
  if (static_cast<int>(coefficients.size()) != num_features) throw UsageError("coefficient count != feature count");
  const auto v = household.size() / static_cast<std::size_t>(num_features);
  std::vector<double> u(v, 0.0);
  for (std::size_t i = 0; i < v; ++i)
    for (int d = 0; d < num_features; ++d) u[i] += coefficients[d] * household[i * num_features + d];
  return u;
}

std::vector<double> mnl_probs(std::span<const double> utilities) {
  for (double u : utilities)
    if (!std::isfinite(u)) throw NumericalError("non-finite utility");
  const double lse = logsumexp(utilities);
  std::vector<double> p(utilities.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(utilities[i] - lse);
  return p;
}

std::vector<double> nl_probs_closed(std::span<const double> utilities, const NestStructure& nests) {
  const int n = static_cast<int>(utilities.size());
  nests.validate(n);
  const auto k_count = nests.nests.size();
  // Inclusive value I_k = log sum_{j in B_k} exp(V_j / mu_k).
  std::vector<double> inclusive(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    std::vector<double> scaled;
    for (auto j : nests.nests[k]) scaled.push_back(utilities[j] / nests.mu[k]);
    inclusive[k] = logsumexp(scaled);
  }
  std::vector<double> nest_logits(k_count);
  for (std::size_t k = 0; k < k_count; ++k) nest_logits[k] = nests.mu[k] * inclusive[k];
  const double denom = logsumexp(nest_logits);
  std::vector<double> p(n);
  for (std::size_t k = 0; k < k_count; ++k) {
    const double log_nest = nest_logits[k] - denom;
    for (auto i : nests.nests[k]) p[i] = std::exp(utilities[i] / nests.mu[k] - inclusive[k] + log_nest);
  }
  return p;
}

std::vector<double> scl_probs_closed(std::span<const double> utilities, const AlternativeGraph& graph, double mu,
                                     const std::vector<std::map<NodeIndex, double>>& alpha) {
  if (!(mu > 0.0 && mu <= 1.0)) throw DataError("SCL dissimilarity mu must lie in (0,1]");
  const int n = graph.num_nodes();
  if (static_cast<int>(utilities.size()) != n) throw UsageError("utility count != graph size");
  for (int i = 0; i < n; ++i)
    if (graph.degree(i) == 0) throw DataError("alternative " + std::to_string(i) + " is isolated");

  // Work in logs: a = log((alpha_i,ij e^{V_i})^{1/mu}), pair = log(A + C).
  std::vector<std::vector<double>> numer_terms(n);
  std::vector<double> denom_terms;
  denom_terms.reserve(graph.num_edges());
  for (auto [i, j] : graph.edges()) {
    const double ai = (std::log(alpha[i].at(j)) + utilities[i]) / mu;
    const double aj = (std::log(alpha[j].at(i)) + utilities[j]) / mu;
    const double pair = std::max(ai, aj) + std::log1p(std::exp(-std::abs(ai - aj)));
    numer_terms[i].push_back(ai + (mu - 1.0) * pair);
    numer_terms[j].push_back(aj + (mu - 1.0) * pair);
    denom_terms.push_back(mu * pair);
  }
  const double log_denom = logsumexp(denom_terms);
  std::vector<double> p(n);
  for (int i = 0; i < n; ++i) p[i] = std::exp(logsumexp(numer_terms[i]) - log_denom);
  return p;
}

} // namespace gnndcm
