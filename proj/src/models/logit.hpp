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

#ifndef GNNDCM_MODELS_LOGIT_HPP
#define GNNDCM_MODELS_LOGIT_HPP

#include <map>
#include <span>
#include <vector>

#include "graph/graph.hpp"

namespace gnndcm {

// Closed-form probabilities of the logit family, evaluated on plain
// utilities. These are the references the message-passing forms are checked
// against.

/// b'x for each alternative of one household (V x D block).
std::vector<double> linear_utilities(std::span<const double> household, int num_features,
                                     std::span<const double> coefficients);

std::vector<double> mnl_probs(std::span<const double> utilities);

/// Two-level nested logit, P(i) = P(i | B_k) P(B_k).
std::vector<double> nl_probs_closed(std::span<const double> utilities, const NestStructure& nests);

/// Spatially correlated logit: one pair nest per edge with shared mu and
/// allocation weights alpha[i][j].
std::vector<double> scl_probs_closed(std::span<const double> utilities, const AlternativeGraph& graph, double mu,
                                     const std::vector<std::map<NodeIndex, double>>& alpha);

double logsumexp(std::span<const double> x);

} // namespace gnndcm

#endif
