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

#ifndef GNNDCM_VERIFY_VERIFY_HPP
#define GNNDCM_VERIFY_VERIFY_HPP

#include <random>
#include <string>
#include <vector>

#include "dataset/dataset.hpp"
#include "graph/graph.hpp"
#include "models/model.hpp"

namespace gnndcm {

/// Random spanning tree plus each remaining pair with probability `extra`.
AlternativeGraph random_connected_graph(int num_nodes, std::mt19937_64& rng, double extra = 0.2);

struct GradientCheck {
  double max_error = 0.0;        // |a - f| / (|f| + floor)
  double max_strict_error = 0.0; // |a - f| / (|f| + 1e-8)
  int strict_violations = 0;     // elements with strict error >= 1e-5
  int elements = 0;
};

/// Elementwise comparison of the full-batch NLL gradient with central
/// differences of relative step `h`. `floor` is the denominator guard of the
/// reported error; central differences in double precision resolve gradients
/// only to about 1e-9 absolute, so a guard much below 1e-3 measures rounding
/// noise rather than the gradient.
GradientCheck gradient_check(const ChoiceModel& model, const ChoiceDataset& ds, double h = 1e-6, double floor = 1e-3);

/// Gives every parameter (including zero-initialized ones) a random value.
void randomize_params(ChoiceModel& model, std::mt19937_64& rng, double scale = 0.5);

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
  std::string line() const;
};

struct VerifyOptions {
  int trials = 1000;
  unsigned long long seed = 7;
  // Testing hook: perturbs the allocation weights seen by the SCL
  // message-passing path, which must then disagree with the closed form.
  bool inject_scl_alpha_fault = false;
};

std::vector<SuiteResult> run_verify(const VerifyOptions& options);

/// The worked nested-logit instance: utilities -10..-14, nests {1,2,3} and
/// {4,5}.
struct NlWorkedExample {
  std::vector<double> closed;
  std::vector<double> message_passing;
  std::vector<double> utilities;
};
NlWorkedExample nl_worked_example(double mu1, double mu2);

} // namespace gnndcm

#endif
