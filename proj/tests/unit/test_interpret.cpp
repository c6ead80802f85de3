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

#include <cmath>
#include <numeric>
#include <random>

#include "common/error.hpp"
#include "dataset/dataset.hpp"
#include "doctest.h"
#include "interpret/interpret.hpp"
#include "models/model.hpp"
#include "verify/verify.hpp"

using namespace gnndcm;

namespace {

SynthResult data(int households, int v, int d, unsigned long long seed, std::optional<AlternativeGraph> g = {}) {
  SynthConfig c;
  c.num_households = households;
  c.num_alternatives = v;
  c.num_features = d;
  c.seed = seed;
  c.graph = std::move(g);
  auto r = synthesize(c);
  // Shift to strictly positive values so relative changes are defined.
  for (auto& x : r.dataset.features) x = 2.0 + std::abs(x);
  return r;
}

ChoiceModel mnl(const SynthResult& s, std::vector<double> b) {
  ChoiceModel m(MnlSpec{}, s.graph, s.dataset.num_features);
  m.params().set_flat_values(b);
  return m;
}

AlternativeGraph path(int n) {
  std::vector<Edge> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return AlternativeGraph::build(n, e);
}

GnnSpec gnn(int layers) {
  GnnSpec g;
  g.layers = layers;
  g.hidden = 8;
  g.dropout = 0.0;
  return g;
}

} // namespace

TEST_CASE("mnl elasticities match the analytic formulas") {
  const auto s = data(3, 6, 3, 1);
  const auto m = mnl(s, {0.7, -1.1, 0.4});
  const int j = 2;
  const auto name = s.dataset.feature_names[1];
  const auto e = elasticity(m, s.dataset, 1, j, name);
  const double z = s.dataset.original_feature(1, j, 1);
  const double slope = -1.1 / s.dataset.scale_sd[1];
  for (int i = 0; i < 6; ++i) {
    const double expected = i == j ? slope * z * (1.0 - e.probabilities[j]) : -slope * z * e.probabilities[j];
    CHECK(e.values[i] == doctest::Approx(expected).epsilon(1e-6));
  }
  double lo = 1e300, hi = -1e300;
  for (int i = 0; i < 6; ++i)
    if (i != j) {
      lo = std::min(lo, e.values[i]);
      hi = std::max(hi, e.values[i]);
    }
  CHECK(hi - lo < 1e-10);

  const auto semi = elasticity(m, s.dataset, 1, j, name, ElasticityMode::semi);
  CHECK(semi.values[j] == doctest::Approx(slope * (1.0 - e.probabilities[j])).epsilon(1e-6));
}

TEST_CASE("relative elasticity of a zero attribute asks for semi mode") {
  auto s = data(1, 4, 2, 2);
  s.dataset.feature(0, 1, 0) = 0.0;
  const auto m = mnl(s, {0.5, 0.5});
  CHECK_THROWS_AS(elasticity(m, s.dataset, 0, 1, s.dataset.feature_names[0]), UsageError);
  CHECK_NOTHROW(elasticity(m, s.dataset, 0, 1, s.dataset.feature_names[0], ElasticityMode::semi));
}

TEST_CASE("gnn cross elasticities are constant outside the receptive field") {
  const auto s = data(1, 5, 2, 3, path(5));
  for (int layers = 1; layers <= 2; ++layers) {
    ChoiceModel m(gnn(layers), s.graph, 2);
    m.init_params(10 + layers);
    randomize_params(m, *std::make_unique<std::mt19937_64>(layers), 0.3);
    const auto e = elasticity(m, s.dataset, 0, 0, s.dataset.feature_names[0]);
    const auto check = khop_constancy_check(e, 1e-8);
    CHECK(check.passed);
    if (layers == 1) {
      CHECK(std::abs(e.values[2] - e.values[3]) < 1e-8);
      CHECK(std::abs(e.values[3] - e.values[4]) < 1e-8);
      CHECK(e.classes[1] == HopClass::within);
      CHECK(e.classes[2] == HopClass::outside);
    } else {
      CHECK(std::abs(e.values[3] - e.values[4]) < 1e-8);
      CHECK(std::abs(e.values[2] - e.values[3]) > 1e-8);
    }
  }
}

TEST_CASE("mnl ice curves are monotone in the coefficient's direction") {
  const auto s = data(5, 6, 3, 4);
  for (double b : {0.9, -0.6}) {
    const auto m = mnl(s, {b, 0.2, -0.1});
    std::vector<int> hh{0, 1, 2, 3, 4};
    const auto c = ice_curve(m, s.dataset, hh, 3, s.dataset.feature_names[0], 50);
    CHECK(c.grid.size() == 50);
    for (const auto& curve : c.curves)
      for (std::size_t k = 1; k < curve.size(); ++k) CHECK((b > 0 ? curve[k] > curve[k - 1] : curve[k] < curve[k - 1]));
  }
}

TEST_CASE("constant model gives flat ice curves") {
  const auto s = data(3, 7, 2, 5);
  const auto m = mnl(s, {0.0, 0.0});
  std::vector<int> hh{0, 1, 2};
  const auto c = ice_curve(m, s.dataset, hh, 2, s.dataset.feature_names[1], 10);
  for (const auto& curve : c.curves)
    for (double p : curve) CHECK(p == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("substitution map: normalization, proportionality, first-order agreement") {
  const auto s = data(2, 8, 3, 6);
  const auto m = mnl(s, {0.8, -0.3, 0.5});
  const auto name = s.dataset.feature_names[0];
  const auto map = substitution_map(m, s.dataset, 0, 4, name, 10.0);
  CHECK(std::abs(std::accumulate(map.before.begin(), map.before.end(), 0.0) - 1.0) < 1e-12);
  CHECK(std::abs(std::accumulate(map.after.begin(), map.after.end(), 0.0) - 1.0) < 1e-12);
  for (int i = 0; i < 8; ++i)
    if (i != 4 && i != 0) CHECK(map.pct_change[i] == doctest::Approx(map.pct_change[0]).epsilon(1e-9));

  const auto e = elasticity(m, s.dataset, 0, 4, name);
  const auto one = substitution_map(m, s.dataset, 0, 4, name, 1.0);
  for (int i = 0; i < 8; ++i) CHECK(one.pct_change[i] == doctest::Approx(e.values[i]).epsilon(0.05));

  // Error against the elasticity shrinks as the shock shrinks.
  double prev = 1e300;
  for (double pct : {2.0, 1.0, 0.5}) {
    const auto mm = substitution_map(m, s.dataset, 0, 4, name, pct);
    const double err = std::abs(mm.pct_change[4] / pct - e.values[4]);
    CHECK(err < prev);
    prev = err;
  }
}
