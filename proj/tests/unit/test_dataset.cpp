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
#include <filesystem>
#include <fstream>
#include <numeric>

#include "common/error.hpp"
#include "dataset/dataset.hpp"
#include "doctest.h"
#include "models/logit.hpp"

using namespace gnndcm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("gnndcm_ds_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

// Two communities, two households; the second household works at
// community 2's centroid.
fs::path raw_fixture() {
  const auto dir = scratch("raw");
  write(dir / "community.csv",
        "community_id,units,pct_black,median_income\n"
        "1,100,0.2,50000\n"
        "2,300,0.6,70000\n");
  write(dir / "households.csv",
        "household_id,chosen,income,black,work_x,work_y\n"
        "10,1,60000,1,0,0\n"
        "11,2,40000,0,3,4\n");
  write(dir / "centroids.csv", "community_id,x_km,y_km\n1,0,0\n2,3,4\n");
  write(dir / "feature_spec.json", R"({
    "features": [
      {"name": "units", "source": "community", "column": "units", "scale": false},
      {"name": "black_interact", "source": "interaction", "community": "pct_black", "household": "black"},
      {"name": "income_interact", "source": "interaction", "community": "median_income",
       "household": "income", "op": "difference"},
      {"name": "work_distance", "source": "work_distance"}
    ],
    "work_locations": [["work_x", "work_y"]],
    "distance_floor_km": 0.1
  })");
  return dir;
}

} // namespace

TEST_CASE("raw tables assemble the interaction and distance columns") {
  const auto dir = raw_fixture();
  const auto ds = load_dataset_dir(dir.string());
  REQUIRE(ds.num_households == 2);
  REQUIRE(ds.num_alternatives == 2);
  const int black = ds.feature_index("black_interact");
  const int income = ds.feature_index("income_interact");
  const int dist = ds.feature_index("work_distance");
  CHECK(ds.original_feature(0, 1, black) == doctest::Approx(0.6));
  // Black dummy 0: the interaction is zero at every community.
  CHECK(ds.original_feature(1, 0, black) == 0.0);
  CHECK(ds.original_feature(1, 1, black) == 0.0);
  CHECK(ds.original_feature(0, 1, income) == doctest::Approx(60000.0 - 70000.0));
  // Work location on the centroid hits the distance floor.
  CHECK(ds.original_feature(1, 1, dist) == doctest::Approx(std::log(0.1)));
  CHECK(ds.original_feature(1, 0, dist) == doctest::Approx(std::log(5.0)));
  CHECK(ds.chosen == std::vector<int>{0, 1});
}

TEST_CASE("ingestion is deterministic") {
  const auto dir = raw_fixture();
  const auto a = load_dataset_dir(dir.string());
  const auto b = load_dataset_dir(dir.string());
  CHECK(a.features == b.features);
}

TEST_CASE("missing household attributes are rejected") {
  const auto dir = raw_fixture();
  write(dir / "households.csv",
        "household_id,chosen,income,black,work_x,work_y\n"
        "10,1,,1,0,0\n");
  CHECK_THROWS_AS(load_dataset_dir(dir.string()), DataError);
}

TEST_CASE("standardize: moments, round trip, zero variance") {
  ChoiceDataset ds;
  ds.num_households = 1;
  ds.num_alternatives = 3;
  ds.num_features = 2;
  ds.features = {1, 5, 2, 5, 3, 5};
  ds.chosen = {0};
  ds.feature_names = {"a", "b"};
  ds.household_ids = {1};
  ds.alternative_ids = {1, 2, 3};
  ds.scaled = {false, false};
  ds.scale_mean = {0, 0};
  ds.scale_sd = {1, 1};
  const auto s = standardize(ds, {"a"});
  double mean = 0.0, var = 0.0;
  for (int i = 0; i < 3; ++i) mean += s.feature(0, i, 0) / 3.0;
  for (int i = 0; i < 3; ++i) var += (s.feature(0, i, 0) - mean) * (s.feature(0, i, 0) - mean) / 2.0;
  CHECK(std::abs(mean) < 1e-12);
  CHECK(std::abs(var - 1.0) < 1e-12);
  const auto back = unstandardize(s);
  for (std::size_t k = 0; k < ds.features.size(); ++k) CHECK(std::abs(back.features[k] - ds.features[k]) < 1e-10);
  CHECK_THROWS_AS(standardize(ds, {"b"}), DataError);
}

TEST_CASE("fold plans") {
  const auto p = make_folds(10, 10, 4);
  for (int f = 0; f < 10; ++f) CHECK(p.test_indices(f).size() == 1);

  const auto big = make_folds(3838, 10, 4);
  std::vector<int> seen(3838, 0);
  for (int f = 0; f < 10; ++f) {
    const auto t = big.test_indices(f);
    CHECK((t.size() == 383 || t.size() == 384));
    for (int n : t) ++seen[n];
    CHECK(t.size() + big.train_indices(f).size() == 3838);
  }
  for (int c : seen) CHECK(c == 1);
  CHECK(make_folds(3838, 10, 4).assignments == big.assignments);
  CHECK(make_folds(3838, 10, 5).assignments != big.assignments);
  CHECK_THROWS_AS(make_folds(5, 1, 0), UsageError);
  CHECK_THROWS_AS(make_folds(5, 6, 0), UsageError);
}

TEST_CASE("zero coefficients give uniform choices") {
  SynthConfig c;
  c.num_households = 10000;
  c.num_alternatives = 5;
  c.num_features = 3;
  c.true_coefficients = {0, 0, 0};
  c.seed = 9;
  const auto r = synthesize(c);
  std::vector<int> counts(5, 0);
  for (int k : r.dataset.chosen) ++counts[k];
  const double sd = std::sqrt(10000 * 0.2 * 0.8);
  for (int k : counts) CHECK(std::abs(k - 2000.0) < 3.0 * sd);
}

TEST_CASE("scl generator at mu=1 matches the mnl generator's choice distribution") {
  SynthConfig m;
  m.num_households = 20000;
  m.num_alternatives = 6;
  m.num_features = 2;
  m.true_coefficients = {0.8, -0.5};
  m.seed = 21;
  auto s = m;
  s.generator = GeneratorModel::scl;
  s.mu = 1.0;
  s.seed = 22;
  const auto a = synthesize(m);
  const auto b = synthesize(s);
  // Pearson chi-square two-sample test on the choice frequencies, 5 dof;
  // 20.5 is the 0.999 quantile.
  std::vector<double> ca(6, 0), cb(6, 0);
  for (int k : a.dataset.chosen) ++ca[k];
  for (int k : b.dataset.chosen) ++cb[k];
  double chi = 0.0;
  for (int k = 0; k < 6; ++k) {
    const double pooled = (ca[k] + cb[k]) / 2.0;
    if (pooled > 0) chi += (ca[k] - pooled) * (ca[k] - pooled) / pooled + (cb[k] - pooled) * (cb[k] - pooled) / pooled;
  }
  CHECK(chi < 20.5);
}

TEST_CASE("true coefficients beat perturbed ones on average") {
  int wins = 0;
  for (unsigned seed = 1; seed <= 10; ++seed) {
    SynthConfig c;
    c.num_households = 2000;
    c.num_alternatives = 8;
    c.num_features = 3;
    c.seed = seed;
    const auto r = synthesize(c);
    auto ll = [&](const std::vector<double>& b) {
      double s = 0.0;
      for (int n = 0; n < r.dataset.num_households; ++n) {
        const auto p = mnl_probs(linear_utilities(r.dataset.household(n), 3, b));
        s += std::log(p[r.dataset.chosen[n]]);
      }
      return s;
    };
    auto perturbed = r.truth.true_coefficients;
    for (auto& b : perturbed) b += 0.2;
    if (ll(r.truth.true_coefficients) >= ll(perturbed)) ++wins;
  }
  CHECK(wins >= 9);
}

TEST_CASE("long layout round trip keeps ids, order and scaling") {
  SynthConfig c;
  c.num_households = 30;
  c.num_alternatives = 7;
  c.num_features = 3;
  c.seed = 2;
  const auto r = synthesize(c);
  const auto dir = scratch("long");
  write_dataset(r.dataset, dir.string(), {{"config_hash", "abc"}, {"seed", 2}});
  std::ifstream head(dir / "features.csv");
  std::string first;
  std::getline(head, first);
  CHECK(first == "# config_hash=abc seed=2");
  const auto back = read_dataset(dir.string());
  CHECK(back.alternative_ids == r.dataset.alternative_ids);
  CHECK(back.household_ids == r.dataset.household_ids);
  CHECK(back.chosen == r.dataset.chosen);
  for (std::size_t k = 0; k < back.features.size(); ++k)
    CHECK(std::abs(back.features[k] - r.dataset.features[k]) < 1e-12);
}

TEST_CASE("residential generator produces the thirteen named features") {
  const auto dir = scratch("res");
  synthesize_residential(dir.string(), 50, 12, 3);
  const auto ds = load_dataset_dir(dir.string());
  CHECK(ds.num_features == 13);
  CHECK(ds.num_alternatives == 12);
  CHECK(ds.alternative_ids.front() == 1);
  const auto g = AlternativeGraph::read_csv((dir / "edges.csv").string(), ds.num_alternatives);
  CHECK(g.num_edges() > 0);
  for (const char* name : {"units", "house_value", "work_distance", "black_interact", "income_interact"})
    CHECK_NOTHROW(ds.feature_index(name));
}
