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

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "common/error.hpp"
#include "doctest.h"
#include "graph/graph.hpp"
#include "verify/verify.hpp"

using namespace gnndcm;

namespace {
AlternativeGraph path(int n) {
  std::vector<Edge> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return AlternativeGraph::build(n, e);
}
} // namespace

TEST_CASE("path graph adjacency") {
  const auto g = path(3);
  const auto a = g.adjacency_matrix();
  CHECK(a[0 * 3 + 1] == 1);
  CHECK(a[1 * 3 + 0] == 1);
  CHECK(a[0 * 3 + 2] == 0);
  CHECK(g.num_edges() == 2);
}

TEST_CASE("build rejects self-loops and out-of-range indices") {
  std::vector<Edge> loop{{0, 0}};
  CHECK_THROWS_AS(AlternativeGraph::build(2, loop), DataError);
  std::vector<Edge> out{{0, 5}};
  CHECK_THROWS_AS(AlternativeGraph::build(3, out), DataError);
}

TEST_CASE("duplicate and reversed edges collapse") {
  std::vector<Edge> e{{0, 1}, {1, 0}, {0, 1}, {2, 1}};
  const auto g = AlternativeGraph::build(3, e);
  CHECK(g.num_edges() == 2);
  CHECK(g.degree(1) == 2);
}

TEST_CASE("khop neighbours on a path") {
  const auto g = path(4);
  CHECK(khop_neighbors(g, 1, 0).empty());
  CHECK(khop_neighbors(g, 1, 1) == std::vector<NodeIndex>{0, 2});
  CHECK(khop_neighbors(g, 1, 2) == std::vector<NodeIndex>{0, 2, 3});
  CHECK_THROWS(khop_neighbors(g, 7, 1));
}

TEST_CASE("neighbourhood index is nested and symmetric") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    const auto g = random_connected_graph(9, rng, 0.1);
    const auto n1 = NeighborhoodIndex::build(g, 1);
    const auto n2 = NeighborhoodIndex::build(g, 2);
    for (int i = 0; i < 9; ++i)
      for (int j = 0; j < 9; ++j) {
        CHECK(n1.contains(i, j) == n1.contains(j, i));
        if (n1.contains(i, j)) CHECK(n2.contains(i, j));
      }
  }
}

TEST_CASE("khop at the diameter covers the connected component") {
  std::vector<Edge> e{{0, 1}, {1, 2}, {3, 4}};
  const auto g = AlternativeGraph::build(6, e);
  CHECK(khop_neighbors(g, 0, 5) == std::vector<NodeIndex>{1, 2});
  CHECK(khop_neighbors(g, 5, 5).empty());
  const auto comp = connected_components(g);
  CHECK(comp[0] == comp[2]);
  CHECK(comp[0] != comp[3]);
  CHECK(comp[5] != comp[3]);
}

TEST_CASE("nests to graph") {
  NestStructure n{{{0, 1, 2}, {3, 4}}, {0.5, 0.5}};
  const auto g = nests_to_graph(n, 5);
  std::set<Edge> expected{{0, 1}, {0, 2}, {1, 2}, {3, 4}};
  CHECK(std::set<Edge>(g.edges().begin(), g.edges().end()) == expected);

  NestStructure singletons{{{0}, {1}, {2}}, {1, 1, 1}};
  CHECK(nests_to_graph(singletons, 3).num_edges() == 0);

  NestStructure one{{{0, 1, 2, 3, 4, 5}}, {0.7}};
  CHECK(nests_to_graph(one, 6).num_edges() == 15);

  NestStructure overlap{{{0, 1}, {1, 2}}, {0.5, 0.5}};
  CHECK_THROWS(nests_to_graph(overlap, 3));
}

TEST_CASE("nest validation") {
  NestStructure bad_mu{{{0, 1}}, {1.5}};
  CHECK_THROWS_AS(bad_mu.validate(2), DataError);
  NestStructure missing{{{0}}, {0.5}};
  CHECK_THROWS_AS(missing.validate(2), DataError);
}

TEST_CASE("scl pair nests and equal allocation") {
  std::vector<Edge> tri{{0, 1}, {1, 2}, {0, 2}};
  CHECK(scl_pair_nests(AlternativeGraph::build(3, tri)).size() == 3);

  std::vector<Edge> star{{0, 1}, {0, 2}, {0, 3}, {0, 4}};
  const auto alpha = equal_allocation(AlternativeGraph::build(5, star));
  for (const auto& [j, a] : alpha[0]) CHECK(a == doctest::Approx(0.25));
  CHECK(alpha[1].at(0) == 1.0);

  std::vector<Edge> iso{{0, 1}};
  CHECK_THROWS_AS(equal_allocation(AlternativeGraph::build(3, iso)), DataError);
  CHECK_THROWS_AS(scl_pair_nests(AlternativeGraph::build(3, iso)), DataError);

  std::mt19937_64 rng(11);
  for (int t = 0; t < 20; ++t) {
    const auto g = random_connected_graph(12, rng, 0.3);
    for (const auto& row : equal_allocation(g)) {
      double s = 0.0;
      for (const auto& [j, a] : row) s += a;
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("edge-list csv round trip and missing file") {
  const auto dir = std::filesystem::temp_directory_path() / "gnndcm_graph_test";
  std::filesystem::create_directories(dir);
  const auto file = (dir / "edges.csv").string();
  {
    std::ofstream out(file);
    out << "src,dst\n0,1\n1,0\n2,1\n";
  }
  const auto g = AlternativeGraph::read_csv(file, 3);
  CHECK(g.num_edges() == 2);
  CHECK_THROWS_WITH_AS(AlternativeGraph::read_csv((dir / "none.csv").string(), 3),
                       doctest::Contains("graph file not found"), DataError);
}

TEST_CASE("gabriel graph of a unit square has the four sides") {
  std::vector<std::pair<double, double>> pts{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const auto g = gabriel_graph(pts);
  // Diagonals have the other corners on their circle boundary, not strictly inside.
  CHECK(g.num_edges() >= 4);
  CHECK(g.adjacent(0, 1));
  CHECK(g.adjacent(1, 2));
  CHECK(g.adjacent(2, 3));
  CHECK(g.adjacent(3, 0));
}
