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

#include "graph/graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <set>

#include "common/csv.hpp"
#include "common/error.hpp"

namespace gnndcm {

AlternativeGraph AlternativeGraph::build(int num_nodes, std::span<const Edge> edges) {
  if (num_nodes <= 0) throw DataError("graph must have at least one node");
  std::set<Edge> unique;
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= num_nodes || b >= num_nodes) {
      throw DataError("edge (" + std::to_string(a) + "," + std::to_string(b) + ") has node index out of range [0," +
                      std::to_string(num_nodes) + ")");
    }
    if (a == b) throw DataError("self-loop at node " + std::to_string(a) + " is not allowed in the edge list");
    unique.insert({std::min(a, b), std::max(a, b)});
  }
  AlternativeGraph g;
  g.num_nodes_ = num_nodes;
  g.edges_.assign(unique.begin(), unique.end());
  g.adjacency_list_.assign(num_nodes, {});
  for (auto [a, b] : g.edges_) {
    g.adjacency_list_[a].push_back(b);
    g.adjacency_list_[b].push_back(a);
  }
  for (auto& nb : g.adjacency_list_) std::sort(nb.begin(), nb.end());
  return g;
}

AlternativeGraph AlternativeGraph::read_csv(const std::string& path, int num_nodes) {
  std::ifstream probe(path);
  if (!probe) throw DataError("graph file not found: " + path);
  auto table = CsvTable::read(path);
  auto src = table.column("src");
  auto dst = table.column("dst");
  std::vector<Edge> edges;
  edges.reserve(table.rows());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    edges.emplace_back(static_cast<NodeIndex>(table.integer(r, src)), static_cast<NodeIndex>(table.integer(r, dst)));
  }
  return build(num_nodes, edges);
}

bool AlternativeGraph::adjacent(NodeIndex i, NodeIndex j) const {
  const auto& nb = adjacency_list_.at(i);
  return std::binary_search(nb.begin(), nb.end(), j);
}

std::vector<unsigned char> AlternativeGraph::adjacency_matrix() const {
  std::vector<unsigned char> a(static_cast<std::size_t>(num_nodes_) * num_nodes_, 0);
  for (auto [i, j] : edges_) {
    a[static_cast<std::size_t>(i) * num_nodes_ + j] = 1;
    a[static_cast<std::size_t>(j) * num_nodes_ + i] = 1;
  }
  return a;
}

void AlternativeGraph::set_edge_features(std::map<Edge, std::vector<double>> features) {
  std::map<Edge, std::vector<double>> normalized;
  for (auto& [e, f] : features) {
    Edge key{std::min(e.first, e.second), std::max(e.first, e.second)};
    if (!std::binary_search(edges_.begin(), edges_.end(), key)) {
      throw DataError("edge feature given for a pair that is not an edge");
    }
    normalized[key] = std::move(f);
  }
  edge_features_ = std::move(normalized);
}

void AlternativeGraph::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "src,dst\n";
  for (auto [a, b] : edges_) out << a << ',' << b << '\n';
}

void NestStructure::validate(int num_nodes) const {
  if (nests.empty()) throw DataError("nest structure needs at least one nest");
  if (mu.size() != nests.size()) throw DataError("one mu per nest is required");
  std::vector<int> seen(num_nodes, 0);
  for (std::size_t k = 0; k < nests.size(); ++k) {
    if (!(mu[k] > 0.0 && mu[k] <= 1.0)) {
      throw DataError("nest " + std::to_string(k) + " has mu=" + std::to_string(mu[k]) + " outside (0,1]");
    }
    if (nests[k].empty()) throw DataError("nest " + std::to_string(k) + " is empty");
    for (auto i : nests[k]) {
      if (i < 0 || i >= num_nodes) throw DataError("nest member " + std::to_string(i) + " out of range");
      if (seen[i]++) throw DataError("alternative " + std::to_string(i) + " appears in more than one nest");
    }
  }
  for (int i = 0; i < num_nodes; ++i)
    if (!seen[i]) throw DataError("alternative " + std::to_string(i) + " belongs to no nest");
}

std::vector<int> NestStructure::nest_of(int num_nodes) const {
  validate(num_nodes);
  std::vector<int> out(num_nodes, -1);
  for (std::size_t k = 0; k < nests.size(); ++k)
    for (auto i : nests[k]) out[i] = static_cast<int>(k);
  return out;
}

std::vector<int> hop_distances(const AlternativeGraph& g, NodeIndex j) {
  if (j < 0 || j >= g.num_nodes()) throw DataError("node " + std::to_string(j) + " out of range");
  std::vector<int> dist(g.num_nodes(), -1);
  std::deque<NodeIndex> queue{j};
  dist[j] = 0;
  while (!queue.empty()) {
    auto u = queue.front();
    queue.pop_front();
    for (auto v : g.neighbors(u)) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

std::vector<NodeIndex> khop_neighbors(const AlternativeGraph& g, NodeIndex j, int k) {
  if (k < 0) throw DataError("hop count must be non-negative");
  auto dist = hop_distances(g, j);
  std::vector<NodeIndex> out;
  for (int i = 0; i < g.num_nodes(); ++i)
    if (dist[i] >= 1 && dist[i] <= k) out.push_back(i);
  return out;
}

NeighborhoodIndex NeighborhoodIndex::build(const AlternativeGraph& g, int hops) {
  NeighborhoodIndex idx;
  idx.hops = hops;
  idx.sets.reserve(g.num_nodes());
  for (int j = 0; j < g.num_nodes(); ++j) idx.sets.push_back(khop_neighbors(g, j, hops));
  return idx;
}

bool NeighborhoodIndex::contains(NodeIndex j, NodeIndex i) const {
  const auto& s = sets.at(j);
  return std::binary_search(s.begin(), s.end(), i);
}

AlternativeGraph nests_to_graph(const NestStructure& nests, int num_nodes) {
  nests.validate(num_nodes);
  std::vector<Edge> edges;
  for (const auto& nest : nests.nests)
    for (std::size_t a = 0; a < nest.size(); ++a)
      for (std::size_t b = a + 1; b < nest.size(); ++b) edges.emplace_back(nest[a], nest[b]);
  return AlternativeGraph::build(num_nodes, edges);
}

namespace {

void require_no_isolated(const AlternativeGraph& g) {
  for (int i = 0; i < g.num_nodes(); ++i) {
    if (g.degree(i) == 0) {
      throw DataError("alternative " + std::to_string(i) + " is isolated (degree 0) and belongs to no pair nest");
    }
  }
}

} // namespace

std::vector<Edge> scl_pair_nests(const AlternativeGraph& g) {
  require_no_isolated(g);
  return g.edges();
}

std::vector<std::map<NodeIndex, double>> equal_allocation(const AlternativeGraph& g) {
  require_no_isolated(g);
  std::vector<std::map<NodeIndex, double>> alpha(g.num_nodes());
  for (int i = 0; i < g.num_nodes(); ++i) {
    const double share = 1.0 / g.degree(i);
    for (auto j : g.neighbors(i)) alpha[i][j] = share;
  }
  return alpha;
}

std::vector<int> connected_components(const AlternativeGraph& g) {
  std::vector<int> label(g.num_nodes(), -1);
  int next = 0;
  for (int s = 0; s < g.num_nodes(); ++s) {
    if (label[s] >= 0) continue;
    auto dist = hop_distances(g, s);
    for (int i = 0; i < g.num_nodes(); ++i)
      if (dist[i] >= 0) label[i] = next;
    ++next;
  }
  return label;
}

AlternativeGraph gabriel_graph(std::span<const std::pair<double, double>> points) {
  const int n = static_cast<int>(points.size());
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double cx = 0.5 * (points[i].first + points[j].first);
      const double cy = 0.5 * (points[i].second + points[j].second);
      const double dx = points[i].first - points[j].first;
      const double dy = points[i].second - points[j].second;
      const double r2 = 0.25 * (dx * dx + dy * dy);
      bool empty = true;
      for (int k = 0; k < n && empty; ++k) {
        if (k == i || k == j) continue;
        const double ex = points[k].first - cx;
        const double ey = points[k].second - cy;
        if (ex * ex + ey * ey < r2) empty = false;
      }
      if (empty) edges.emplace_back(i, j);
    }
  }
  return AlternativeGraph::build(n, edges);
}

} // namespace gnndcm
