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

#ifndef GNNDCM_GRAPH_GRAPH_HPP
#define GNNDCM_GRAPH_GRAPH_HPP

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gnndcm {

using NodeIndex = int;
using Edge = std::pair<NodeIndex, NodeIndex>;

/// Undirected graph over choice alternatives.
///
/// Edges are stored once with `first < second`; self-loops are never stored.
/// Each model's update rule decides whether a node aggregates over itself.
/// Immutable after construction.
class AlternativeGraph {
public:
  AlternativeGraph() = default;

  /// Builds a graph from unordered pairs. Reversed and repeated pairs are
  /// collapsed; out-of-range indices and self-loops throw DataError.
  static AlternativeGraph build(int num_nodes, std::span<const Edge> edges);

  /// Reads an edge-list CSV with header `src,dst` (0-indexed).
  static AlternativeGraph read_csv(const std::string& path, int num_nodes);

  int num_nodes() const { return num_nodes_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<NodeIndex>& neighbors(NodeIndex i) const { return adjacency_list_.at(i); }
  int degree(NodeIndex i) const { return static_cast<int>(adjacency_list_.at(i).size()); }
  bool adjacent(NodeIndex i, NodeIndex j) const;

  /// Dense |V| x |V| adjacency, row-major.
  std::vector<unsigned char> adjacency_matrix() const;

  // Optional payload; unused by the shipped models.
  void set_edge_features(std::map<Edge, std::vector<double>> features);
  const std::map<Edge, std::vector<double>>& edge_features() const { return edge_features_; }

  void write_csv(const std::string& path) const;

private:
  int num_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<NodeIndex>> adjacency_list_;
  std::map<Edge, std::vector<double>> edge_features_;
};

/// Disjoint nests covering all alternatives, with independence parameters.
struct NestStructure {
  std::vector<std::vector<NodeIndex>> nests;
  std::vector<double> mu;

  /// Checks the partition and mu ranges against `num_nodes`.
  void validate(int num_nodes) const;
  /// nest_of[i] = index of the nest containing alternative i.
  std::vector<int> nest_of(int num_nodes) const;
};

/// Nodes at graph distance 1..k from j (j itself excluded), ascending.
std::vector<NodeIndex> khop_neighbors(const AlternativeGraph& g, NodeIndex j, int k);

/// BFS distances from j; -1 for unreachable nodes.
std::vector<int> hop_distances(const AlternativeGraph& g, NodeIndex j);

/// Hop sets N_k(j) for every node.
struct NeighborhoodIndex {
  int hops = 0;
  std::vector<std::vector<NodeIndex>> sets;

  static NeighborhoodIndex build(const AlternativeGraph& g, int hops);
  bool contains(NodeIndex j, NodeIndex i) const;
};

/// Complete subgraph inside each nest, no edges across nests.
AlternativeGraph nests_to_graph(const NestStructure& nests, int num_nodes);

/// One pair nest per undirected edge. Throws DataError naming any isolated
/// node, since such an alternative would belong to no nest.
std::vector<Edge> scl_pair_nests(const AlternativeGraph& g);

/// Allocation weights alpha[i] keyed by neighbor j: 1/deg(i) each.
std::vector<std::map<NodeIndex, double>> equal_allocation(const AlternativeGraph& g);

/// Connected component labels (0-based, in order of lowest member).
std::vector<int> connected_components(const AlternativeGraph& g);

/// Gabriel graph of planar points: (i, j) is an edge when no other point lies
/// inside the circle with diameter ij. Planar and connected.
AlternativeGraph gabriel_graph(std::span<const std::pair<double, double>> points);

} // namespace gnndcm

#endif
