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

#ifndef GNNDCM_MODELS_LAYERS_HPP
#define GNNDCM_MODELS_LAYERS_HPP

#include "autodiff/tape.hpp"
#include "graph/graph.hpp"

namespace gnndcm {

/// Directed edge list over a block-diagonal batch: household b's copy of
/// alternative i is row b*V + i. Message e flows from src[e] to dst[e].
struct EdgeIndex {
  ad::IndexList src;
  ad::IndexList dst;
  Eigen::Index num_nodes = 0;

  std::size_t size() const { return src->size(); }
};

/// Both directions of every edge, plus (i, i) for each node when
/// `self_loops` is set.
EdgeIndex batch_edges(const AlternativeGraph& g, int batch, bool self_loops);

/// GCN edge weights 1/sqrt(d_i d_j) over an index built with self loops,
/// where d counts the node itself.
ad::Tensor gcn_coefficients(const AlternativeGraph& g, const EdgeIndex& edges);

// Update rules return the pre-activation; apply relu() or gated_skip().

/// W h_i + (aggregate over j in N(i)) W h_j. `edges` without self loops.
ad::Var mpnn_update(ad::Var h, ad::Var w, const EdgeIndex& edges, ad::Aggregation kind);

/// sum over j in N(i) + {i} of coef_ij W h_j. `edges` with self loops.
ad::Var gcn_update(ad::Var h, ad::Var w, const EdgeIndex& edges, const ad::Tensor& coef);

/// Multi-head attention over N(i) + {i}; heads of width h/heads are
/// concatenated. a_src, a_dst are h x 1: head k owns rows of its block.
ad::Var gat_update(ad::Var h, ad::Var w, ad::Var a_src, ad::Var a_dst, const EdgeIndex& edges, int heads,
                   double negative_slope = 0.2);

/// Attention weights (edges x heads) that gat_update would use; exposed
/// for tests.
ad::Var gat_attention(ad::Var h, ad::Var w, ad::Var a_src, ad::Var a_dst, const EdgeIndex& edges, int heads,
                      double negative_slope = 0.2);

/// relu((1 - c) h + c z), c = sigmoid(h Wc + bc).
ad::Var gated_skip(ad::Var h, ad::Var z, ad::Var wc, ad::Var bc);

} // namespace gnndcm

#endif
