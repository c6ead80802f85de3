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

#include "models/layers.hpp"

#include <cmath>

#include "common/error.hpp"

namespace gnndcm {

using namespace ad;

EdgeIndex batch_edges(const AlternativeGraph& g, int batch, bool self_loops) {
  const int v = g.num_nodes();
  std::vector<int> src, dst;
  const std::size_t per = 2 * g.num_edges() + (self_loops ? v : 0);
  src.reserve(per * batch);
  dst.reserve(per * batch);
  for (int b = 0; b < batch; ++b) {
    const int off = b * v;
    // Grouped by destination so each segment is contiguous.
    for (int i = 0; i < v; ++i) {
      if (self_loops) {
        src.push_back(off + i);
        dst.push_back(off + i);
      }
      for (int j : g.neighbors(i)) {
        src.push_back(off + j);
        dst.push_back(off + i);
      }
    }
  }
  return EdgeIndex{make_index(std::move(src)), make_index(std::move(dst)), static_cast<Eigen::Index>(v) * batch};
}

Tensor gcn_coefficients(const AlternativeGraph& g, const EdgeIndex& edges) {
  const int v = g.num_nodes();
  Tensor coef(static_cast<Eigen::Index>(edges.size()), 1);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double di = g.degree((*edges.dst)[e] % v) + 1.0;
    const double dj = g.degree((*edges.src)[e] % v) + 1.0;
    coef(static_cast<Eigen::Index>(e), 0) = 1.0 / std::sqrt(di * dj);
  }
  return coef;
}

Var mpnn_update(Var h, Var w, const EdgeIndex& edges, Aggregation kind) {
  auto wh = matmul(h, w);
  if (edges.size() == 0) return wh;
  auto agg = segment_aggregate(gather_rows(wh, edges.src), edges.dst, edges.num_nodes, kind);
  return add(wh, agg);
}

Var gcn_update(Var h, Var w, const EdgeIndex& edges, const Tensor& coef) {
  auto wh = matmul(h, w);
  auto msg = mul(gather_rows(wh, edges.src), h.tape->constant(coef));
  return segment_aggregate(msg, edges.dst, edges.num_nodes, Aggregation::sum);
}

namespace {

// h x heads indicator of which head owns each hidden unit.
Tensor head_blocks(Eigen::Index width, int heads) {
  if (heads < 1 || width % heads != 0)
    throw UsageError("hidden width " + std::to_string(width) + " is not divisible by " + std::to_string(heads) + " heads");
  const auto per = width / heads;
  Tensor s = Tensor::Zero(width, heads);
  for (Eigen::Index r = 0; r < width; ++r) s(r, r / per) = 1.0;
  return s;
}

Var attention(Var wh, Var a_src, Var a_dst, const EdgeIndex& edges, const Tensor& blocks, double slope) {
  auto& tape = *wh.tape;
  auto s = tape.constant(blocks);
  auto score_dst = matmul(wh, mul(a_dst, s)); // n x heads, a^T part applied to W h_i
  auto score_src = matmul(wh, mul(a_src, s)); // part applied to W h_j
  auto e = leaky_relu(add(gather_rows(score_dst, edges.dst), gather_rows(score_src, edges.src)), slope);
  auto lse = segment_aggregate(e, edges.dst, edges.num_nodes, Aggregation::lse);
  return exp(sub(e, gather_rows(lse, edges.dst)));
}

} // namespace

Var gat_attention(Var h, Var w, Var a_src, Var a_dst, const EdgeIndex& edges, int heads, double negative_slope) {
  auto wh = matmul(h, w);
  return attention(wh, a_src, a_dst, edges, head_blocks(wh.cols(), heads), negative_slope);
}

Var gat_update(Var h, Var w, Var a_src, Var a_dst, const EdgeIndex& edges, int heads, double negative_slope) {
  auto wh = matmul(h, w);
  const auto blocks = head_blocks(wh.cols(), heads);
  auto att = attention(wh, a_src, a_dst, edges, blocks, negative_slope);
  Tensor expand = blocks.transpose();
  auto weights = heads == 1 ? att : matmul(att, h.tape->constant(expand));
  auto msg = mul(gather_rows(wh, edges.src), weights);
  return segment_aggregate(msg, edges.dst, edges.num_nodes, Aggregation::sum);
}

Var gated_skip(Var h, Var z, Var wc, Var bc) {
  auto c = sigmoid(add(matmul(h, wc), bc));
  return relu(add(mul(one_minus(c), h), mul(c, z)));
}

} // namespace gnndcm
