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

#ifndef GNNDCM_AUTODIFF_TAPE_HPP
#define GNNDCM_AUTODIFF_TAPE_HPP

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "autodiff/tensor.hpp"

namespace gnndcm::ad {

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = std::numeric_limits<std::size_t>::max();

  bool valid() const { return tape != nullptr; }
  const Tensor& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

using IndexList = std::shared_ptr<const std::vector<int>>;

inline IndexList make_index(std::vector<int> v) { return std::make_shared<const std::vector<int>>(std::move(v)); }

/// Reverse-mode tape. Nodes are appended in evaluation order, so the vector
/// order is already topological; backward walks it once in reverse.
///
/// A tape has a single owner; separate tapes share nothing.
class Tape {
public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Var constant(Tensor value);
  Var leaf(Tensor value, bool requires_grad = true);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;

  /// Gradient of the last backward() target w.r.t. v; zeros when v did not
  /// participate.
  Tensor grad(Var v) const;

  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // Used by primitives.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn fn, const char* op);
  const Tensor& out_grad(std::size_t id) const { return grads_[id]; }
  void accumulate(Var target, const Tensor& g);
  void accumulate(Var target, Tensor&& g);
  bool wants_grad(Var v) const { return nodes_[v.id].requires_grad; }
  Var input(std::size_t id, std::size_t k) const { return nodes_[id].inputs[k]; }

private:
  struct Node {
    Tensor value;
    std::vector<Var> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    const char* op = "";
  };
  void check_owned(Var v) const;

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  bool has_grads_ = false;
};

enum class Aggregation { sum, mean, max, lse };

// Elementwise arithmetic. Operands broadcast when a dimension is 1.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var one_minus(Var a);

Var matmul(Var a, Var b);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);

Var relu(Var a);
Var leaky_relu(Var a, double negative_slope);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);

// Row-wise reductions; results are rows x 1 (logsumexp) or same shape.
Var logsumexp_rows(Var a);
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);

/// Rows of `a` selected by `index` (may repeat).
Var gather_rows(Var a, IndexList index);

/// Reduces message rows into `num_segments` rows; message e goes to
/// segment[e]. Empty segments give 0 for sum/mean/lse and throw for max.
Var segment_aggregate(Var messages, IndexList segment, Eigen::Index num_segments, Aggregation kind);

/// Inverted dropout; identity when `train` is false or rate is 0.
Var dropout(Var a, double rate, bool train, std::mt19937_64& rng);

/// out[r] = a[r, index[r]], shape rows x 1.
Var pick(Var a, IndexList index);

Var sum_all(Var a);

/// Scalar utility per row: h (n x k) times w (k x 1).
inline Var scalar_project(Var h, Var w) { return matmul(h, w); }

} // namespace gnndcm::ad

#endif
