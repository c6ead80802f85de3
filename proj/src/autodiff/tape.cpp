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

#include "autodiff/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "common/error.hpp"

namespace gnndcm::ad {

const Tensor& Var::value() const { return tape->value(*this); }

void Tape::check_owned(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) throw UsageError("variable does not belong to this tape");
}

Var Tape::constant(Tensor value) { return record(std::move(value), {}, nullptr, "constant"); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  auto v = record(std::move(value), {}, nullptr, "leaf");
  nodes_[v.id].requires_grad = requires_grad;
  return v;
}

const Tensor& Tape::value(Var v) const {
  check_owned(v);
  return nodes_[v.id].value;
}

bool Tape::requires_grad(Var v) const {
  check_owned(v);
  return nodes_[v.id].requires_grad;
}

Tensor Tape::grad(Var v) const {
  check_owned(v);
  const auto& n = nodes_[v.id];
  if (!has_grads_ || grads_[v.id].size() == 0) return Tensor::Zero(n.value.rows(), n.value.cols());
  return grads_[v.id];
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn fn, const char* op) {
  if (!value.allFinite()) throw NumericalError(std::string("non-finite output in ") + op);
  Node n;
  n.requires_grad = false;
  for (auto in : inputs) {
    check_owned(in);
    if (nodes_[in.id].requires_grad) n.requires_grad = true;
  }
  n.value = std::move(value);
  n.inputs = std::move(inputs);
  n.backward = n.requires_grad ? std::move(fn) : nullptr;
  n.op = op;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

void Tape::accumulate(Var target, const Tensor& g) {
  if (!nodes_[target.id].requires_grad) return;
  auto& slot = grads_[target.id];
  if (slot.size() == 0) slot = g;
  else slot += g;
}

void Tape::accumulate(Var target, Tensor&& g) {
  if (!nodes_[target.id].requires_grad) return;
  auto& slot = grads_[target.id];
  if (slot.size() == 0) slot = std::move(g);
  else slot += g;
}

void Tape::backward(Var loss) {
  if (!loss.valid() || loss.tape != this || loss.id >= nodes_.size()) {
    throw UsageError("backward called on a variable with no recorded forward pass");
  }
  const auto& v = nodes_[loss.id].value;
  if (v.rows() != 1 || v.cols() != 1) throw UsageError("backward requires a scalar loss");
  grads_.assign(nodes_.size(), Tensor());
  has_grads_ = true;
  if (!nodes_[loss.id].requires_grad) return;
  grads_[loss.id] = Tensor::Ones(1, 1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.backward || grads_[i].size() == 0) continue;
    n.backward(*this, i);
  }
}

namespace {

Eigen::Index broadcast_dim(Eigen::Index a, Eigen::Index b, const char* op) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  throw UsageError(std::string("shape mismatch in ") + op);
}

// Expands x to rows x cols by repeating singleton dimensions.
Tensor expand(const Tensor& x, Eigen::Index rows, Eigen::Index cols) {
  if (x.rows() == rows && x.cols() == cols) return x;
  if (x.rows() == 1 && x.cols() == 1) return Tensor::Constant(rows, cols, x(0, 0));
  if (x.rows() == 1) return x.replicate(rows, 1);
  return x.replicate(1, cols);
}

// Sums g over the dimensions along which a shape was broadcast.
Tensor reduce_to(const Tensor& g, Eigen::Index rows, Eigen::Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  Tensor r = g;
  if (rows == 1 && r.rows() != 1) r = r.colwise().sum().eval();
  if (cols == 1 && r.cols() != 1) r = r.rowwise().sum().eval();
  return r;
}

// Applies f elementwise over the broadcast of x and y without
// materializing expanded copies for the common shapes.
template <class F>
Tensor broadcast_apply(const Tensor& x, const Tensor& y, const char* op, F f) {
  const auto r = broadcast_dim(x.rows(), y.rows(), op);
  const auto c = broadcast_dim(x.cols(), y.cols(), op);
  if (x.rows() == r && x.cols() == c) {
    if (y.rows() == r && y.cols() == c) return f(x.array(), y.array()).matrix();
    if (y.size() == 1) return f(x.array(), Tensor::Constant(r, c, y(0, 0)).array()).matrix();
    if (y.rows() == 1) {
      Tensor out(r, c);
      for (Eigen::Index i = 0; i < r; ++i) out.row(i) = f(x.row(i).array(), y.row(0).array()).matrix();
      return out;
    }
  }
  return f(expand(x, r, c).array(), expand(y, r, c).array()).matrix();
}

// Accumulates g into a broadcast operand, summing expanded dimensions.
void accumulate_reduced(Tape& tp, Var target, const Tensor& g) {
  if (!tp.wants_grad(target)) return;
  if (g.rows() == target.rows() && g.cols() == target.cols()) tp.accumulate(target, g);
  else tp.accumulate(target, reduce_to(g, target.rows(), target.cols()));
}

} // namespace

Var add(Var a, Var b) {
  Tensor out = broadcast_apply(a.value(), b.value(), "add", [](const auto& x, const auto& y) { return x + y; });
  return a.tape->record(std::move(out), {a, b}, [](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    accumulate_reduced(tp, tp.input(self, 0), g);
    accumulate_reduced(tp, tp.input(self, 1), g);
  }, "add");
}

Var sub(Var a, Var b) {
  Tensor out = broadcast_apply(a.value(), b.value(), "sub", [](const auto& x, const auto& y) { return x - y; });
  return a.tape->record(std::move(out), {a, b}, [](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    accumulate_reduced(tp, tp.input(self, 0), g);
    if (tp.wants_grad(tp.input(self, 1))) accumulate_reduced(tp, tp.input(self, 1), Tensor(-g));
  }, "sub");
}

Var mul(Var a, Var b) {
  Tensor out = broadcast_apply(a.value(), b.value(), "mul", [](const auto& x, const auto& y) { return x * y; });
  return a.tape->record(std::move(out), {a, b}, [](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    auto a = tp.input(self, 0), b = tp.input(self, 1);
    if (tp.wants_grad(a))
      accumulate_reduced(tp, a, broadcast_apply(g, b.value(), "mul", [](const auto& x, const auto& y) { return x * y; }));
    if (tp.wants_grad(b))
      accumulate_reduced(tp, b, broadcast_apply(g, a.value(), "mul", [](const auto& x, const auto& y) { return x * y; }));
  }, "mul");
}

Var div(Var a, Var b) {
  Tensor out = broadcast_apply(a.value(), b.value(), "div", [](const auto& x, const auto& y) { return x / y; });
  return a.tape->record(std::move(out), {a, b}, [](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    auto a = tp.input(self, 0), b = tp.input(self, 1);
    const auto& q = tp.value(Var{&tp, self});
    if (tp.wants_grad(a))
      accumulate_reduced(tp, a, broadcast_apply(g, b.value(), "div", [](const auto& x, const auto& y) { return x / y; }));
    if (tp.wants_grad(b)) {
      // d(x/y)/dy = -(x/y) / y
      Tensor gq = -g.cwiseProduct(q);
      accumulate_reduced(tp, b, broadcast_apply(gq, b.value(), "div", [](const auto& x, const auto& y) { return x / y; }));
    }
  }, "div");
}

Var scale(Var a, double s) {
  return a.tape->record(a.value() * s, {a}, [s](Tape& tp, std::size_t self) {
    tp.accumulate(tp.input(self, 0), Tensor(tp.out_grad(self) * s));
  }, "scale");
}

Var add_scalar(Var a, double s) {
  return a.tape->record(a.value().array() + s, {a}, [](Tape& tp, std::size_t self) {
    tp.accumulate(tp.input(self, 0), tp.out_grad(self));
  }, "add_scalar");
}

Var one_minus(Var a) { return add_scalar(scale(a, -1.0), 1.0); }

Var matmul(Var a, Var b) {
  const auto& x = a.value();
  const auto& y = b.value();
  if (x.cols() != y.rows()) {
    throw UsageError("shape mismatch in matmul: " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                     " * " + std::to_string(y.rows()) + "x" + std::to_string(y.cols()));
  }
  Tensor out = x * y;
  return a.tape->record(std::move(out), {a, b}, [](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    auto a = tp.input(self, 0), b = tp.input(self, 1);
    if (tp.wants_grad(a)) tp.accumulate(a, Tensor(g * b.value().transpose()));
    if (tp.wants_grad(b)) tp.accumulate(b, Tensor(a.value().transpose() * g));
  }, "matmul");
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat of zero tensors");
  const auto rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (auto p : parts) {
    if (p.rows() != rows) throw UsageError("shape mismatch in concat_cols");
    cols += p.cols();
  }
  Tensor out(rows, cols);
  Eigen::Index at = 0;
  for (auto p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape->record(std::move(out), std::move(inputs), [](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    Eigen::Index at = 0;
    for (std::size_t k = 0;; ++k) {
      if (at >= g.cols()) break;
      auto in = tp.input(self, k);
      if (tp.wants_grad(in)) tp.accumulate(in, Tensor(g.middleCols(at, in.cols())));
      at += in.cols();
    }
  }, "concat_cols");
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw UsageError("slice_cols out of range");
  Tensor out = a.value().middleCols(start, count);
  return a.tape->record(std::move(out), {a}, [start, count](Tape& tp, std::size_t self) {
    auto in = tp.input(self, 0);
    Tensor g = Tensor::Zero(in.rows(), in.cols());
    g.middleCols(start, count) = tp.out_grad(self);
    tp.accumulate(in, std::move(g));
  }, "slice_cols");
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) throw UsageError("reshape changes element count");
  Tensor out = Eigen::Map<const Tensor>(a.value().data(), rows, cols);
  return a.tape->record(std::move(out), {a}, [](Tape& tp, std::size_t self) {
    auto in = tp.input(self, 0);
    const auto& g = tp.out_grad(self);
    tp.accumulate(in, Tensor(Eigen::Map<const Tensor>(g.data(), in.rows(), in.cols())));
  }, "reshape");
}

Var relu(Var a) {
  Tensor out = a.value().cwiseMax(0.0);
  return a.tape->record(std::move(out), {a}, [](Tape& tp, std::size_t self) {
    auto in = tp.input(self, 0);
    Tensor g = (in.value().array() > 0.0).select(tp.out_grad(self), 0.0);
    tp.accumulate(in, std::move(g));
  }, "relu");
}

Var leaky_relu(Var a, double slope) {
  Tensor out = (a.value().array() > 0.0).select(a.value(), a.value() * slope);
  return a.tape->record(std::move(out), {a}, [slope](Tape& tp, std::size_t self) {
    auto in = tp.input(self, 0);
    const auto& g = tp.out_grad(self);
    Tensor gi = (in.value().array() > 0.0).select(g, g * slope);
    tp.accumulate(in, std::move(gi));
  }, "leaky_relu");
}

Var sigmoid(Var a) {
  Tensor out = a.value().unaryExpr([](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return a.tape->record(std::move(out), {a}, [](Tape& tp, std::size_t self) {
    const auto& s = tp.value(Var{&tp, self});
    Tensor g = tp.out_grad(self).array() * s.array() * (1.0 - s.array());
    tp.accumulate(tp.input(self, 0), std::move(g));
  }, "sigmoid");
}

Var exp(Var a) {
  Tensor out = a.value().array().exp();
  return a.tape->record(std::move(out), {a}, [](Tape& tp, std::size_t self) {
    Tensor g = tp.out_grad(self).cwiseProduct(tp.value(Var{&tp, self}));
    tp.accumulate(tp.input(self, 0), std::move(g));
  }, "exp");
}

Var log(Var a) {
  if ((a.value().array() <= 0.0).any()) throw NumericalError("log of a non-positive value");
  Tensor out = a.value().array().log();
  return a.tape->record(std::move(out), {a}, [](Tape& tp, std::size_t self) {
    auto in = tp.input(self, 0);
    tp.accumulate(in, Tensor(tp.out_grad(self).cwiseQuotient(in.value())));
  }, "log");
}

namespace {

Tensor row_lse(const Tensor& x) {
  Tensor out(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    out(r, 0) = m + std::log((x.row(r).array() - m).exp().sum());
  }
  return out;
}

} // namespace

Var logsumexp_rows(Var a) {
  if (a.cols() == 0) throw UsageError("logsumexp over an empty row");
  return a.tape->record(row_lse(a.value()), {a}, [](Tape& tp, std::size_t self) {
    auto in = tp.input(self, 0);
    const auto& lse = tp.value(Var{&tp, self});
    Tensor p = (in.value().colwise() - lse.col(0)).array().exp();
    Tensor g = p.array().colwise() * tp.out_grad(self).col(0).array();
    tp.accumulate(in, std::move(g));
  }, "logsumexp_rows");
}

Var log_softmax_rows(Var a) {
  if (a.cols() == 0) throw UsageError("log_softmax over an empty row");
  Tensor out = a.value().colwise() - row_lse(a.value()).col(0);
  return a.tape->record(std::move(out), {a}, [](Tape& tp, std::size_t self) {
    const auto& y = tp.value(Var{&tp, self});
    const auto& g = tp.out_grad(self);
    Tensor p = y.array().exp();
    Tensor gi = g - (p.array().colwise() * g.rowwise().sum().array()).matrix();
    tp.accumulate(tp.input(self, 0), std::move(gi));
  }, "log_softmax_rows");
}

Var softmax_rows(Var a) {
  if (a.cols() == 0) throw UsageError("softmax over an empty row");
  Tensor out = (a.value().colwise() - row_lse(a.value()).col(0)).array().exp();
  return a.tape->record(std::move(out), {a}, [](Tape& tp, std::size_t self) {
    const auto& p = tp.value(Var{&tp, self});
    const auto& g = tp.out_grad(self);
    Tensor dot = g.cwiseProduct(p).rowwise().sum();
    Tensor gi = p.array() * (g.colwise() - dot.col(0)).array();
    tp.accumulate(tp.input(self, 0), std::move(gi));
  }, "softmax_rows");
}

Var gather_rows(Var a, IndexList index) {
  const auto& x = a.value();
  const auto& idx = *index;
  Tensor out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t e = 0; e < idx.size(); ++e) {
    if (idx[e] < 0 || idx[e] >= x.rows()) throw UsageError("gather index out of range");
    out.row(static_cast<Eigen::Index>(e)) = x.row(idx[e]);
  }
  return a.tape->record(std::move(out), {a}, [index](Tape& tp, std::size_t self) {
    auto in = tp.input(self, 0);
    const auto& g = tp.out_grad(self);
    Tensor gi = Tensor::Zero(in.rows(), in.cols());
    const auto& idx = *index;
    for (std::size_t e = 0; e < idx.size(); ++e) gi.row(idx[e]) += g.row(static_cast<Eigen::Index>(e));
    tp.accumulate(in, std::move(gi));
  }, "gather_rows");
}

Var segment_aggregate(Var messages, IndexList segment, Eigen::Index num_segments, Aggregation kind) {
  const auto& m = messages.value();
  const auto& seg = *segment;
  if (static_cast<Eigen::Index>(seg.size()) != m.rows()) throw UsageError("segment list length != message rows");
  for (auto s : seg)
    if (s < 0 || s >= num_segments) throw UsageError("segment index out of range");
  const auto cols = m.cols();
  std::vector<int> count(num_segments, 0);
  for (auto s : seg) ++count[s];
  Tensor out = Tensor::Zero(num_segments, cols);

  switch (kind) {
  case Aggregation::sum:
  case Aggregation::mean:
    for (std::size_t e = 0; e < seg.size(); ++e) out.row(seg[e]) += m.row(static_cast<Eigen::Index>(e));
    if (kind == Aggregation::mean) {
      for (Eigen::Index s = 0; s < num_segments; ++s)
        if (count[s] > 0) out.row(s) /= count[s];
    }
    break;
  case Aggregation::max: {
    for (Eigen::Index s = 0; s < num_segments; ++s) {
      if (count[s] == 0) throw UsageError("max aggregation over an empty neighbor set (node " + std::to_string(s) + ")");
    }
    out.setConstant(-std::numeric_limits<double>::infinity());
    for (std::size_t e = 0; e < seg.size(); ++e)
      out.row(seg[e]) = out.row(seg[e]).cwiseMax(m.row(static_cast<Eigen::Index>(e)));
    break;
  }
  case Aggregation::lse: {
    Tensor mx = Tensor::Constant(num_segments, cols, -std::numeric_limits<double>::infinity());
    for (std::size_t e = 0; e < seg.size(); ++e)
      mx.row(seg[e]) = mx.row(seg[e]).cwiseMax(m.row(static_cast<Eigen::Index>(e)));
    for (std::size_t e = 0; e < seg.size(); ++e)
      out.row(seg[e]) += (m.row(static_cast<Eigen::Index>(e)) - mx.row(seg[e])).array().exp().matrix();
    for (Eigen::Index s = 0; s < num_segments; ++s) {
      if (count[s] == 0) out.row(s).setZero();
      else out.row(s) = (mx.row(s).array() + out.row(s).array().log()).matrix();
    }
    break;
  }
  }

  return messages.tape->record(std::move(out), {messages}, [segment, kind, count](Tape& tp, std::size_t self) {
    auto in = tp.input(self, 0);
    const auto& m = in.value();
    const auto& g = tp.out_grad(self);
    const auto& y = tp.value(Var{&tp, self});
    const auto& seg = *segment;
    Tensor gi(m.rows(), m.cols());
    switch (kind) {
    case Aggregation::sum:
      for (std::size_t e = 0; e < seg.size(); ++e) gi.row(static_cast<Eigen::Index>(e)) = g.row(seg[e]);
      break;
    case Aggregation::mean:
      for (std::size_t e = 0; e < seg.size(); ++e) gi.row(static_cast<Eigen::Index>(e)) = g.row(seg[e]) / count[seg[e]];
      break;
    case Aggregation::max: {
      gi.setZero();
      // Ties route the gradient to the first maximizing message.
      std::vector<std::vector<char>> taken(y.rows(), std::vector<char>(static_cast<std::size_t>(m.cols()), 0));
      for (std::size_t e = 0; e < seg.size(); ++e) {
        const auto s = seg[e];
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
          if (!taken[s][c] && m(static_cast<Eigen::Index>(e), c) == y(s, c)) {
            gi(static_cast<Eigen::Index>(e), c) = g(s, c);
            taken[s][c] = 1;
          }
        }
      }
      break;
    }
    case Aggregation::lse:
      for (std::size_t e = 0; e < seg.size(); ++e) {
        const auto r = static_cast<Eigen::Index>(e);
        gi.row(r) = g.row(seg[e]).array() * (m.row(r) - y.row(seg[e])).array().exp();
      }
      break;
    }
    tp.accumulate(in, std::move(gi));
  }, "segment_aggregate");
}

Var dropout(Var a, double rate, bool train, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw UsageError("dropout rate must be in [0,1)");
  if (!train || rate == 0.0) return a;
  const double keep = 1.0 - rate;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto mask = std::make_shared<Tensor>(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask->size(); ++i) mask->data()[i] = u(rng) < keep ? 1.0 / keep : 0.0;
  Tensor out = a.value().cwiseProduct(*mask);
  return a.tape->record(std::move(out), {a}, [mask](Tape& tp, std::size_t self) {
    tp.accumulate(tp.input(self, 0), Tensor(tp.out_grad(self).cwiseProduct(*mask)));
  }, "dropout");
}

Var pick(Var a, IndexList index) {
  const auto& x = a.value();
  const auto& idx = *index;
  if (static_cast<Eigen::Index>(idx.size()) != x.rows()) throw UsageError("pick needs one index per row");
  Tensor out(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    if (idx[r] < 0 || idx[r] >= x.cols()) throw UsageError("pick index out of range");
    out(r, 0) = x(r, idx[r]);
  }
  return a.tape->record(std::move(out), {a}, [index](Tape& tp, std::size_t self) {
    auto in = tp.input(self, 0);
    const auto& g = tp.out_grad(self);
    Tensor gi = Tensor::Zero(in.rows(), in.cols());
    for (Eigen::Index r = 0; r < gi.rows(); ++r) gi(r, (*index)[r]) = g(r, 0);
    tp.accumulate(in, std::move(gi));
  }, "pick");
}

Var sum_all(Var a) {
  Tensor out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape->record(std::move(out), {a}, [](Tape& tp, std::size_t self) {
    auto in = tp.input(self, 0);
    tp.accumulate(in, Tensor(Tensor::Constant(in.rows(), in.cols(), tp.out_grad(self)(0, 0))));
  }, "sum_all");
}

} // namespace gnndcm::ad
