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
#include <random>
#include <sstream>

#include "autodiff/params.hpp"
#include "autodiff/tape.hpp"
#include "common/error.hpp"
#include "doctest.h"

using namespace gnndcm;
using namespace gnndcm::ad;

namespace {

Tensor row(std::initializer_list<double> v) {
  Tensor t(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) t(0, k++) = x;
  return t;
}

Tensor random_tensor(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Tensor t(r, c);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = z(rng);
  return t;
}

// Central-difference check of d sum(f(x) * weights) / dx.
template <class F>
double fd_check(F f, Tensor x, std::mt19937_64& rng) {
  Tape tape;
  auto xv = tape.leaf(x);
  auto y = f(xv);
  const Tensor wts = random_tensor(y.rows(), y.cols(), rng);
  auto loss = sum_all(mul(y, tape.constant(wts)));
  tape.backward(loss);
  const Tensor g = tape.grad(xv);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    auto eval = [&](double d) {
      Tape t2;
      Tensor xp = x;
      xp.data()[k] += d;
      auto out = f(t2.leaf(xp, false));
      return (t2.value(out).array() * wts.array()).sum();
    };
    const double h = 1e-6;
    const double fd = (eval(h) - eval(-h)) / (2 * h);
    worst = std::max(worst, std::abs(fd - g.data()[k]) / (std::abs(fd) + 1e-3));
  }
  return worst;
}

} // namespace

TEST_CASE("logsumexp and softmax identities") {
  Tape t;
  auto x = t.constant(row({0.0, 0.0}));
  CHECK(t.value(logsumexp_rows(x))(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  for (double a : {-1000.0, 0.0, 3.0, 800.0}) {
    auto s = softmax_rows(t.constant(row({a, a, a})));
    for (int k = 0; k < 3; ++k) CHECK(t.value(s)(0, k) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("logsumexp bounds and softmax normalization on random rows") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    Tape t;
    const Tensor x = random_tensor(4, 7, rng) * 10.0;
    auto l = t.value(logsumexp_rows(t.constant(x)));
    auto s = t.value(softmax_rows(t.constant(x)));
    for (int r = 0; r < 4; ++r) {
      const double mx = x.row(r).maxCoeff();
      CHECK(l(r, 0) >= mx);
      CHECK(l(r, 0) <= mx + std::log(7.0) + 1e-12);
      CHECK(std::abs(s.row(r).sum() - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("segment aggregation") {
  Tape t;
  Tensor m(2, 1);
  m << 2.0, 5.0;
  auto seg = make_index({1, 1});
  auto msgs = t.constant(m);
  CHECK(t.value(segment_aggregate(msgs, make_index({0, 0}), 1, Aggregation::max))(0, 0) == 5.0);
  CHECK(t.value(segment_aggregate(msgs, seg, 3, Aggregation::sum))(1, 0) == 7.0);
  CHECK(t.value(segment_aggregate(msgs, seg, 3, Aggregation::mean))(1, 0) == 3.5);
  CHECK(t.value(segment_aggregate(msgs, seg, 3, Aggregation::lse))(1, 0) ==
        doctest::Approx(std::log(std::exp(2.0) + std::exp(5.0))));
  // Empty segments: 0 for sum, mean and lse; an error for max.
  CHECK(t.value(segment_aggregate(msgs, seg, 3, Aggregation::sum))(0, 0) == 0.0);
  CHECK(t.value(segment_aggregate(msgs, seg, 3, Aggregation::mean))(2, 0) == 0.0);
  CHECK(t.value(segment_aggregate(msgs, seg, 3, Aggregation::lse))(0, 0) == 0.0);
  CHECK_THROWS(segment_aggregate(msgs, seg, 3, Aggregation::max));
}

TEST_CASE("linear loss gradient") {
  Tape t;
  auto x = t.constant(row({1.0, 2.0}));
  auto w = t.leaf(row({3.0, 4.0}));
  t.backward(sum_all(mul(w, x)));
  CHECK(t.grad(w)(0, 0) == 1.0);
  CHECK(t.grad(w)(0, 1) == 2.0);
}

TEST_CASE("primitive gradients match central differences") {
  std::mt19937_64 rng(5);
  const Tensor b = random_tensor(3, 4, rng);
  const Tensor w = random_tensor(4, 2, rng);
  const Tensor r = random_tensor(1, 4, rng);
  auto seg = make_index({0, 2, 2, 1, 0});
  auto gat = make_index({2, 0, 1, 1, 2});
  CHECK(fd_check([&](Var x) { return add(x, x.tape->constant(b)); }, random_tensor(3, 4, rng), rng) < 1e-7);
  CHECK(fd_check([&](Var x) { return add(x, x.tape->constant(r)); }, random_tensor(3, 4, rng), rng) < 1e-7);
  CHECK(fd_check([&](Var x) { return mul(x, x.tape->constant(r)); }, random_tensor(3, 4, rng), rng) < 1e-7);
  CHECK(fd_check([&](Var x) { return mul(x.tape->constant(b), x); }, random_tensor(1, 4, rng), rng) < 1e-7);
  CHECK(fd_check([&](Var x) { return div(x.tape->constant(b), add_scalar(exp(x), 0.5)); }, random_tensor(3, 4, rng), rng) <
        1e-7);
  CHECK(fd_check([&](Var x) { return matmul(x, x.tape->constant(w)); }, random_tensor(3, 4, rng), rng) < 1e-7);
  CHECK(fd_check([&](Var x) { return matmul(x.tape->constant(b), x); }, random_tensor(4, 2, rng), rng) < 1e-7);
  CHECK(fd_check([&](Var x) { return sigmoid(x); }, random_tensor(3, 4, rng), rng) < 1e-7);
  CHECK(fd_check([&](Var x) { return log(add_scalar(exp(x), 1.0)); }, random_tensor(3, 4, rng), rng) < 1e-7);
  CHECK(fd_check([&](Var x) { return leaky_relu(x, 0.2); }, random_tensor(3, 4, rng), rng) < 1e-7);
  CHECK(fd_check([&](Var x) { return relu(x); }, random_tensor(3, 4, rng), rng) < 1e-7);
  CHECK(fd_check([&](Var x) { return logsumexp_rows(x); }, random_tensor(3, 4, rng), rng) < 1e-7);
  CHECK(fd_check([&](Var x) { return softmax_rows(x); }, random_tensor(3, 4, rng), rng) < 1e-7);
  CHECK(fd_check([&](Var x) { return log_softmax_rows(x); }, random_tensor(3, 4, rng), rng) < 1e-7);
  CHECK(fd_check([&](Var x) { return gather_rows(x, gat); }, random_tensor(3, 4, rng), rng) < 1e-7);
  CHECK(fd_check([&](Var x) { return pick(x, make_index({3, 0, 2})); }, random_tensor(3, 4, rng), rng) < 1e-7);
  for (auto kind : {Aggregation::sum, Aggregation::mean, Aggregation::max, Aggregation::lse})
    CHECK(fd_check([&](Var x) { return segment_aggregate(x, seg, 3, kind); }, random_tensor(5, 2, rng), rng) < 1e-7);
  CHECK(fd_check(
            [&](Var x) {
              Var ps[] = {x, scale(x, 2.0), one_minus(x)};
              return slice_cols(concat_cols(ps), 1, 4);
            },
            random_tensor(3, 2, rng), rng) < 1e-7);
  CHECK(fd_check([&](Var x) { return reshape(x, 2, 6); }, random_tensor(3, 4, rng), rng) < 1e-7);
}

TEST_CASE("dropout: identity in eval mode, seeded masks in train mode") {
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor(5, 6, rng);
  {
    Tape t;
    auto a = t.leaf(x);
    std::mt19937_64 r1(3);
    auto y = dropout(a, 0.5, false, r1);
    CHECK(t.value(y) == x);
    t.backward(sum_all(y));
    CHECK(t.grad(a) == Tensor::Ones(5, 6));
  }
  Tensor first, second;
  for (Tensor* out : {&first, &second}) {
    Tape t;
    std::mt19937_64 r(7);
    *out = t.value(dropout(t.constant(x), 0.5, true, r));
  }
  CHECK(first == second);
  CHECK(first != x);
}

TEST_CASE("backward visits a shared node once") {
  Tape t;
  auto x = t.leaf(row({2.0}));
  auto y = mul(x, x); // both inputs are the same node
  auto z = add(y, y);
  t.backward(sum_all(z));
  CHECK(t.grad(x)(0, 0) == doctest::Approx(8.0));
}

TEST_CASE("param store: flat views, binding, serialization") {
  ParamStore p;
  p.add("b", row({1.0, -2.0}));
  p.add("theta", row({0.0}), true, Reparam::sigmoid);
  auto flat = p.flat_values();
  CHECK(flat.size() == 3);
  flat[0] = 9.0;
  p.set_flat_values(flat);
  CHECK(p.at("b").value(0, 0) == 9.0);
  Tape t;
  auto bind = p.bind(t, true);
  // Bindings expose the unconstrained value; models apply the transform.
  CHECK(t.value(bind["theta"])(0, 0) == 0.0);
  CHECK(p.at("theta").reparam == Reparam::sigmoid);
  std::stringstream ss;
  p.write(ss);
  auto q = ParamStore::read(ss);
  CHECK(q.flat_values() == p.flat_values());
}

TEST_CASE("glorot bounds") {
  std::mt19937_64 rng(1);
  const auto w = glorot_uniform(30, 10, rng);
  const double bound = std::sqrt(6.0 / 40.0);
  CHECK(w.maxCoeff() <= bound);
  CHECK(w.minCoeff() >= -bound);
  CHECK(w.maxCoeff() > 0.5 * bound);
}
