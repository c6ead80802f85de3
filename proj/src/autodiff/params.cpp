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

#include "autodiff/params.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include "common/error.hpp"

namespace gnndcm::ad {

Var Binding::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw UsageError("parameter '" + name + "' is not bound");
  return it->second;
}

void ParamStore::add(const std::string& name, Tensor value, bool trainable, Reparam reparam) {
  if (params_.count(name)) throw UsageError("duplicate parameter name '" + name + "'");
  Param p;
  p.grad = Tensor::Zero(value.rows(), value.cols());
  p.value = std::move(value);
  p.trainable = trainable;
  p.reparam = reparam;
  params_.emplace(name, std::move(p));
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw UsageError("unknown parameter '" + name + "'");
  return it->second;
}

Param& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw UsageError("unknown parameter '" + name + "'");
  return it->second;
}

Binding ParamStore::bind(Tape& tape, bool track_grad) const {
  Binding b;
  for (const auto& [name, p] : params_) b.vars_.emplace(name, tape.leaf(p.value, track_grad && p.trainable));
  return b;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) p.grad.setZero();
}

void ParamStore::collect_grads(const Tape& tape, const Binding& binding) {
  for (auto& [name, p] : params_) {
    if (!p.trainable) continue;
    p.grad += tape.grad(binding[name]);
  }
}

std::size_t ParamStore::num_trainable() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_)
    if (p.trainable) n += static_cast<std::size_t>(p.value.size());
  return n;
}

std::vector<double> ParamStore::flat_values() const {
  std::vector<double> out;
  out.reserve(num_trainable());
  for (const auto& [_, p] : params_)
    if (p.trainable) out.insert(out.end(), p.value.data(), p.value.data() + p.value.size());
  return out;
}

std::vector<double> ParamStore::flat_grads() const {
  std::vector<double> out;
  out.reserve(num_trainable());
  for (const auto& [_, p] : params_)
    if (p.trainable) out.insert(out.end(), p.grad.data(), p.grad.data() + p.grad.size());
  return out;
}

void ParamStore::set_flat_values(const std::vector<double>& v) {
  if (v.size() != num_trainable()) throw UsageError("flat parameter vector has wrong length");
  std::size_t at = 0;
  for (auto& [_, p] : params_) {
    if (!p.trainable) continue;
    std::memcpy(p.value.data(), v.data() + at, sizeof(double) * static_cast<std::size_t>(p.value.size()));
    at += static_cast<std::size_t>(p.value.size());
  }
}

namespace {

constexpr char kMagic[8] = {'G', 'D', 'C', 'M', 'P', 'A', 'R', '1'};

template <class T>
void put(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  // Stored little-endian; hosts we build on are little-endian.
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw DataError("truncated parameter payload");
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

} // namespace

void ParamStore::write(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint64_t>(out, params_.size());
  for (const auto& [name, p] : params_) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint8_t>(out, p.trainable ? 1 : 0);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(p.reparam));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.cols()));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) put<double>(out, p.value.data()[i]);
  }
}

ParamStore ParamStore::read(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a parameter payload (bad magic)");
  }
  ParamStore store;
  const auto count = get<std::uint64_t>(in);
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto len = get<std::uint32_t>(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw DataError("truncated parameter name");
    const bool trainable = get<std::uint8_t>(in) != 0;
    const auto reparam = static_cast<Reparam>(get<std::uint8_t>(in));
    const auto rows = static_cast<Eigen::Index>(get<std::uint64_t>(in));
    const auto cols = static_cast<Eigen::Index>(get<std::uint64_t>(in));
    Tensor value(rows, cols);
    for (Eigen::Index i = 0; i < value.size(); ++i) value.data()[i] = get<double>(in);
    store.add(name, std::move(value), trainable, reparam);
  }
  return store;
}

Tensor glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Tensor t(fan_in, fan_out);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = u(rng);
  return t;
}

} // namespace gnndcm::ad
