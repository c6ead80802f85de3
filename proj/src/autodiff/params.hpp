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

#ifndef GNNDCM_AUTODIFF_PARAMS_HPP
#define GNNDCM_AUTODIFF_PARAMS_HPP

#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "autodiff/tape.hpp"

namespace gnndcm::ad {

/// How a stored value maps to the quantity the model uses.
enum class Reparam { none, sigmoid };

struct Param {
  Tensor value;
  Tensor grad;
  bool trainable = true;
  Reparam reparam = Reparam::none;
};

/// Variables bound on a tape for one forward pass.
class Binding {
public:
  Var operator[](const std::string& name) const;
  bool has(const std::string& name) const { return vars_.count(name) != 0; }

private:
  friend class ParamStore;
  std::map<std::string, Var> vars_;
};

/// Named trainable parameters. Ordered by name, so flattening and
/// serialization are deterministic.
class ParamStore {
public:
  void add(const std::string& name, Tensor value, bool trainable = true, Reparam reparam = Reparam::none);
  bool has(const std::string& name) const { return params_.count(name) != 0; }
  const Param& at(const std::string& name) const;
  Param& at(const std::string& name);
  const std::map<std::string, Param>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }

  /// Records every parameter as a leaf; trainable ones require gradients
  /// when `track_grad` is set.
  Binding bind(Tape& tape, bool track_grad) const;

  void zero_grad();
  /// Adds d(loss)/d(param) from a finished backward pass.
  void collect_grads(const Tape& tape, const Binding& binding);

  // Flat views over trainable parameters, in name order.
  std::size_t num_trainable() const;
  std::vector<double> flat_values() const;
  std::vector<double> flat_grads() const;
  void set_flat_values(const std::vector<double>& v);

  /// Binary layout (little-endian):
  ///   "GDCMPAR1" | u64 count | per entry: u32 name_len, name bytes,
  ///   u8 trainable, u8 reparam, u64 rows, u64 cols, rows*cols f64 row-major.
  void write(std::ostream& out) const;
  static ParamStore read(std::istream& in);

private:
  std::map<std::string, Param> params_;
};

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, std::mt19937_64& rng);

} // namespace gnndcm::ad

#endif
