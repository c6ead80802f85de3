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

#include "interpret/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "common/csv.hpp"
#include "common/error.hpp"

namespace gnndcm {

const char* hop_class_name(HopClass c) {
  switch (c) {
  case HopClass::self: return "self";
  case HopClass::within: return "within";
  case HopClass::outside: return "outside";
  }
  return "?";
}

namespace {

void check_indices(const ChoiceDataset& ds, int n, int j) {
  if (n < 0 || n >= ds.num_households) throw UsageError("household index out of range");
  if (j < 0 || j >= ds.num_alternatives) throw UsageError("alternative index out of range");
}

std::vector<double> with_value(const ChoiceDataset& ds, int n, int j, int d, double original) {
  auto h = ds.household(n);
  std::vector<double> block(h.begin(), h.end());
  block[static_cast<std::size_t>(j) * ds.num_features + d] = ds.to_model(d, original);
  return block;
}

} // namespace

ElasticityReport elasticity(const ChoiceModel& model, const ChoiceDataset& ds, int n, int j, const std::string& attribute,
                            ElasticityMode mode, double relative_step) {
  check_indices(ds, n, j);
  if (!(relative_step > 0.0)) throw UsageError("finite-difference step must be positive");
  const int d = ds.feature_index(attribute);
  ElasticityReport r;
  r.household = n;
  r.target = j;
  r.attribute = attribute;
  r.mode = mode;
  r.hops = model.receptive_hops();
  r.attribute_value = ds.original_feature(n, j, d);
  double delta = 0.0;
  if (mode == ElasticityMode::relative) {
    if (r.attribute_value == 0.0)
      throw UsageError("attribute '" + attribute + "' of alternative " + std::to_string(j) +
                       " is zero, so its relative elasticity is undefined; use the semi-elasticity mode");
    delta = relative_step * std::abs(r.attribute_value);
  } else {
    delta = relative_step * ds.scale_sd[d];
  }
  const auto h = ds.household(n);
  r.probabilities = model.probabilities(h);
  const auto up = model.probabilities(with_value(ds, n, j, d, r.attribute_value + delta));
  const auto down = model.probabilities(with_value(ds, n, j, d, r.attribute_value - delta));
  const int v = ds.num_alternatives;
  r.values.resize(v);
  const double factor = mode == ElasticityMode::relative ? r.attribute_value : 1.0;
  for (int i = 0; i < v; ++i) r.values[i] = (up[i] - down[i]) / (2.0 * delta) * factor / r.probabilities[i];
  r.hop_distance = hop_distances(model.graph(), j);
  for (int i = 0; i < v; ++i) {
    if (i == j) r.classes.push_back(HopClass::self);
    else if (r.hop_distance[i] >= 1 && r.hop_distance[i] <= r.hops) r.classes.push_back(HopClass::within);
    else r.classes.push_back(HopClass::outside);
  }
  return r;
}

ConstancyReport khop_constancy_check(const ElasticityReport& report, double tolerance) {
  ConstancyReport c;
  double out_lo = INFINITY, out_hi = -INFINITY, in_lo = INFINITY, in_hi = -INFINITY;
  for (std::size_t i = 0; i < report.values.size(); ++i) {
    const double e = report.values[i];
    if (report.classes[i] == HopClass::outside) {
      ++c.outside_count;
      out_lo = std::min(out_lo, e);
      out_hi = std::max(out_hi, e);
    } else if (report.classes[i] == HopClass::within) {
      in_lo = std::min(in_lo, e);
      in_hi = std::max(in_hi, e);
    }
  }
  c.vacuous = c.outside_count < 2;
  c.outside_spread = c.outside_count > 0 ? out_hi - out_lo : 0.0;
  c.within_spread = in_hi >= in_lo ? in_hi - in_lo : 0.0;
  c.passed = c.vacuous || c.outside_spread < tolerance;
  return c;
}

IceCurves ice_curve(const ChoiceModel& model, const ChoiceDataset& ds, std::span<const int> households, int i,
                    const std::string& attribute, int points, double lo, double hi, const std::string& color_key) {
  if (households.empty()) throw UsageError("ICE needs at least one household");
  if (i < 0 || i >= ds.num_alternatives) throw UsageError("alternative index out of range");
  if (points < 2) throw UsageError("ICE grid needs at least two points");
  const int d = ds.feature_index(attribute);
  std::vector<double> all;
  all.reserve(static_cast<std::size_t>(ds.num_households) * ds.num_alternatives);
  for (int n = 0; n < ds.num_households; ++n)
    for (int a = 0; a < ds.num_alternatives; ++a) all.push_back(ds.original_feature(n, a, d));
  std::sort(all.begin(), all.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(all.size() - 1);
    const auto k = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(k);
    return k + 1 < all.size() ? all[k] * (1.0 - frac) + all[k + 1] * frac : all[k];
  };
  IceCurves c;
  c.alternative = i;
  c.attribute = attribute;
  if (lo < hi) {
    c.extrapolated = lo < all.front() || hi > all.back();
  } else {
    lo = quantile(0.01);
    hi = quantile(0.99);
  }
  if (!(lo < hi)) throw DataError("attribute '" + attribute + "' does not vary; no ICE grid");
  for (int k = 0; k < points; ++k) c.grid.push_back(lo + (hi - lo) * k / (points - 1));
  int key = -1;
  for (int f = 0; f < ds.num_features; ++f)
    if (ds.feature_names[f] == color_key) key = f;
  if (key >= 0) c.color_key_name = color_key;
  const int v = ds.num_alternatives;
  const int dim = ds.num_features;
  for (int n : households) {
    if (n < 0 || n >= ds.num_households) throw UsageError("household index out of range");
    // One batch with a copy of the household per grid point.
    ad::Tensor x(static_cast<Eigen::Index>(points) * v, dim);
    const auto h = ds.household(n);
    for (int k = 0; k < points; ++k) {
      std::copy(h.begin(), h.end(), x.data() + static_cast<Eigen::Index>(k) * v * dim);
      x(static_cast<Eigen::Index>(k) * v + i, d) = ds.to_model(d, c.grid[k]);
    }
    ad::Tape tape;
    auto p = model.params().bind(tape, false);
    const auto lp = model.log_probs(tape, p, x, points, false, nullptr).value();
    std::vector<double> curve(points);
    for (int k = 0; k < points; ++k) curve[k] = std::exp(lp(k, i));
    c.curves.push_back(std::move(curve));
    c.household_ids.push_back(ds.household_ids[n]);
    c.color_key.push_back(key >= 0 ? ds.original_feature(n, i, key) : std::nan(""));
  }
  return c;
}

SubstitutionMap substitution_map(const ChoiceModel& model, const ChoiceDataset& ds, int n, int j,
                                 const std::string& attribute, double pct) {
  check_indices(ds, n, j);
  if (pct == 0.0 || !std::isfinite(pct)) throw UsageError("percent change must be finite and non-zero");
  const int d = ds.feature_index(attribute);
  const double z = ds.original_feature(n, j, d);
  if (z == 0.0)
    throw UsageError("attribute '" + attribute + "' of alternative " + std::to_string(j) +
                     " is zero, so a percent change leaves it unchanged");
  SubstitutionMap m;
  m.household = n;
  m.target = j;
  m.attribute = attribute;
  m.pct = pct;
  m.before = model.probabilities(ds.household(n));
  m.after = model.probabilities(with_value(ds, n, j, d, z * (1.0 + pct / 100.0)));
  for (std::size_t i = 0; i < m.before.size(); ++i) m.pct_change.push_back(100.0 * (m.after[i] - m.before[i]) / m.before[i]);
  m.hop_distance = hop_distances(model.graph(), j);
  return m;
}

namespace {

std::ofstream open_csv(const std::string& path, const std::vector<std::string>& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& h : header) out << "# " << h << '\n';
  return out;
}

std::string num(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }

} // namespace

void write_elasticity_csv(const ElasticityReport& r, const ChoiceDataset& ds, const std::string& path,
                          const std::vector<std::string>& header) {
  auto out = open_csv(path, header);
  out << "i,alternative_id,value,hop_class,hop_distance,probability\n";
  for (std::size_t i = 0; i < r.values.size(); ++i)
    out << i << ',' << ds.alternative_ids[i] << ',' << num(r.values[i]) << ',' << hop_class_name(r.classes[i]) << ','
        << r.hop_distance[i] << ',' << num(r.probabilities[i]) << '\n';
}

void write_ice_csv(const IceCurves& c, const std::string& path, const std::vector<std::string>& header) {
  auto out = open_csv(path, header);
  out << "household,grid_value,probability,color_key\n";
  for (std::size_t h = 0; h < c.curves.size(); ++h)
    for (std::size_t k = 0; k < c.grid.size(); ++k)
      out << c.household_ids[h] << ',' << num(c.grid[k]) << ',' << num(c.curves[h][k]) << ',' << num(c.color_key[h])
          << '\n';
}

void write_submap_csv(const SubstitutionMap& m, const ChoiceDataset& ds, const std::string& path,
                      const std::vector<std::string>& header) {
  auto out = open_csv(path, header);
  out << "i,alternative_id,pct_change,hop_distance,probability_before,probability_after\n";
  for (std::size_t i = 0; i < m.pct_change.size(); ++i)
    out << i << ',' << ds.alternative_ids[i] << ',' << num(m.pct_change[i]) << ',' << m.hop_distance[i] << ','
        << num(m.before[i]) << ',' << num(m.after[i]) << '\n';
}

} // namespace gnndcm
