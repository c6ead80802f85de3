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

#ifndef GNNDCM_INTERPRET_INTERPRET_HPP
#define GNNDCM_INTERPRET_INTERPRET_HPP

#include <span>
#include <string>
#include <vector>

#include "dataset/dataset.hpp"
#include "models/model.hpp"

namespace gnndcm {

enum class HopClass { self, within, outside };
const char* hop_class_name(HopClass c);

enum class ElasticityMode {
  relative, // (dP_i/dz) z / P_i
  semi,     // (dP_i/dz) / P_i, per original unit of z
};

/// Response of household n's probabilities to attribute `attribute` of
/// alternative j, by central differences in original units.
struct ElasticityReport {
  int household = 0;
  int target = 0;
  std::string attribute;
  ElasticityMode mode = ElasticityMode::relative;
  double attribute_value = 0.0; // original units
  int hops = 0;                 // model's receptive radius
  std::vector<double> probabilities;
  std::vector<double> values;
  std::vector<int> hop_distance; // -1 when unreachable
  std::vector<HopClass> classes;
};

ElasticityReport elasticity(const ChoiceModel& model, const ChoiceDataset& ds, int n, int j, const std::string& attribute,
                            ElasticityMode mode = ElasticityMode::relative, double relative_step = 1e-4);

/// Cross-elasticities outside the K-hop neighborhood of j should coincide.
struct ConstancyReport {
  bool vacuous = false; // fewer than two outside alternatives
  int outside_count = 0;
  double outside_spread = 0.0; // max - min over outside alternatives
  double within_spread = 0.0;  // informational
  bool passed = false;
};

ConstancyReport khop_constancy_check(const ElasticityReport& report, double tolerance);

struct IceCurves {
  int alternative = 0;
  std::string attribute;
  std::vector<double> grid; // original units, strictly increasing
  std::vector<long long> household_ids;
  std::vector<std::vector<double>> curves; // [household][grid point]
  std::string color_key_name;              // empty when unavailable
  std::vector<double> color_key;           // original units at the alternative
  bool extrapolated = false;
};

/// Default grid: `points` values over the 1st-99th percentile of the
/// attribute across all cells. `lo`/`hi` override the range when lo < hi.
IceCurves ice_curve(const ChoiceModel& model, const ChoiceDataset& ds, std::span<const int> households, int i,
                    const std::string& attribute, int points = 50, double lo = 0.0, double hi = 0.0,
                    const std::string& color_key = "income_interact");

struct SubstitutionMap {
  int household = 0;
  int target = 0;
  std::string attribute;
  double pct = 0.0;
  std::vector<double> before;
  std::vector<double> after;
  std::vector<double> pct_change; // 100 (P' - P) / P
  std::vector<int> hop_distance;
};

SubstitutionMap substitution_map(const ChoiceModel& model, const ChoiceDataset& ds, int n, int j,
                                 const std::string& attribute, double pct);

// CSV outputs. `header` lines are written as '#' comments first.
void write_elasticity_csv(const ElasticityReport& r, const ChoiceDataset& ds, const std::string& path,
                          const std::vector<std::string>& header);
void write_ice_csv(const IceCurves& c, const std::string& path, const std::vector<std::string>& header);
void write_submap_csv(const SubstitutionMap& m, const ChoiceDataset& ds, const std::string& path,
                      const std::vector<std::string>& header);

} // namespace gnndcm

#endif
