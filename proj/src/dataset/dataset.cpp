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

#include "dataset/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "common/csv.hpp"
#include "common/error.hpp"
#include "models/logit.hpp"

namespace gnndcm {

namespace fs = std::filesystem;
using nlohmann::json;

int ChoiceDataset::feature_index(const std::string& name) const {
  for (int d = 0; d < num_features; ++d)
    if (feature_names[d] == name) return d;
  throw UsageError("unknown attribute '" + name + "'");
}

int ChoiceDataset::alternative_index(long long id) const {
  for (int i = 0; i < num_alternatives; ++i)
    if (alternative_ids[i] == id) return i;
  throw UsageError("unknown alternative id " + std::to_string(id));
}

ChoiceDataset ChoiceDataset::subset(std::span<const int> households) const {
  ChoiceDataset out = *this;
  out.num_households = static_cast<int>(households.size());
  out.features.clear();
  out.chosen.clear();
  out.household_ids.clear();
  const auto block = static_cast<std::size_t>(num_alternatives) * num_features;
  out.features.reserve(block * households.size());
  for (int n : households) {
    if (n < 0 || n >= num_households) throw UsageError("household index out of range");
    auto h = household(n);
    out.features.insert(out.features.end(), h.begin(), h.end());
    out.chosen.push_back(chosen[n]);
    out.household_ids.push_back(household_ids[n]);
  }
  return out;
}

void ChoiceDataset::validate() const {
  if (num_households < 0 || num_alternatives <= 0 || num_features <= 0) throw DataError("dataset has empty dimensions");
  if (features.size() != static_cast<std::size_t>(num_households) * num_alternatives * num_features)
    throw DataError("feature array size does not match N x V x D");
  if (static_cast<int>(chosen.size()) != num_households) throw DataError("one chosen alternative per household required");
  for (int c : chosen)
    if (c < 0 || c >= num_alternatives) throw DataError("chosen alternative index out of range");
  for (double v : features)
    if (!std::isfinite(v)) throw DataError("non-finite feature value");
  if (static_cast<int>(feature_names.size()) != num_features) throw DataError("one name per feature required");
  std::set<std::string> names(feature_names.begin(), feature_names.end());
  if (static_cast<int>(names.size()) != num_features) throw DataError("feature names must be unique");
  if (static_cast<int>(alternative_ids.size()) != num_alternatives) throw DataError("one id per alternative required");
  if (static_cast<int>(household_ids.size()) != num_households) throw DataError("one id per household required");
  if (!centroids.empty() && !has_centroids()) throw DataError("one centroid per alternative required");
  if (static_cast<int>(scaled.size()) != num_features || static_cast<int>(scale_mean.size()) != num_features ||
      static_cast<int>(scale_sd.size()) != num_features)
    throw DataError("scaling constants missing");
}

// ---------------------------------------------------------------------------
// Feature specification

std::vector<std::string> FeatureSpec::scaled_columns() const {
  std::vector<std::string> out;
  for (const auto& f : features)
    if (f.scale) out.push_back(f.name);
  return out;
}

FeatureSpec FeatureSpec::from_json(const json& j) {
  FeatureSpec spec;
  if (!j.contains("features") || !j["features"].is_array()) throw UsageError("feature spec needs a 'features' array");
  for (const auto& f : j["features"]) {
    FeatureRule r;
    r.name = f.at("name").get<std::string>();
    const auto source = f.value("source", std::string("community"));
    if (source == "community") {
      r.source = FeatureSource::community;
      r.community_column = f.value("column", r.name);
    } else if (source == "interaction") {
      r.source = FeatureSource::interaction;
      r.household_column = f.at("household").get<std::string>();
      r.community_column = f.at("community").get<std::string>();
      const auto op = f.value("op", std::string("product"));
      if (op == "product") r.op = InteractionOp::product;
      else if (op == "difference") r.op = InteractionOp::difference;
      else throw UsageError("unknown interaction op '" + op + "'");
    } else if (source == "work_distance") {
      r.source = FeatureSource::work_distance;
    } else {
      throw UsageError("unknown feature source '" + source + "'");
    }
    r.scale = f.value("scale", false);
    spec.features.push_back(std::move(r));
  }
  if (j.contains("work_locations")) {
    spec.work_locations.clear();
    for (const auto& p : j["work_locations"]) spec.work_locations.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
  }
  spec.distance_floor_km = j.value("distance_floor_km", 0.1);
  if (!(spec.distance_floor_km > 0.0)) throw UsageError("distance_floor_km must be positive");
  return spec;
}

json FeatureSpec::to_json() const {
  json fj = json::array();
  for (const auto& r : features) {
    json f{{"name", r.name}, {"scale", r.scale}};
    switch (r.source) {
    case FeatureSource::community:
      f["source"] = "community";
      f["column"] = r.community_column;
      break;
    case FeatureSource::interaction:
      f["source"] = "interaction";
      f["household"] = r.household_column;
      f["community"] = r.community_column;
      f["op"] = r.op == InteractionOp::product ? "product" : "difference";
      break;
    case FeatureSource::work_distance:
      f["source"] = "work_distance";
      break;
    }
    fj.push_back(f);
  }
  json wl = json::array();
  for (const auto& [x, y] : work_locations) wl.push_back({x, y});
  return json{{"features", fj}, {"work_locations", wl}, {"distance_floor_km", distance_floor_km}};
}

FeatureSpec FeatureSpec::read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("feature spec not found: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return from_json(j);
}

FeatureSpec FeatureSpec::residential_default() {
  auto community = [](std::string name, bool scale) {
    FeatureRule r;
    r.name = name;
    r.community_column = name;
    r.scale = scale;
    return r;
  };
  auto interaction = [](std::string name, std::string hh, std::string comm, InteractionOp op, bool scale) {
    FeatureRule r;
    r.name = std::move(name);
    r.source = FeatureSource::interaction;
    r.household_column = std::move(hh);
    r.community_column = std::move(comm);
    r.op = op;
    r.scale = scale;
    return r;
  };
  FeatureSpec s;
  s.features = {
      community("units", true),
      community("house_value", true),
      community("house_age", true),
      community("land_mixture", false),
      community("pct_single", false),
      community("pct_multi", false),
      community("pct_office", false),
      community("transit_access", true),
      FeatureRule{"work_distance", FeatureSource::work_distance, "", "", InteractionOp::product, false},
      community("pop_density", true),
      interaction("black_interact", "black", "pct_black", InteractionOp::product, false),
      interaction("white_interact", "white", "pct_white", InteractionOp::product, false),
      interaction("income_interact", "income", "median_income", InteractionOp::difference, true),
  };
  s.work_locations = {{"work_x", "work_y"}, {"work2_x", "work2_y"}};
  return s;
}

// ---------------------------------------------------------------------------
// Raw-table ingestion

ChoiceDataset load_dataset(const std::string& community_csv, const std::string& household_csv,
                           const std::string& centroid_csv, const FeatureSpec& spec) {
  auto comm = CsvTable::read(community_csv);
  auto hh = CsvTable::read(household_csv);
  auto cent = CsvTable::read(centroid_csv);
  if (spec.features.empty()) throw UsageError("feature spec lists no features");

  // Alternatives ordered by ascending community id.
  const auto comm_id_col = comm.column("community_id");
  std::vector<std::pair<long long, std::size_t>> order;
  for (std::size_t r = 0; r < comm.rows(); ++r) order.emplace_back(comm.integer(r, comm_id_col), r);
  std::sort(order.begin(), order.end());
  for (std::size_t k = 1; k < order.size(); ++k)
    if (order[k].first == order[k - 1].first) throw DataError(community_csv + ": duplicate community id " + std::to_string(order[k].first));
  const int num_alt = static_cast<int>(order.size());
  if (num_alt == 0) throw DataError(community_csv + ": no communities");

  ChoiceDataset ds;
  ds.num_alternatives = num_alt;
  for (auto& [id, _] : order) ds.alternative_ids.push_back(id);
  std::map<long long, int> index_of;
  for (int i = 0; i < num_alt; ++i) index_of[ds.alternative_ids[i]] = i;

  ds.centroids.assign(num_alt, {0.0, 0.0});
  {
    const auto id = cent.column("community_id");
    const auto x = cent.column("x_km");
    const auto y = cent.column("y_km");
    std::vector<char> seen(num_alt, 0);
    for (std::size_t r = 0; r < cent.rows(); ++r) {
      auto it = index_of.find(cent.integer(r, id));
      if (it == index_of.end()) throw DataError(centroid_csv + ": centroid for unknown community " + cent.cell(r, id));
      ds.centroids[it->second] = {cent.number(r, x), cent.number(r, y)};
      seen[it->second] = 1;
    }
    for (int i = 0; i < num_alt; ++i)
      if (!seen[i]) throw DataError(centroid_csv + ": missing centroid for community " + std::to_string(ds.alternative_ids[i]));
  }

  // Derived columns must not shadow raw inputs.
  std::set<std::string> raw(comm.header().begin(), comm.header().end());
  raw.insert(hh.header().begin(), hh.header().end());
  std::set<std::string> names;
  for (const auto& r : spec.features) {
    if (!names.insert(r.name).second) throw UsageError("duplicate feature name '" + r.name + "'");
    if (r.source != FeatureSource::community && raw.count(r.name))
      throw UsageError("derived feature '" + r.name + "' collides with an input column");
  }

  const int num_hh = static_cast<int>(hh.rows());
  const int num_feat = static_cast<int>(spec.features.size());
  ds.num_households = num_hh;
  ds.num_features = num_feat;
  ds.features.assign(static_cast<std::size_t>(num_hh) * num_alt * num_feat, 0.0);
  for (const auto& r : spec.features) ds.feature_names.push_back(r.name);

  const auto hh_id = hh.column("household_id");
  const auto hh_chosen = hh.column("chosen");
  for (int n = 0; n < num_hh; ++n) {
    ds.household_ids.push_back(hh.integer(n, hh_id));
    auto it = index_of.find(hh.integer(n, hh_chosen));
    if (it == index_of.end()) throw DataError(household_csv + ": household " + hh.cell(n, hh_id) + " chose unknown community " + hh.cell(n, hh_chosen));
    ds.chosen.push_back(it->second);
  }

  auto community_value = [&](const std::string& col, int i) {
    return comm.number(order[i].second, comm.column(col));
  };

  for (int d = 0; d < num_feat; ++d) {
    const auto& rule = spec.features[d];
    switch (rule.source) {
    case FeatureSource::community: {
      comm.column(rule.community_column);
      for (int i = 0; i < num_alt; ++i) {
        const double v = community_value(rule.community_column, i);
        for (int n = 0; n < num_hh; ++n) ds.feature(n, i, d) = v;
      }
      break;
    }
    case FeatureSource::interaction: {
      const auto hc = hh.column(rule.household_column);
      comm.column(rule.community_column);
      for (int n = 0; n < num_hh; ++n) {
        const double h = hh.number(n, hc);
        for (int i = 0; i < num_alt; ++i) {
          const double c = community_value(rule.community_column, i);
          ds.feature(n, i, d) = rule.op == InteractionOp::product ? h * c : h - c;
        }
      }
      break;
    }
    case FeatureSource::work_distance: {
      if (spec.work_locations.empty()) throw UsageError("work_distance feature needs work location columns");
      std::vector<std::pair<std::size_t, std::size_t>> cols;
      for (std::size_t l = 0; l < spec.work_locations.size(); ++l) {
        auto cx = hh.find_column(spec.work_locations[l].first);
        auto cy = hh.find_column(spec.work_locations[l].second);
        if (!cx || !cy) {
          if (l == 0) hh.column(!cx ? spec.work_locations[0].first : spec.work_locations[0].second);
          continue;
        }
        cols.emplace_back(*cx, *cy);
      }
      for (int n = 0; n < num_hh; ++n) {
        std::vector<std::pair<double, double>> work;
        for (std::size_t l = 0; l < cols.size(); ++l) {
          const auto& sx = hh.cell(n, cols[l].first);
          const auto& sy = hh.cell(n, cols[l].second);
          // Additional workers are optional; the first location is not.
          if (l > 0 && sx.empty() && sy.empty()) continue;
          work.emplace_back(hh.number(n, cols[l].first), hh.number(n, cols[l].second));
        }
        for (int i = 0; i < num_alt; ++i) {
          double furthest = 0.0;
          for (auto [wx, wy] : work) {
            const double dx = wx - ds.centroids[i].first;
            const double dy = wy - ds.centroids[i].second;
            furthest = std::max(furthest, std::sqrt(dx * dx + dy * dy));
          }
          ds.feature(n, i, d) = std::log(std::max(furthest, spec.distance_floor_km));
        }
      }
      break;
    }
    }
  }
  ds.scaled.assign(num_feat, false);
  ds.scale_mean.assign(num_feat, 0.0);
  ds.scale_sd.assign(num_feat, 1.0);
  ds.validate();
  return standardize(ds, spec.scaled_columns());
}

ChoiceDataset standardize(const ChoiceDataset& ds, const std::vector<std::string>& columns) {
  ChoiceDataset out = ds;
  const std::size_t cells = static_cast<std::size_t>(ds.num_households) * ds.num_alternatives;
  for (const auto& name : columns) {
    const int d = ds.feature_index(name);
    if (ds.scaled[d]) continue;
    if (cells < 2) throw DataError("cannot standardize '" + name + "' with fewer than two cells");
    double mean = 0.0;
    for (std::size_t c = 0; c < cells; ++c) mean += ds.features[c * ds.num_features + d];
    mean /= static_cast<double>(cells);
    double ss = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
      const double e = ds.features[c * ds.num_features + d] - mean;
      ss += e * e;
    }
    const double sd = std::sqrt(ss / static_cast<double>(cells - 1));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) throw DataError("column '" + name + "' has zero variance");
    for (std::size_t c = 0; c < cells; ++c) {
      auto& v = out.features[c * ds.num_features + d];
      v = (v - mean) / sd;
    }
    out.scaled[d] = true;
    out.scale_mean[d] = mean;
    out.scale_sd[d] = sd;
  }
  return out;
}

ChoiceDataset unstandardize(const ChoiceDataset& ds) {
  ChoiceDataset out = ds;
  const std::size_t cells = static_cast<std::size_t>(ds.num_households) * ds.num_alternatives;
  for (int d = 0; d < ds.num_features; ++d) {
    if (!ds.scaled[d]) continue;
    for (std::size_t c = 0; c < cells; ++c) {
      auto& v = out.features[c * ds.num_features + d];
      v = ds.to_original(d, v);
    }
    out.scaled[d] = false;
    out.scale_mean[d] = 0.0;
    out.scale_sd[d] = 1.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Folds

FoldPlan make_folds(int num_households, int k, unsigned long long seed) {
  if (k < 2) throw UsageError("fold count must be at least 2");
  if (k > num_households) throw UsageError("fold count " + std::to_string(k) + " exceeds household count " + std::to_string(num_households));
  std::vector<int> perm(num_households);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the plan does not depend on the
  // standard library's shuffle.
  for (int i = num_households - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng() % static_cast<unsigned long long>(i + 1));
    std::swap(perm[i], perm[j]);
  }
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignments.assign(num_households, 0);
  for (int pos = 0; pos < num_households; ++pos) plan.assignments[perm[pos]] = pos % k;
  return plan;
}

std::vector<int> FoldPlan::test_indices(int fold) const {
  std::vector<int> out;
  for (int n = 0; n < static_cast<int>(assignments.size()); ++n)
    if (assignments[n] == fold) out.push_back(n);
  return out;
}

std::vector<int> FoldPlan::train_indices(int fold) const {
  std::vector<int> out;
  for (int n = 0; n < static_cast<int>(assignments.size()); ++n)
    if (assignments[n] != fold) out.push_back(n);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

namespace {

const char* const kDefaultNames[] = {"units",         "house_value",   "house_age",     "land_mixture", "pct_single",
                                     "pct_multi",     "pct_office",    "transit_access", "work_distance", "pop_density",
                                     "black_interact", "white_interact", "income_interact"};

std::string default_name(int d) {
  if (d < static_cast<int>(std::size(kDefaultNames))) return kDefaultNames[d];
  return "f" + std::to_string(d);
}

const char* generator_name(GeneratorModel g) {
  switch (g) {
  case GeneratorModel::mnl: return "mnl";
  case GeneratorModel::nl: return "nl";
  case GeneratorModel::scl: return "scl";
  }
  return "?";
}

int sample_index(const std::vector<double>& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (r < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

std::vector<std::pair<double, double>> random_points(int n, double side, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, side);
  std::vector<std::pair<double, double>> pts(n);
  for (auto& p : pts) {
    p.first = u(rng);
    p.second = u(rng);
  }
  return pts;
}

} // namespace

void SynthConfig::validate() const {
  if (num_households < 1 || num_alternatives < 2 || num_features < 1) throw UsageError("synthetic dimensions must be positive (V >= 2)");
  if (!true_coefficients.empty() && static_cast<int>(true_coefficients.size()) != num_features)
    throw UsageError("true coefficient count != feature count");
  if (!(mu > 0.0 && mu <= 1.0)) throw UsageError("mu must lie in (0,1]");
  if (graph && graph->num_nodes() != num_alternatives) throw UsageError("generator graph size != alternative count");
  if (nests) nests->validate(num_alternatives);
  if (num_nests < 1) throw UsageError("num_nests must be positive");
}

json SynthConfig::to_json() const {
  json j{{"generator", generator_name(generator)},
         {"num_households", num_households},
         {"num_alternatives", num_alternatives},
         {"num_features", num_features},
         {"true_coefficients", true_coefficients},
         {"mu", mu},
         {"seed", seed}};
  if (graph) j["num_edges"] = graph->num_edges();
  if (nests) {
    j["nests"] = nests->nests;
    j["nest_mu"] = nests->mu;
  }
  return j;
}

SynthResult synthesize(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const int n_hh = config.num_households;
  const int n_alt = config.num_alternatives;
  const int n_feat = config.num_features;
  const double side = config.region_km > 0.0 ? config.region_km : 3.0 * std::sqrt(static_cast<double>(n_alt));

  SynthResult out;
  out.truth = config;
  auto points = random_points(n_alt, side, rng);
  out.graph = config.graph ? *config.graph : gabriel_graph(points);
  out.truth.graph = out.graph;

  if (out.truth.true_coefficients.empty()) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int d = 0; d < n_feat; ++d) out.truth.true_coefficients.push_back(u(rng));
  }
  if (config.generator == GeneratorModel::nl && !config.nests) {
    NestStructure nests;
    std::vector<std::vector<NodeIndex>> bands(config.num_nests);
    for (int i = 0; i < n_alt; ++i) {
      const int b = std::min(config.num_nests - 1, static_cast<int>(points[i].first / side * config.num_nests));
      bands[b].push_back(i);
    }
    for (auto& b : bands)
      if (!b.empty()) {
        nests.nests.push_back(std::move(b));
        nests.mu.push_back(config.mu);
      }
    out.truth.nests = nests;
  }

  auto& ds = out.dataset;
  ds.num_households = n_hh;
  ds.num_alternatives = n_alt;
  ds.num_features = n_feat;
  ds.centroids = points;
  for (int d = 0; d < n_feat; ++d) ds.feature_names.push_back(default_name(d));
  for (int i = 0; i < n_alt; ++i) ds.alternative_ids.push_back(i);
  ds.scaled.assign(n_feat, false);
  ds.scale_mean.assign(n_feat, 0.0);
  ds.scale_sd.assign(n_feat, 1.0);
  ds.features.resize(static_cast<std::size_t>(n_hh) * n_alt * n_feat);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : ds.features) v = normal(rng);

  std::vector<std::map<NodeIndex, double>> alpha;
  if (config.generator == GeneratorModel::scl) alpha = equal_allocation(out.graph);

  for (int n = 0; n < n_hh; ++n) {
    auto u = linear_utilities(ds.household(n), n_feat, out.truth.true_coefficients);
    std::vector<double> p;
    switch (config.generator) {
    case GeneratorModel::mnl: p = mnl_probs(u); break;
    case GeneratorModel::nl: p = nl_probs_closed(u, *out.truth.nests); break;
    case GeneratorModel::scl: p = scl_probs_closed(u, out.graph, config.mu, alpha); break;
    }
    ds.chosen.push_back(sample_index(p, rng));
    ds.household_ids.push_back(n);
  }
  ds.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::ofstream open_out(const fs::path& p, const std::string& banner = "") {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  if (!banner.empty()) out << "# " << banner << '\n';
  return out;
}

// "config_hash=<hex> seed=<n>" when the provenance object carries both.
std::string banner_of(const json& provenance) {
  if (!provenance.is_object() || !provenance.contains("config_hash") || !provenance.contains("seed")) return "";
  return "config_hash=" + provenance["config_hash"].get<std::string>() +
         " seed=" + std::to_string(provenance["seed"].get<unsigned long long>());
}

void write_centroids(const ChoiceDataset& ds, const fs::path& p, const std::string& banner = "") {
  auto out = open_out(p, banner);
  out << "community_id,x_km,y_km\n";
  for (int i = 0; i < ds.num_alternatives; ++i)
    out << ds.alternative_ids[i] << ',' << format_double(ds.centroids[i].first) << ','
        << format_double(ds.centroids[i].second) << '\n';
}

} // namespace

void write_dataset(const ChoiceDataset& ds, const std::string& dir, const json& extra) {
  ds.validate();
  fs::create_directories(dir);
  const fs::path root(dir);
  const auto banner = banner_of(extra);
  {
    auto out = open_out(root / "features.csv", banner);
    out << "household_id,alternative_id";
    for (const auto& name : ds.feature_names) out << ',' << name;
    out << '\n';
    for (int n = 0; n < ds.num_households; ++n)
      for (int i = 0; i < ds.num_alternatives; ++i) {
        out << ds.household_ids[n] << ',' << ds.alternative_ids[i];
        for (int d = 0; d < ds.num_features; ++d) out << ',' << format_double(ds.original_feature(n, i, d));
        out << '\n';
      }
  }
  {
    auto out = open_out(root / "choices.csv", banner);
    out << "household_id,chosen\n";
    for (int n = 0; n < ds.num_households; ++n) out << ds.household_ids[n] << ',' << ds.alternative_ids[ds.chosen[n]] << '\n';
  }
  if (ds.has_centroids()) write_centroids(ds, root / "centroids.csv", banner);
  json manifest = extra.is_object() ? extra : json::object();
  manifest["layout"] = "long";
  manifest["feature_names"] = ds.feature_names;
  std::vector<std::string> scaled;
  for (int d = 0; d < ds.num_features; ++d)
    if (ds.scaled[d]) scaled.push_back(ds.feature_names[d]);
  manifest["scaled"] = scaled;
  auto out = open_out(root / "dataset.json");
  out << manifest.dump(2) << '\n';
}

ChoiceDataset read_dataset(const std::string& dir) {
  const fs::path root(dir);
  json manifest = json::object();
  if (fs::exists(root / "dataset.json")) {
    std::ifstream in(root / "dataset.json");
    try {
      in >> manifest;
    } catch (const json::exception& e) {
      throw DataError((root / "dataset.json").string() + ": " + e.what());
    }
  }
  auto feat = CsvTable::read((root / "features.csv").string());
  auto choice = CsvTable::read((root / "choices.csv").string());
  const auto hcol = feat.column("household_id");
  const auto acol = feat.column("alternative_id");
  std::vector<std::string> names;
  std::vector<std::size_t> fcols;
  for (std::size_t c = 0; c < feat.header().size(); ++c) {
    if (c == hcol || c == acol) continue;
    names.push_back(feat.header()[c]);
    fcols.push_back(c);
  }
  if (names.empty()) throw DataError("features.csv has no feature columns");

  // Households in order of first appearance, alternatives by ascending id
  // (the order edge-list indices refer to).
  std::vector<long long> hh_ids, alt_ids;
  std::map<long long, int> hh_index, alt_index;
  for (std::size_t r = 0; r < feat.rows(); ++r) {
    const auto h = feat.integer(r, hcol);
    const auto a = feat.integer(r, acol);
    if (!hh_index.count(h)) {
      hh_index[h] = static_cast<int>(hh_ids.size());
      hh_ids.push_back(h);
    }
    alt_index.emplace(a, 0);
  }
  for (auto& [id, index] : alt_index) {
    index = static_cast<int>(alt_ids.size());
    alt_ids.push_back(id);
  }
  ChoiceDataset ds;
  ds.num_households = static_cast<int>(hh_ids.size());
  ds.num_alternatives = static_cast<int>(alt_ids.size());
  ds.num_features = static_cast<int>(names.size());
  ds.feature_names = names;
  ds.household_ids = hh_ids;
  ds.alternative_ids = alt_ids;
  if (feat.rows() != static_cast<std::size_t>(ds.num_households) * ds.num_alternatives)
    throw DataError("features.csv must have one row per (household, alternative)");
  ds.features.assign(feat.rows() * names.size(), 0.0);
  std::vector<char> filled(feat.rows(), 0);
  for (std::size_t r = 0; r < feat.rows(); ++r) {
    const int n = hh_index[feat.integer(r, hcol)];
    const int i = alt_index[feat.integer(r, acol)];
    const auto cell = static_cast<std::size_t>(n) * ds.num_alternatives + i;
    if (filled[cell]++) throw DataError("features.csv repeats a (household, alternative) pair");
    for (std::size_t d = 0; d < fcols.size(); ++d) ds.feature(n, i, static_cast<int>(d)) = feat.number(r, fcols[d]);
  }
  ds.chosen.assign(ds.num_households, -1);
  const auto ch = choice.column("household_id");
  const auto cc = choice.column("chosen");
  for (std::size_t r = 0; r < choice.rows(); ++r) {
    auto h = hh_index.find(choice.integer(r, ch));
    if (h == hh_index.end()) throw DataError("choices.csv names unknown household " + choice.cell(r, ch));
    auto a = alt_index.find(choice.integer(r, cc));
    if (a == alt_index.end()) throw DataError("household " + choice.cell(r, ch) + " chose unknown alternative " + choice.cell(r, cc));
    ds.chosen[h->second] = a->second;
  }
  for (int n = 0; n < ds.num_households; ++n)
    if (ds.chosen[n] < 0) throw DataError("no choice recorded for household " + std::to_string(hh_ids[n]));
  if (fs::exists(root / "centroids.csv")) {
    auto cent = CsvTable::read((root / "centroids.csv").string());
    ds.centroids.assign(ds.num_alternatives, {0.0, 0.0});
    std::vector<char> seen(ds.num_alternatives, 0);
    const auto id = cent.column("community_id");
    const auto x = cent.column("x_km");
    const auto y = cent.column("y_km");
    for (std::size_t r = 0; r < cent.rows(); ++r) {
      auto a = alt_index.find(cent.integer(r, id));
      if (a == alt_index.end()) continue;
      ds.centroids[a->second] = {cent.number(r, x), cent.number(r, y)};
      seen[a->second] = 1;
    }
    for (int i = 0; i < ds.num_alternatives; ++i)
      if (!seen[i]) throw DataError("centroids.csv lacks alternative " + std::to_string(alt_ids[i]));
  }
  ds.scaled.assign(ds.num_features, false);
  ds.scale_mean.assign(ds.num_features, 0.0);
  ds.scale_sd.assign(ds.num_features, 1.0);
  ds.validate();
  std::vector<std::string> scaled;
  if (manifest.contains("scaled")) scaled = manifest["scaled"].get<std::vector<std::string>>();
  return standardize(ds, scaled);
}

ChoiceDataset load_dataset_dir(const std::string& dir, const std::string& spec_path) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw DataError("dataset directory not found: " + dir);
  if (fs::exists(root / "features.csv")) return read_dataset(dir);
  const auto spec = FeatureSpec::read(spec_path.empty() ? (root / "feature_spec.json").string() : spec_path);
  return load_dataset((root / "community.csv").string(), (root / "households.csv").string(),
                      (root / "centroids.csv").string(), spec);
}

void write_graph_csv(const AlternativeGraph& g, const std::string& path, const std::string& banner) {
  auto out = open_out(path, banner);
  out << "src,dst\n";
  for (auto [a, b] : g.edges()) out << a << ',' << b << '\n';
}

void synthesize_residential(const std::string& dir, int num_households, int num_alternatives, unsigned long long seed,
                            const json& provenance) {
  if (num_households < 1 || num_alternatives < 3) throw UsageError("need at least one household and three communities");
  fs::create_directories(dir);
  const fs::path root(dir);
  std::mt19937_64 rng(seed);
  const auto banner = banner_of(provenance);
  const double side = 3.0 * std::sqrt(static_cast<double>(num_alternatives));
  auto points = random_points(num_alternatives, side, rng);
  auto graph = gabriel_graph(points);
  write_graph_csv(graph, (root / "edges.csv").string(), banner);

  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto lognormal = [&](double m, double s) { return std::exp(m + s * normal(rng)); };
  {
    auto out = open_out(root / "community.csv", banner);
    out << "community_id,units,house_value,house_age,land_mixture,pct_single,pct_multi,pct_office,"
           "transit_access,pop_density,pct_black,pct_white,median_income\n";
    for (int i = 0; i < num_alternatives; ++i) {
      const double black = 0.9 * unit(rng);
      const double white = (1.0 - black) * unit(rng);
      out << i + 1 << ',' << format_double(std::round(lognormal(8.5, 0.6))) << ','
          << format_double(std::round(lognormal(12.3, 0.4))) << ',' << format_double(20.0 + 60.0 * unit(rng)) << ','
          << format_double(0.2 + 0.7 * unit(rng)) << ',' << format_double(0.6 * unit(rng)) << ','
          << format_double(0.05 + 0.55 * unit(rng)) << ',' << format_double(0.2 * unit(rng)) << ','
          << format_double(1.0 + 9.0 * unit(rng)) << ',' << format_double(lognormal(9.0, 0.5)) << ','
          << format_double(black) << ',' << format_double(white) << ',' << format_double(std::round(lognormal(11.0, 0.4)))
          << '\n';
    }
  }
  {
    ChoiceDataset stub;
    stub.num_alternatives = num_alternatives;
    stub.centroids = points;
    for (int i = 0; i < num_alternatives; ++i) stub.alternative_ids.push_back(i + 1);
    write_centroids(stub, root / "centroids.csv", banner);
  }
  struct Household {
    double income, black, white, wx, wy;
    std::optional<std::pair<double, double>> second;
  };
  std::vector<Household> households(num_households);
  std::uniform_real_distribution<double> loc(0.0, side);
  for (auto& h : households) {
    h.income = std::round(lognormal(11.0, 0.6));
    const double r = unit(rng);
    h.black = r < 0.3 ? 1.0 : 0.0;
    h.white = (r >= 0.3 && r < 0.8) ? 1.0 : 0.0;
    h.wx = loc(rng);
    h.wy = loc(rng);
    if (unit(rng) < 0.4) h.second = std::make_pair(loc(rng), loc(rng));
  }
  auto write_households = [&](const std::vector<int>& chosen) {
    auto out = open_out(root / "households.csv", banner);
    out << "household_id,chosen,income,black,white,work_x,work_y,work2_x,work2_y\n";
    for (int n = 0; n < num_households; ++n) {
      const auto& h = households[n];
      out << n + 1 << ',' << chosen[n] + 1 << ',' << format_double(h.income) << ',' << format_double(h.black) << ','
          << format_double(h.white) << ',' << format_double(h.wx) << ',' << format_double(h.wy) << ',';
      if (h.second) out << format_double(h.second->first) << ',' << format_double(h.second->second);
      else out << ',';
      out << '\n';
    }
  };
  const auto spec = FeatureSpec::residential_default();
  {
    auto out = open_out(root / "feature_spec.json");
    out << spec.to_json().dump(2) << '\n';
  }
  // Features do not depend on the choices, so assemble once with placeholder
  // choices, then sample and rewrite.
  write_households(std::vector<int>(num_households, 0));
  auto ds = load_dataset((root / "community.csv").string(), (root / "households.csv").string(),
                         (root / "centroids.csv").string(), spec);
  // Moderate effects keep choices spread over many communities.
  const std::vector<double> coefficients = {0.592, -0.097, 0.235, -0.283, -0.241, 0.174, 0.032,
                                            -0.442, -0.272, 0.702, 1.200, 0.844, -0.263};
  std::vector<int> chosen(num_households);
  for (int n = 0; n < num_households; ++n)
    chosen[n] = sample_index(mnl_probs(linear_utilities(ds.household(n), ds.num_features, coefficients)), rng);
  write_households(chosen);
  json truth{{"generator", "mnl"},
             {"schema", "residential"},
             {"num_households", num_households},
             {"num_alternatives", num_alternatives},
             {"feature_names", ds.feature_names},
             {"true_coefficients", coefficients},
             {"seed", seed}};
  if (provenance.is_object())
    for (auto it = provenance.begin(); it != provenance.end(); ++it) truth[it.key()] = it.value();
  auto out = open_out(root / "truth.json");
  out << truth.dump(2) << '\n';
}

} // namespace gnndcm
