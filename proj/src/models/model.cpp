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

#include "models/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "common/error.hpp"

namespace gnndcm {

using namespace ad;
using nlohmann::json;

namespace {

constexpr char kModelMagic[8] = {'G', 'D', 'C', 'M', 'M', 'O', 'D', 'L'};
constexpr std::uint32_t kModelVersion = 1;

double logit(double p) {
  p = std::clamp(p, 1e-9, 1.0 - 1e-9);
  return std::log(p / (1.0 - p));
}

double sigmoid_value(double t) {
  return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

std::string layer_name(const char* prefix, int k, const char* leaf) {
  return std::string(prefix) + "." + std::to_string(k) + "." + leaf;
}

} // namespace

// ---------------------------------------------------------------------------
// Specs

void GnnSpec::validate() const {
  if (layers < 0) throw UsageError("layer count must be >= 0");
  if (hidden < 1) throw UsageError("hidden dimension must be >= 1");
  if (embed_layers < 1) throw UsageError("embedding needs at least one layer");
  if (dropout < 0.0 || dropout >= 1.0) throw UsageError("dropout must be in [0,1)");
  if (update == UpdateKind::gat && hidden % heads() != 0)
    throw UsageError("GAT hidden dimension " + std::to_string(hidden) + " is not divisible by " +
                     std::to_string(heads()) + " heads");
}

const char* update_name(UpdateKind k) {
  switch (k) {
  case UpdateKind::mpnn: return "mpnn";
  case UpdateKind::gcn: return "gcn";
  case UpdateKind::gat: return "gat";
  }
  return "?";
}

const char* aggregation_name(Aggregation a) {
  switch (a) {
  case Aggregation::sum: return "sum";
  case Aggregation::mean: return "mean";
  case Aggregation::max: return "max";
  case Aggregation::lse: return "lse";
  }
  return "?";
}

UpdateKind parse_update(const std::string& s) {
  if (s == "mpnn") return UpdateKind::mpnn;
  if (s == "gcn") return UpdateKind::gcn;
  if (s == "gat") return UpdateKind::gat;
  throw UsageError("unknown update kind '" + s + "' (mpnn, gcn, gat)");
}

Aggregation parse_aggregation(const std::string& s) {
  if (s == "sum") return Aggregation::sum;
  if (s == "mean") return Aggregation::mean;
  if (s == "max") return Aggregation::max;
  if (s == "lse") return Aggregation::lse;
  throw UsageError("unknown aggregation '" + s + "' (sum, mean, max, lse)");
}

std::string model_family(const ModelSpec& spec) {
  struct V {
    std::string operator()(const MnlSpec&) const { return "mnl"; }
    std::string operator()(const NlSpec&) const { return "nl"; }
    std::string operator()(const SclSpec&) const { return "scl"; }
    std::string operator()(const GnnSpec& g) const { return g.layers == 0 ? "asu-dnn" : "gnn"; }
  };
  return std::visit(V{}, spec);
}

std::string model_label(const ModelSpec& spec) {
  if (const auto* g = std::get_if<GnnSpec>(&spec)) {
    std::ostringstream out;
    if (g->layers == 0) {
      out << "asu-dnn-h" << g->hidden;
      return out.str();
    }
    out << "gnn-" << update_name(g->update);
    if (g->update == UpdateKind::mpnn) out << '-' << aggregation_name(g->aggregation);
    out << "-k" << g->layers << "-h" << g->hidden << (g->skip ? "-skip" : "-noskip");
    return out.str();
  }
  return model_family(spec);
}

json spec_to_json(const ModelSpec& spec) {
  struct V {
    json operator()(const MnlSpec&) const { return {{"family", "mnl"}}; }
    json operator()(const NlSpec& s) const { return {{"family", "nl"}, {"nests", s.nests.nests}, {"mu", s.nests.mu}}; }
    json operator()(const SclSpec& s) const { return {{"family", "scl"}, {"initial_mu", s.initial_mu}}; }
    json operator()(const GnnSpec& g) const {
      return {{"family", g.layers == 0 ? "asu-dnn" : "gnn"},
              {"layers", g.layers},
              {"update", update_name(g.update)},
              {"aggregation", aggregation_name(g.aggregation)},
              {"hidden", g.hidden},
              {"embed_layers", g.embed_layers},
              {"skip", g.skip},
              {"dropout", g.dropout}};
    }
  };
  return std::visit(V{}, spec);
}

ModelSpec spec_from_json(const json& j) {
  const auto family = j.value("family", std::string("mnl"));
  if (family == "mnl") return MnlSpec{};
  if (family == "nl") {
    NlSpec s;
    if (!j.contains("nests")) throw UsageError("nl model needs 'nests'");
    s.nests.nests = j["nests"].get<std::vector<std::vector<NodeIndex>>>();
    if (j.contains("mu")) s.nests.mu = j["mu"].get<std::vector<double>>();
    return s;
  }
  if (family == "scl") return SclSpec{j.value("initial_mu", 0.0)};
  if (family == "gnn" || family == "asu-dnn") {
    GnnSpec g;
    g.layers = j.value("layers", family == "asu-dnn" ? 0 : 2);
    g.update = parse_update(j.value("update", std::string("mpnn")));
    g.aggregation = parse_aggregation(j.value("aggregation", std::string("sum")));
    g.hidden = j.value("hidden", 64);
    g.embed_layers = j.value("embed_layers", 1);
    g.skip = j.value("skip", true);
    g.dropout = j.value("dropout", 0.05);
    g.validate();
    return g;
  }
  throw UsageError("unknown model family '" + family + "' (mnl, nl, scl, asu-dnn, gnn)");
}

// ---------------------------------------------------------------------------
// Scaling

FeatureScaling FeatureScaling::of(const ChoiceDataset& ds) {
  return FeatureScaling{ds.feature_names, ds.scaled, ds.scale_mean, ds.scale_sd};
}

ChoiceDataset FeatureScaling::apply(const ChoiceDataset& ds) const {
  if (ds.feature_names != names) throw DataError("dataset features do not match the model's features");
  ChoiceDataset out = unstandardize(ds);
  const std::size_t cells = static_cast<std::size_t>(ds.num_households) * ds.num_alternatives;
  for (int d = 0; d < out.num_features; ++d) {
    if (!scaled[d]) continue;
    for (std::size_t c = 0; c < cells; ++c) {
      auto& v = out.features[c * out.num_features + d];
      v = (v - mean[d]) / sd[d];
    }
    out.scaled[d] = true;
    out.scale_mean[d] = mean[d];
    out.scale_sd[d] = sd[d];
  }
  return out;
}

json FeatureScaling::to_json() const {
  std::vector<int> flags(scaled.begin(), scaled.end());
  return {{"names", names}, {"scaled", flags}, {"mean", mean}, {"sd", sd}};
}

FeatureScaling FeatureScaling::from_json(const json& j) {
  FeatureScaling s;
  s.names = j.at("names").get<std::vector<std::string>>();
  for (int f : j.at("scaled").get<std::vector<int>>()) s.scaled.push_back(f != 0);
  s.mean = j.at("mean").get<std::vector<double>>();
  s.sd = j.at("sd").get<std::vector<double>>();
  if (s.scaled.size() != s.names.size() || s.mean.size() != s.names.size() || s.sd.size() != s.names.size())
    throw DataError("model scaling block is inconsistent");
  return s;
}

// ---------------------------------------------------------------------------
// Logit message passing

Var nl_message_passing(Var v0, Var mu_per_nest, const std::vector<int>& nest_of, int batch) {
  const int v = static_cast<int>(nest_of.size());
  std::vector<std::vector<int>> members(static_cast<std::size_t>(mu_per_nest.rows()));
  for (int i = 0; i < v; ++i) members.at(nest_of[i]).push_back(i);
  std::vector<int> src, dst, node_nest;
  for (int b = 0; b < batch; ++b) {
    const int off = b * v;
    for (int i = 0; i < v; ++i) {
      node_nest.push_back(nest_of[i]);
      for (int j : members[nest_of[i]]) {
        src.push_back(off + j);
        dst.push_back(off + i);
      }
    }
  }
  const Eigen::Index n = static_cast<Eigen::Index>(v) * batch;
  auto mu = gather_rows(mu_per_nest, make_index(std::move(node_nest)));
  auto scaled = div(v0, mu);
  auto lse = segment_aggregate(gather_rows(scaled, make_index(std::move(src))), make_index(std::move(dst)), n,
                               Aggregation::lse);
  return add(scaled, mul(add_scalar(mu, -1.0), lse));
}

Var scl_message_passing(Var v0, Var mu, const AlternativeGraph& graph,
                        const std::vector<std::map<NodeIndex, double>>& alpha, int batch) {
  const int v = graph.num_nodes();
  for (int i = 0; i < v; ++i)
    if (graph.degree(i) == 0) throw DataError("alternative " + std::to_string(i) + " is isolated and belongs to no pair nest");
  auto edges = batch_edges(graph, batch, false);
  Tensor log_alpha_i(static_cast<Eigen::Index>(edges.size()), 1);
  Tensor log_alpha_j(static_cast<Eigen::Index>(edges.size()), 1);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const int i = (*edges.dst)[e] % v;
    const int j = (*edges.src)[e] % v;
    log_alpha_i(static_cast<Eigen::Index>(e), 0) = std::log(alpha.at(i).at(j));
    log_alpha_j(static_cast<Eigen::Index>(e), 0) = std::log(alpha.at(j).at(i));
  }
  auto& tape = *v0.tape;
  // Node embedding of i and j inside pair nest ij.
  auto ei = div(add(gather_rows(v0, edges.dst), tape.constant(std::move(log_alpha_i))), mu);
  auto ej = div(add(gather_rows(v0, edges.src), tape.constant(std::move(log_alpha_j))), mu);
  Var pair[] = {ei, ej};
  auto nest_lse = logsumexp_rows(concat_cols(pair));
  auto message = add(ei, mul(add_scalar(mu, -1.0), nest_lse));
  return segment_aggregate(message, edges.dst, edges.num_nodes, Aggregation::lse);
}

namespace {

std::vector<double> column_values(const Tensor& t) { return std::vector<double>(t.data(), t.data() + t.size()); }

Tensor column_tensor(std::span<const double> u) {
  Tensor t(static_cast<Eigen::Index>(u.size()), 1);
  for (std::size_t i = 0; i < u.size(); ++i) t(static_cast<Eigen::Index>(i), 0) = u[i];
  return t;
}

std::vector<double> softmax(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  std::vector<double> p(v.size());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += (p[i] = std::exp(v[i] - m));
  for (auto& x : p) x /= s;
  return p;
}

} // namespace

std::vector<double> nl_utilities_mp(std::span<const double> utilities, const NestStructure& nests) {
  const int v = static_cast<int>(utilities.size());
  nests.validate(v);
  Tape tape;
  Tensor mu(static_cast<Eigen::Index>(nests.mu.size()), 1);
  for (std::size_t k = 0; k < nests.mu.size(); ++k) mu(static_cast<Eigen::Index>(k), 0) = nests.mu[k];
  auto out = nl_message_passing(tape.constant(column_tensor(utilities)), tape.constant(mu), nests.nest_of(v), 1);
  return column_values(out.value());
}

std::vector<double> nl_probs_mp(std::span<const double> utilities, const NestStructure& nests) {
  return softmax(nl_utilities_mp(utilities, nests));
}

std::vector<double> scl_utilities_mp(std::span<const double> utilities, const AlternativeGraph& graph, double mu,
                                     const std::vector<std::map<NodeIndex, double>>& alpha) {
  if (!(mu > 0.0 && mu <= 1.0)) throw NumericalError("SCL mu must lie in (0,1]");
  if (static_cast<int>(utilities.size()) != graph.num_nodes()) throw UsageError("utility count != graph size");
  Tape tape;
  Tensor m(1, 1);
  m(0, 0) = mu;
  auto out = scl_message_passing(tape.constant(column_tensor(utilities)), tape.constant(m), graph, alpha, 1);
  return column_values(out.value());
}

std::vector<double> scl_probs_mp(std::span<const double> utilities, const AlternativeGraph& graph, double mu,
                                 const std::vector<std::map<NodeIndex, double>>& alpha) {
  return softmax(scl_utilities_mp(utilities, graph, mu, alpha));
}

// ---------------------------------------------------------------------------
// ChoiceModel

ChoiceModel::ChoiceModel(ModelSpec spec, AlternativeGraph graph, int num_features)
    : spec_(std::move(spec)), graph_(std::move(graph)), num_features_(num_features) {
  if (num_features_ < 1) throw UsageError("model needs at least one feature");
  if (graph_.num_nodes() < 2) throw UsageError("model needs at least two alternatives");
  if (auto* nl = std::get_if<NlSpec>(&spec_)) {
    if (nl->nests.mu.empty()) nl->nests.mu.assign(nl->nests.nests.size(), sigmoid_value(1.0));
    nl->nests.validate(graph_.num_nodes());
    nest_of_ = nl->nests.nest_of(graph_.num_nodes());
  }
  if (auto* scl = std::get_if<SclSpec>(&spec_)) {
    if (scl->initial_mu < 0.0 || scl->initial_mu > 1.0) throw UsageError("SCL initial mu must lie in (0,1]");
    equal_allocation(graph_); // rejects isolated alternatives
  }
  if (const auto* g = std::get_if<GnnSpec>(&spec_)) {
    g->validate();
    if (g->layers > 0 && g->update == UpdateKind::mpnn && g->aggregation == Aggregation::max)
      for (int i = 0; i < graph_.num_nodes(); ++i)
        if (graph_.degree(i) == 0)
          throw DataError("max aggregation needs every alternative to have a neighbor; " + std::to_string(i) + " is isolated");
  }
  init_params(0);
}

int ChoiceModel::receptive_hops() const {
  if (const auto* g = std::get_if<GnnSpec>(&spec_)) return g->layers;
  if (std::holds_alternative<MnlSpec>(spec_)) return 0;
  return 1;
}

void ChoiceModel::init_params(unsigned long long seed) {
  params_ = ParamStore{};
  std::mt19937_64 rng(seed);
  const Eigen::Index d = num_features_;
  if (!is_neural()) params_.add("b", Tensor::Zero(d, 1));
  if (const auto* nl = std::get_if<NlSpec>(&spec_)) {
    Tensor theta(static_cast<Eigen::Index>(nl->nests.mu.size()), 1);
    for (std::size_t k = 0; k < nl->nests.mu.size(); ++k) theta(static_cast<Eigen::Index>(k), 0) = logit(nl->nests.mu[k]);
    params_.add("theta", theta, true, Reparam::sigmoid);
  }
  if (const auto* scl = std::get_if<SclSpec>(&spec_)) {
    Tensor theta(1, 1);
    theta(0, 0) = scl->initial_mu > 0.0 ? logit(scl->initial_mu) : 1.0;
    params_.add("theta", theta, true, Reparam::sigmoid);
  }
  if (const auto* g = std::get_if<GnnSpec>(&spec_)) {
    const Eigen::Index h = g->hidden;
    for (int l = 0; l < g->embed_layers; ++l) {
      const Eigen::Index in = l == 0 ? d : h;
      params_.add(layer_name("embed", l, "W"), glorot_uniform(in, h, rng));
      params_.add(layer_name("embed", l, "b"), Tensor::Zero(1, h));
    }
    for (int k = 0; k < g->layers; ++k) {
      params_.add(layer_name("layer", k, "W"), glorot_uniform(h, h, rng));
      if (g->update == UpdateKind::gat) {
        // Each head's attention vector has 2 * (h / heads) entries.
        const double bound = std::sqrt(6.0 / (2.0 * static_cast<double>(h / g->heads()) + 1.0));
        std::uniform_real_distribution<double> u(-bound, bound);
        Tensor a_src(h, 1), a_dst(h, 1);
        for (Eigen::Index r = 0; r < h; ++r) a_src(r, 0) = u(rng);
        for (Eigen::Index r = 0; r < h; ++r) a_dst(r, 0) = u(rng);
        params_.add(layer_name("layer", k, "a_src"), a_src);
        params_.add(layer_name("layer", k, "a_dst"), a_dst);
      }
      if (g->skip) {
        params_.add(layer_name("layer", k, "gate_W"), glorot_uniform(h, h, rng));
        params_.add(layer_name("layer", k, "gate_b"), Tensor::Zero(1, h));
      }
    }
    params_.add("proj.w", glorot_uniform(h, 1, rng));
  }
}

Var ChoiceModel::forward_gnn(Tape& tape, const Binding& p, const Tensor& x, int batch, bool train,
                             std::mt19937_64* rng) const {
  const auto& g = std::get<GnnSpec>(spec_);
  if (train && g.dropout > 0.0 && rng == nullptr) throw UsageError("training forward pass needs a random generator");
  std::mt19937_64 unused(0);
  auto& gen = rng ? *rng : unused;
  auto h = tape.constant(x);
  for (int l = 0; l < g.embed_layers; ++l) {
    h = relu(add(matmul(h, p[layer_name("embed", l, "W")]), p[layer_name("embed", l, "b")]));
    h = dropout(h, g.dropout, train, gen);
  }
  if (g.layers > 0) {
    const bool self_loops = g.update != UpdateKind::mpnn;
    const auto edges = batch_edges(graph_, batch, self_loops);
    Tensor coef;
    if (g.update == UpdateKind::gcn) coef = gcn_coefficients(graph_, edges);
    for (int k = 0; k < g.layers; ++k) {
      const auto w = p[layer_name("layer", k, "W")];
      Var z;
      switch (g.update) {
      case UpdateKind::mpnn: z = mpnn_update(h, w, edges, g.aggregation); break;
      case UpdateKind::gcn: z = gcn_update(h, w, edges, coef); break;
      case UpdateKind::gat:
        z = gat_update(h, w, p[layer_name("layer", k, "a_src")], p[layer_name("layer", k, "a_dst")], edges, g.heads());
        break;
      }
      h = g.skip ? gated_skip(h, z, p[layer_name("layer", k, "gate_W")], p[layer_name("layer", k, "gate_b")]) : relu(z);
      h = dropout(h, g.dropout, train, gen);
    }
  }
  return matmul(h, p["proj.w"]);
}

Var ChoiceModel::utilities(Tape& tape, const Binding& p, const Tensor& x, int batch, bool train,
                           std::mt19937_64* rng) const {
  const int v = num_alternatives();
  if (x.rows() != static_cast<Eigen::Index>(batch) * v || x.cols() != num_features_)
    throw UsageError("batch shape does not match the model (" + std::to_string(x.rows()) + " x " +
                     std::to_string(x.cols()) + ")");
  Var u;
  if (is_neural()) {
    u = forward_gnn(tape, p, x, batch, train, rng);
  } else {
    auto v0 = matmul(tape.constant(x), p["b"]);
    if (std::holds_alternative<MnlSpec>(spec_)) u = v0;
    else if (std::holds_alternative<NlSpec>(spec_)) u = nl_message_passing(v0, sigmoid(p["theta"]), nest_of_, batch);
    else u = scl_message_passing(v0, sigmoid(p["theta"]), graph_, equal_allocation(graph_), batch);
  }
  return reshape(u, batch, v);
}

Var ChoiceModel::log_probs(Tape& tape, const Binding& p, const Tensor& x, int batch, bool train,
                           std::mt19937_64* rng) const {
  return log_softmax_rows(utilities(tape, p, x, batch, train, rng));
}

namespace {

Tensor household_tensor(std::span<const double> household, int v, int d) {
  if (household.size() != static_cast<std::size_t>(v) * d) throw UsageError("household block has the wrong size");
  return Eigen::Map<const Tensor>(household.data(), v, d);
}

} // namespace

std::vector<double> ChoiceModel::utilities(std::span<const double> household) const {
  Tape tape;
  auto p = params_.bind(tape, false);
  auto u = utilities(tape, p, household_tensor(household, num_alternatives(), num_features_), 1, false, nullptr);
  return column_values(u.value());
}

std::vector<double> ChoiceModel::probabilities(std::span<const double> household) const {
  Tape tape;
  auto p = params_.bind(tape, false);
  auto lp = log_probs(tape, p, household_tensor(household, num_alternatives(), num_features_), 1, false, nullptr);
  std::vector<double> out = column_values(lp.value());
  for (auto& x : out) x = std::exp(x);
  return out;
}

Tensor stack_households(const ChoiceDataset& ds, std::span<const int> households) {
  const Eigen::Index v = ds.num_alternatives;
  Tensor x(static_cast<Eigen::Index>(households.size()) * v, ds.num_features);
  for (std::size_t b = 0; b < households.size(); ++b) {
    auto h = ds.household(households[b]);
    std::copy(h.begin(), h.end(), x.data() + static_cast<Eigen::Index>(b) * v * ds.num_features);
  }
  return x;
}

Tensor ChoiceModel::predict(const ChoiceDataset& ds, std::span<const int> households) const {
  if (ds.num_alternatives != num_alternatives() || ds.num_features != num_features_)
    throw DataError("dataset shape does not match the model");
  std::vector<int> all;
  if (households.empty()) {
    all.resize(ds.num_households);
    for (int n = 0; n < ds.num_households; ++n) all[n] = n;
    households = all;
  }
  Tensor out(static_cast<Eigen::Index>(households.size()), num_alternatives());
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < households.size(); start += kChunk) {
    const auto count = std::min(kChunk, households.size() - start);
    Tape tape;
    auto p = params_.bind(tape, false);
    auto lp = log_probs(tape, p, stack_households(ds, households.subspan(start, count)), static_cast<int>(count), false,
                        nullptr);
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count)) = lp.value().array().exp().matrix();
  }
  return out;
}

std::vector<double> ChoiceModel::theta() const {
  if (!params_.has("theta")) return {};
  const auto& t = params_.at("theta").value;
  return std::vector<double>(t.data(), t.data() + t.size());
}

std::vector<double> ChoiceModel::mu() const {
  auto t = theta();
  for (auto& x : t) x = sigmoid_value(x);
  return t;
}

// ---------------------------------------------------------------------------
// Model files

void ChoiceModel::save(const std::string& path, const FeatureScaling& scaling) const {
  json edges = json::array();
  for (const auto& [a, b] : graph_.edges()) edges.push_back({a, b});
  json meta{{"spec", spec_to_json(spec_)},
            {"num_features", num_features_},
            {"graph", {{"num_nodes", graph_.num_nodes()}, {"edges", edges}}},
            {"scaling", scaling.to_json()}};
  const std::string text = meta.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file " + path);
  out.write(kModelMagic, sizeof kModelMagic);
  const std::uint32_t version = kModelVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  params_.write(out);
  if (!out) throw DataError("failed writing model file " + path);
}

ChoiceModel ChoiceModel::load(const std::string& path, FeatureScaling* scaling) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("model file not found: " + path);
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kModelMagic, sizeof magic) != 0) throw DataError(path + " is not a model file");
  if (version != kModelVersion) throw DataError(path + ": unsupported model version " + std::to_string(version));
  if (len > (1ull << 32)) throw DataError(path + ": corrupt header");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  json meta;
  try {
    meta = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(path + ": corrupt header: " + e.what());
  }
  std::vector<Edge> edges;
  for (const auto& e : meta.at("graph").at("edges")) edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  auto graph = AlternativeGraph::build(meta["graph"].at("num_nodes").get<int>(), edges);
  ChoiceModel model(spec_from_json(meta.at("spec")), std::move(graph), meta.at("num_features").get<int>());
  auto stored = ParamStore::read(in);
  for (const auto& [name, p] : model.params_.all()) {
    if (!stored.has(name)) throw DataError(path + ": missing parameter " + name);
    const auto& s = stored.at(name);
    if (s.value.rows() != p.value.rows() || s.value.cols() != p.value.cols())
      throw DataError(path + ": parameter " + name + " has the wrong shape");
  }
  if (stored.size() != model.params_.size()) throw DataError(path + ": unexpected parameters");
  model.params_ = std::move(stored);
  if (scaling) *scaling = FeatureScaling::from_json(meta.at("scaling"));
  return model;
}

} // namespace gnndcm
