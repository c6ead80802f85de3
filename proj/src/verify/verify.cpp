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

#include "verify/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "common/error.hpp"
#include "interpret/interpret.hpp"
#include "models/logit.hpp"
#include "train/train.hpp"

namespace gnndcm {

AlternativeGraph random_connected_graph(int num_nodes, std::mt19937_64& rng, double extra) {
  std::vector<Edge> edges;
  std::vector<int> order(num_nodes);
  std::iota(order.begin(), order.end(), 0);
  for (int i = num_nodes - 1; i > 0; --i) std::swap(order[i], order[static_cast<int>(rng() % static_cast<unsigned>(i + 1))]);
  for (int k = 1; k < num_nodes; ++k) {
    const int parent = order[static_cast<int>(rng() % static_cast<unsigned>(k))];
    edges.emplace_back(order[k], parent);
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < num_nodes; ++i)
    for (int j = i + 1; j < num_nodes; ++j)
      if (u(rng) < extra) edges.emplace_back(i, j);
  return AlternativeGraph::build(num_nodes, edges);
}

void randomize_params(ChoiceModel& model, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  auto x = model.params().flat_values();
  for (auto& v : x) v += u(rng);
  model.params().set_flat_values(x);
}

GradientCheck gradient_check(const ChoiceModel& model, const ChoiceDataset& ds, double h, double floor) {
  std::vector<double> g;
  nll_gradient(model, ds, g);
  ChoiceModel probe = model;
  const auto x0 = model.params().flat_values();
  GradientCheck r;
  r.elements = static_cast<int>(x0.size());
  for (std::size_t k = 0; k < x0.size(); ++k) {
    auto x = x0;
    const double step = h * std::max(1.0, std::abs(x0[k]));
    x[k] = x0[k] + step;
    probe.params().set_flat_values(x);
    const double fp = nll(probe, ds);
    x[k] = x0[k] - step;
    probe.params().set_flat_values(x);
    const double fm = nll(probe, ds);
    const double fd = (fp - fm) / (2.0 * step);
    const double diff = std::abs(fd - g[k]);
    r.max_error = std::max(r.max_error, diff / (std::abs(fd) + floor));
    const double strict = diff / (std::abs(fd) + 1e-8);
    r.max_strict_error = std::max(r.max_strict_error, strict);
    if (strict >= 1e-5) ++r.strict_violations;
  }
  return r;
}

std::string SuiteResult::line() const {
  std::string s = name + (passed ? " OK" : " FAIL");
  if (!detail.empty()) s += " " + detail;
  return s;
}

NlWorkedExample nl_worked_example(double mu1, double mu2) {
  NlWorkedExample r;
  r.utilities = {-10.0, -11.0, -12.0, -13.0, -14.0};
  NestStructure nests{{{0, 1, 2}, {3, 4}}, {mu1, mu2}};
  r.closed = nl_probs_closed(r.utilities, nests);
  r.message_passing = nl_probs_mp(r.utilities, nests);
  r.utilities = nl_utilities_mp(r.utilities, nests);
  return r;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::vector<double> random_utilities(int v, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> b(-2.0, 2.0);
  std::normal_distribution<double> x(0.0, 1.0);
  std::vector<double> u(v, 0.0);
  const int d = 3;
  double coef[d];
  for (auto& c : coef) c = b(rng);
  for (int i = 0; i < v; ++i)
    for (int k = 0; k < d; ++k) u[i] += coef[k] * x(rng);
  return u;
}

NestStructure random_nests(int v, int k, std::mt19937_64& rng) {
  NestStructure n;
  n.nests.resize(k);
  for (int i = 0; i < v; ++i) n.nests[i < k ? i : static_cast<int>(rng() % static_cast<unsigned>(k))].push_back(i);
  for (auto& m : n.nests) std::sort(m.begin(), m.end());
  std::uniform_real_distribution<double> mu(0.1, 1.0);
  for (int j = 0; j < k; ++j) n.mu.push_back(mu(rng));
  return n;
}

SuiteResult nl_worked_example_suite() {
  SuiteResult s;
  const auto r = nl_worked_example(0.8, 0.9);
  const double expected_v[] = {-10.063, -11.313, -12.563, -13.028, -14.140};
  double v_err = 0.0;
  for (int i = 0; i < 5; ++i) v_err = std::max(v_err, std::abs(r.utilities[i] - expected_v[i]));
  const bool ok = std::abs(r.closed[0] - 0.6959) < 5e-5 && std::abs(r.message_passing[0] - 0.6959) < 5e-5 && v_err < 5e-4;
  s.name = "nl-worked-example P1=" + fmt("%.4f", r.message_passing[0]);
  s.passed = ok;
  std::ostringstream d;
  d << "closed=" << fmt("%.6f", r.closed[0]) << " mp=" << fmt("%.6f", r.message_passing[0]) << " V=(";
  for (int i = 0; i < 5; ++i) d << (i ? "," : "") << fmt("%.4f", r.utilities[i]);
  d << ")";
  s.detail = d.str();
  return s;
}

SuiteResult nl_equivalence(int trials, std::mt19937_64& rng) {
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const int v = 4 + static_cast<int>(rng() % 9);
    const int k = 1 + static_cast<int>(rng() % 3);
    const auto u = random_utilities(v, rng);
    const auto nests = random_nests(v, k, rng);
    worst = std::max(worst, max_diff(nl_probs_closed(u, nests), nl_probs_mp(u, nests)));
  }
  return {"nl-equivalence", worst < 1e-10, "trials=" + std::to_string(trials) + " max_abs_diff=" + fmt("%.3g", worst)};
}

SuiteResult scl_equivalence(int trials, bool fault, std::mt19937_64& rng) {
  double worst = 0.0;
  const double mus[] = {0.3, 0.6, 0.9};
  for (int t = 0; t < trials; ++t) {
    const int v = 4 + static_cast<int>(rng() % 9);
    const auto g = random_connected_graph(v, rng);
    const auto u = random_utilities(v, rng);
    const double mu = mus[t % 3];
    const auto alpha = equal_allocation(g);
    auto alpha_mp = alpha;
    if (fault) {
      auto it = alpha_mp[0].begin();
      it->second *= 1.5;
    }
    worst = std::max(worst, max_diff(scl_probs_closed(u, g, mu, alpha), scl_probs_mp(u, g, mu, alpha_mp)));
  }
  std::string detail = "trials=" + std::to_string(trials) + " max_abs_diff=" + fmt("%.3g", worst);
  if (fault) detail += " (allocation fault injected)";
  return {"scl-equivalence", worst < 1e-10, detail};
}

SuiteResult limits(int trials, std::mt19937_64& rng) {
  double nl_err = 0.0, scl_err = 0.0, single_err = 0.0;
  for (int t = 0; t < trials; ++t) {
    const int v = 4 + static_cast<int>(rng() % 9);
    const auto u = random_utilities(v, rng);
    const auto mnl = mnl_probs(u);
    auto nests = random_nests(v, 1 + static_cast<int>(rng() % 3), rng);
    std::fill(nests.mu.begin(), nests.mu.end(), 1.0);
    nl_err = std::max({nl_err, max_diff(nl_probs_closed(u, nests), mnl), max_diff(nl_probs_mp(u, nests), mnl)});
    const auto g = random_connected_graph(v, rng);
    const auto alpha = equal_allocation(g);
    scl_err = std::max({scl_err, max_diff(scl_probs_closed(u, g, 1.0, alpha), mnl), max_diff(scl_probs_mp(u, g, 1.0, alpha), mnl)});
    std::vector<NodeIndex> all(v);
    std::iota(all.begin(), all.end(), 0);
    // A single nest is a logit on V / mu.
    NestStructure one{{all}, {0.5}};
    std::vector<double> scaled(u);
    for (auto& x : scaled) x /= 0.5;
    const auto mnl_scaled = mnl_probs(scaled);
    single_err = std::max({single_err, max_diff(nl_probs_closed(u, one), mnl_scaled), max_diff(nl_probs_mp(u, one), mnl_scaled)});
  }
  const double worst = std::max({nl_err, scl_err, single_err});
  return {"mu1-limits", worst < 1e-12,
          "nl=" + fmt("%.3g", nl_err) + " scl=" + fmt("%.3g", scl_err) + " single-nest=" + fmt("%.3g", single_err)};
}

SynthResult small_data(int households, int v, int d, std::mt19937_64& rng, GeneratorModel gen = GeneratorModel::mnl) {
  SynthConfig c;
  c.num_households = households;
  c.num_alternatives = v;
  c.num_features = d;
  c.generator = gen;
  c.mu = 0.6;
  c.seed = rng();
  c.graph = random_connected_graph(v, rng);
  return synthesize(c);
}

SuiteResult iia(int trials, std::mt19937_64& rng) {
  double worst = 0.0;
  std::normal_distribution<double> z(0.0, 1.0);
  for (int t = 0; t < trials; ++t) {
    auto s = small_data(1, 6, 3, rng);
    ChoiceModel m(MnlSpec{}, s.graph, 3);
    randomize_params(m, rng, 1.0);
    auto h = std::vector<double>(s.dataset.household(0).begin(), s.dataset.household(0).end());
    const auto p = m.probabilities(h);
    for (int d = 0; d < 3; ++d) h[static_cast<std::size_t>(5) * 3 + d] += z(rng);
    const auto q = m.probabilities(h);
    for (int i = 0; i < 5; ++i)
      for (int k = 0; k < 5; ++k) worst = std::max(worst, std::abs(p[i] / p[k] - q[i] / q[k]) / (p[i] / p[k]));
  }
  return {"mnl-iia", worst < 1e-12, "max_rel_ratio_change=" + fmt("%.3g", worst)};
}

GnnSpec small_gnn(int layers, UpdateKind u, ad::Aggregation a, int hidden, bool skip) {
  GnnSpec g;
  g.layers = layers;
  g.update = u;
  g.aggregation = a;
  g.hidden = hidden;
  g.skip = skip;
  g.dropout = 0.0;
  return g;
}

SuiteResult locality(int trials, std::mt19937_64& rng) {
  int violations = 0, checks = 0;
  std::normal_distribution<double> z(0.0, 1.0);
  const UpdateKind kinds[] = {UpdateKind::mpnn, UpdateKind::gcn, UpdateKind::gat};
  for (int t = 0; t < trials; ++t) {
    const int layers = t % 4; // includes the ASU-DNN case
    auto s = small_data(1, 10, 3, rng);
    ChoiceModel m(small_gnn(layers, kinds[t % 3], ad::Aggregation::sum, 8, t % 2 == 0), s.graph, 3);
    m.init_params(rng());
    const int j = static_cast<int>(rng() % 10);
    const auto near = khop_neighbors(s.graph, j, layers);
    auto h = std::vector<double>(s.dataset.household(0).begin(), s.dataset.household(0).end());
    const auto before = m.utilities(h);
    for (int i = 0; i < 10; ++i) {
      if (i == j || std::binary_search(near.begin(), near.end(), i)) continue;
      for (int d = 0; d < 3; ++d) h[static_cast<std::size_t>(i) * 3 + d] += z(rng);
    }
    const auto after = m.utilities(h);
    ++checks;
    if (after[j] != before[j]) ++violations;
  }
  return {"gnn-locality", violations == 0,
          "checks=" + std::to_string(checks) + " non-identical=" + std::to_string(violations)};
}

SuiteResult khop_constancy(int trials, std::mt19937_64& rng) {
  double worst_gnn = 0.0, worst_mnl = 0.0;
  int nonvacuous = 0;
  for (int t = 0; t < trials; ++t) {
    auto s = small_data(1, 12, 3, rng);
    // Strictly positive attribute so relative elasticities are defined.
    for (int i = 0; i < 12; ++i) s.dataset.feature(0, i, 0) = 1.0 + std::abs(s.dataset.feature(0, i, 0));
    const int j = static_cast<int>(rng() % 12);
    const int layers = 1 + t % 3;
    ChoiceModel g(small_gnn(layers, UpdateKind::mpnn, ad::Aggregation::sum, 8, true), s.graph, 3);
    g.init_params(rng());
    const auto rg = khop_constancy_check(elasticity(g, s.dataset, 0, j, s.dataset.feature_names[0]), 1e-8);
    if (!rg.vacuous) {
      ++nonvacuous;
      worst_gnn = std::max(worst_gnn, rg.outside_spread);
    }
    ChoiceModel m(MnlSpec{}, s.graph, 3);
    randomize_params(m, rng, 1.0);
    const auto e = elasticity(m, s.dataset, 0, j, s.dataset.feature_names[0]);
    double lo = INFINITY, hi = -INFINITY;
    for (int i = 0; i < 12; ++i)
      if (i != j) {
        lo = std::min(lo, e.values[i]);
        hi = std::max(hi, e.values[i]);
      }
    worst_mnl = std::max(worst_mnl, hi - lo);
  }
  return {"khop-constancy", worst_gnn < 1e-8 && worst_mnl < 1e-10,
          "gnn_outside_spread=" + fmt("%.3g", worst_gnn) + " (" + std::to_string(nonvacuous) +
              " non-vacuous) mnl_cross_spread=" + fmt("%.3g", worst_mnl)};
}

SuiteResult gradients(int trials, std::mt19937_64& rng) {
  std::vector<std::pair<std::string, ModelSpec>> families = {
      {"mnl", MnlSpec{}},
      {"nl", NlSpec{}},
      {"scl", SclSpec{}},
      {"asu-dnn", small_gnn(0, UpdateKind::mpnn, ad::Aggregation::sum, 8, true)},
      {"mpnn-sum", small_gnn(2, UpdateKind::mpnn, ad::Aggregation::sum, 8, true)},
      {"mpnn-mean", small_gnn(2, UpdateKind::mpnn, ad::Aggregation::mean, 8, false)},
      {"mpnn-max", small_gnn(2, UpdateKind::mpnn, ad::Aggregation::max, 8, true)},
      {"mpnn-lse", small_gnn(2, UpdateKind::mpnn, ad::Aggregation::lse, 8, true)},
      {"gcn", small_gnn(2, UpdateKind::gcn, ad::Aggregation::sum, 8, true)},
      {"gat", small_gnn(2, UpdateKind::gat, ad::Aggregation::sum, 16, true)},
  };
  double worst = 0.0, worst_strict = 0.0;
  int strict_violations = 0, elements = 0;
  std::string worst_family;
  for (auto& [name, spec] : families) {
    for (int t = 0; t < trials; ++t) {
      auto s = small_data(3, 6, 3, rng);
      if (auto* nl = std::get_if<NlSpec>(&spec)) nl->nests = NestStructure{{{0, 1, 2}, {3, 4, 5}}, {}};
      ChoiceModel m(spec, s.graph, 3);
      m.init_params(rng());
      randomize_params(m, rng, 0.5);
      const auto e = gradient_check(m, s.dataset);
      worst_strict = std::max(worst_strict, e.max_strict_error);
      strict_violations += e.strict_violations;
      elements += e.elements;
      if (e.max_error > worst) {
        worst = e.max_error;
        worst_family = name;
      }
    }
  }
  return {"gradients", worst < 1e-5,
          "families=" + std::to_string(families.size()) + " trials=" + std::to_string(trials) +
              " max_rel_err=" + fmt("%.3g", worst) + (worst_family.empty() ? "" : " (" + worst_family + ")") +
              " strict_guard_max=" + fmt("%.3g", worst_strict) + " strict_guard_over=" +
              std::to_string(strict_violations) + "/" + std::to_string(elements)};
}

} // namespace

std::vector<SuiteResult> run_verify(const VerifyOptions& options) {
  if (options.trials < 1) throw UsageError("trials must be positive");
  std::mt19937_64 rng(options.seed);
  const int t = options.trials;
  const int few = std::max(1, t / 50);
  std::vector<SuiteResult> out;
  out.push_back(nl_worked_example_suite());
  out.push_back(nl_equivalence(t, rng));
  out.push_back(scl_equivalence(t, options.inject_scl_alpha_fault, rng));
  out.push_back(limits(std::max(1, t / 10), rng));
  out.push_back(iia(std::max(1, t / 10), rng));
  out.push_back(locality(std::max(4, t / 10), rng));
  out.push_back(khop_constancy(std::max(3, few), rng));
  out.push_back(gradients(std::max(1, few / 4), rng));
  return out;
}

} // namespace gnndcm
