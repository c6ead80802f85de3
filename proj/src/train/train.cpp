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

#include "train/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "common/error.hpp"

namespace gnndcm {

using namespace ad;
using nlohmann::json;

const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "lbfgs"; }

OptimizerKind TrainConfig::optimizer_for(const ModelSpec& spec) const {
  if (optimizer) return *optimizer;
  return std::holds_alternative<GnnSpec>(spec) ? OptimizerKind::adam : OptimizerKind::lbfgs;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw UsageError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw UsageError("dropout must be in [0,1)");
  if (max_epochs < 1) throw UsageError("max_epochs must be positive");
  if (patience < 1) throw UsageError("patience must be positive");
  if (max_iterations < 1) throw UsageError("max_iterations must be positive");
  if (!(gradient_tolerance > 0.0)) throw UsageError("gradient_tolerance must be positive");
  if (lbfgs_memory < 1) throw UsageError("lbfgs_memory must be positive");
}

json TrainConfig::to_json() const {
  json j{{"batch_size", batch_size},         {"learning_rate", learning_rate},
         {"dropout", dropout},               {"max_epochs", max_epochs},
         {"patience", patience},             {"seed", seed},
         {"max_iterations", max_iterations}, {"gradient_tolerance", gradient_tolerance},
         {"lbfgs_memory", lbfgs_memory}};
  j["optimizer"] = optimizer ? json(optimizer_name(*optimizer)) : json("auto");
  return j;
}

void TrainConfig::merge_json(const json& j) {
  if (!j.is_object()) throw UsageError("training config must be a JSON object");
  try {
    batch_size = j.value("batch_size", batch_size);
    learning_rate = j.value("learning_rate", learning_rate);
    dropout = j.value("dropout", dropout);
    max_epochs = j.value("max_epochs", max_epochs);
    patience = j.value("patience", patience);
    seed = j.value("seed", seed);
    max_iterations = j.value("max_iterations", max_iterations);
    gradient_tolerance = j.value("gradient_tolerance", gradient_tolerance);
    lbfgs_memory = j.value("lbfgs_memory", lbfgs_memory);
    if (j.contains("optimizer")) {
      const auto o = j["optimizer"].get<std::string>();
      if (o == "auto") optimizer.reset();
      else if (o == "adam") optimizer = OptimizerKind::adam;
      else if (o == "lbfgs" || o == "quasi-newton") optimizer = OptimizerKind::lbfgs;
      else throw UsageError("unknown optimizer '" + o + "' (adam, lbfgs)");
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("training config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Losses

namespace {

constexpr std::size_t kChunk = 256;

std::vector<int> all_households(const ChoiceDataset& ds) {
  std::vector<int> v(ds.num_households);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

IndexList chosen_of(const ChoiceDataset& ds, std::span<const int> households) {
  std::vector<int> c;
  c.reserve(households.size());
  for (int n : households) c.push_back(ds.chosen[n]);
  return make_index(std::move(c));
}

Var batch_loss(const ChoiceModel& model, Tape& tape, const Binding& p, const ChoiceDataset& ds,
               std::span<const int> households, bool train, std::mt19937_64* rng) {
  auto lp = model.log_probs(tape, p, stack_households(ds, households), static_cast<int>(households.size()), train, rng);
  return scale(sum_all(pick(lp, chosen_of(ds, households))), -1.0);
}

void append_grads(const Tape& tape, const Binding& p, const ParamStore& store, std::vector<double>& out, bool add) {
  std::size_t k = 0;
  for (const auto& [name, param] : store.all()) {
    if (!param.trainable) continue;
    const Tensor g = tape.grad(p[name]);
    for (Eigen::Index i = 0; i < g.size(); ++i, ++k) {
      if (add) out[k] += g.data()[i];
      else out[k] = g.data()[i];
    }
  }
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

} // namespace

double nll(const ChoiceModel& model, const ChoiceDataset& ds, std::span<const int> households) {
  std::vector<int> all;
  if (households.empty()) {
    all = all_households(ds);
    households = all;
  }
  double total = 0.0;
  for (std::size_t start = 0; start < households.size(); start += kChunk) {
    const auto part = households.subspan(start, std::min(kChunk, households.size() - start));
    Tape tape;
    auto p = model.params().bind(tape, false);
    total += batch_loss(model, tape, p, ds, part, false, nullptr).value()(0, 0);
  }
  if (!std::isfinite(total)) throw NumericalError("negative log-likelihood is not finite");
  return total;
}

double nll_gradient(const ChoiceModel& model, const ChoiceDataset& ds, std::vector<double>& grad) {
  const auto households = all_households(ds);
  grad.assign(model.params().num_trainable(), 0.0);
  double total = 0.0;
  for (std::size_t start = 0; start < households.size(); start += kChunk) {
    const auto part = std::span<const int>(households).subspan(start, std::min(kChunk, households.size() - start));
    Tape tape;
    auto p = model.params().bind(tape, true);
    auto loss = batch_loss(model, tape, p, ds, part, false, nullptr);
    tape.backward(loss);
    total += loss.value()(0, 0);
    append_grads(tape, p, model.params(), grad, true);
  }
  if (!std::isfinite(total)) throw NumericalError("negative log-likelihood is not finite");
  return total;
}

void Adam::step(std::vector<double>& x, const std::vector<double>& g) {
  if (m_.empty()) {
    m_.assign(x.size(), 0.0);
    v_.assign(x.size(), 0.0);
  }
  if (g.size() != x.size() || m_.size() != x.size()) throw UsageError("Adam state size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < x.size(); ++i) {
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * g[i];
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * g[i] * g[i];
    x[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

// ---------------------------------------------------------------------------
// Optimizers

namespace {

void run_adam(ChoiceModel& model, const ChoiceDataset& train, const TrainConfig& config, int batch_size,
              FitResult& result) {
  std::mt19937_64 rng(config.seed);
  auto& store = model.params();
  std::vector<double> x = store.flat_values();
  std::vector<double> g(x.size());
  std::vector<double> best_x = x;
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  Adam adam(config.learning_rate);
  auto order = all_households(train);
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    // Explicit Fisher-Yates keeps the order independent of the library.
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
      std::swap(order[i], order[static_cast<int>(rng() % static_cast<unsigned long long>(i + 1))]);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
      const auto part = std::span<const int>(order).subspan(
          start, std::min(static_cast<std::size_t>(batch_size), order.size() - start));
      Tape tape;
      auto p = store.bind(tape, true);
      auto loss = batch_loss(model, tape, p, train, part, true, &rng);
      tape.backward(loss);
      append_grads(tape, p, store, g, false);
      adam.step(x, g);
      store.set_flat_values(x);
    }
    const double f = nll(model, train);
    result.loss_trace.push_back(f);
    ++result.iterations;
    if (f < best) {
      best = f;
      best_x = x;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  store.set_flat_values(best_x);
}

// Returns false when the line search could not make progress.
bool run_lbfgs(ChoiceModel& model, const ChoiceDataset& train, const TrainConfig& config, FitResult& result) {
  auto& store = model.params();
  std::vector<double> x = store.flat_values();
  std::vector<double> g;
  double f = nll_gradient(model, train, g);
  result.loss_trace.push_back(f);
  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  const std::size_t n = x.size();
  std::vector<double> d(n), x_new(n), g_new;
  for (int it = 0; it < config.max_iterations; ++it) {
    if (max_abs(g) < config.gradient_tolerance) {
      result.converged = true;
      return true;
    }
    // Two-loop recursion.
    std::vector<double> q = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * dot(s_hist[k], q);
      for (std::size_t i = 0; i < n; ++i) q[i] -= alpha[k] * y_hist[k][i];
    }
    double gamma = 1.0;
    if (!s_hist.empty()) gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
    for (std::size_t i = 0; i < n; ++i) q[i] *= gamma;
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * dot(y_hist[k], q);
      for (std::size_t i = 0; i < n; ++i) q[i] += s_hist[k][i] * (alpha[k] - beta);
    }
    for (std::size_t i = 0; i < n; ++i) d[i] = -q[i];
    double gd = dot(g, d);
    if (!(gd < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
      gd = dot(g, d);
    }
    double step = s_hist.empty() ? std::min(1.0, 1.0 / std::max(max_abs(g), 1e-300)) : 1.0;
    // Rounding noise in a sum over many households; steps that only move
    // the loss within it are accepted when they shrink the gradient.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f));
    bool accepted = false;
    double f_new = 0.0;
    for (int tries = 0; tries < 60; ++tries) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + step * d[i];
      store.set_flat_values(x_new);
      try {
        f_new = nll_gradient(model, train, g_new);
      } catch (const NumericalError&) {
        step *= 0.5;
        continue;
      }
      if (f_new <= f + 1e-4 * step * gd) {
        accepted = true;
        break;
      }
      if (std::abs(f_new - f) <= noise && max_abs(g_new) < max_abs(g)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      store.set_flat_values(x);
      return false;
    }
    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - x[i];
      y[i] = g_new[i] - g[i];
    }
    const double sy = dot(s, y);
    if (sy > 0.0) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > config.lbfgs_memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    x = x_new;
    f = f_new;
    g = g_new;
    result.loss_trace.push_back(f);
    ++result.iterations;
  }
  result.converged = max_abs(g) < config.gradient_tolerance;
  return true;
}

} // namespace

FitResult fit(ChoiceModel& model, const ChoiceDataset& train, const TrainConfig& config) {
  config.validate();
  if (train.num_households < 1) throw DataError("training set is empty");
  if (train.num_alternatives != model.num_alternatives() || train.num_features != model.num_features())
    throw DataError("training data shape does not match the model");
  const auto start = std::chrono::steady_clock::now();
  FitResult result;
  const auto kind = config.optimizer_for(model.spec());
  result.optimizer = optimizer_name(kind);
  if (kind == OptimizerKind::adam) {
    run_adam(model, train, config, config.batch_size, result);
  } else if (!run_lbfgs(model, train, config, result)) {
    if (std::holds_alternative<MnlSpec>(model.spec())) {
      result.notes.push_back("line search stalled before the gradient tolerance was reached");
    } else {
      result.notes.push_back("line search stalled; continued with full-batch adam");
      result.optimizer = "lbfgs+adam";
      run_adam(model, train, config, train.num_households, result);
    }
  }
  std::vector<double> g;
  result.train_nll = nll_gradient(model, train, g);
  result.gradient_max_norm = max_abs(g);
  if (kind == OptimizerKind::adam) result.converged = false;
  const auto mu = model.mu();
  const auto theta = model.theta();
  for (std::size_t k = 0; k < mu.size(); ++k) {
    if (mu[k] > 0.999) {
      std::ostringstream note;
      note << "mu[" << k << "] = sigmoid(" << theta[k] << ") > 0.999: the dissimilarity sits at the MNL boundary";
      result.notes.push_back(note.str());
    }
  }
  if (std::holds_alternative<MnlSpec>(model.spec())) {
    try {
      result.stats = mnl_inference_stats(model, train);
    } catch (const NumericalError& e) {
      result.notes.push_back(std::string("no standard errors: ") + e.what());
    }
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

InferenceStats mnl_inference_stats(const ChoiceModel& model, const ChoiceDataset& ds) {
  if (!std::holds_alternative<MnlSpec>(model.spec())) throw UsageError("standard errors are only computed for MNL");
  ChoiceModel probe = model;
  const auto b0 = model.params().flat_values();
  const auto d = b0.size();
  Eigen::MatrixXd h(d, d);
  std::vector<double> gp, gm;
  for (std::size_t k = 0; k < d; ++k) {
    const double step = 1e-5 * std::max(1.0, std::abs(b0[k]));
    auto b = b0;
    b[k] = b0[k] + step;
    probe.params().set_flat_values(b);
    nll_gradient(probe, ds, gp);
    b[k] = b0[k] - step;
    probe.params().set_flat_values(b);
    nll_gradient(probe, ds, gm);
    for (std::size_t r = 0; r < d; ++r) h(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = (gp[r] - gm[r]) / (2.0 * step);
  }
  const Eigen::MatrixXd sym = 0.5 * (h + h.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const auto& lambda = eig.eigenvalues();
  if (!(lambda.maxCoeff() > 0.0) || lambda.minCoeff() <= 1e-8 * lambda.maxCoeff())
    throw NumericalError("information matrix is singular (collinear or constant features?)");
  const Eigen::MatrixXd inv = eig.eigenvectors() * lambda.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  InferenceStats s;
  s.coefficients = b0;
  for (std::size_t k = 0; k < d; ++k) {
    const double se = std::sqrt(inv(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)));
    s.standard_errors.push_back(se);
    s.t_stats.push_back(b0[k] / se);
  }
  return s;
}

} // namespace gnndcm
