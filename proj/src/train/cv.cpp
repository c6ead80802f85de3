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

#include "train/cv.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "common/csv.hpp"
#include "common/error.hpp"
#include "common/hash.hpp"

namespace gnndcm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

GnnSpec gnn(UpdateKind u, ad::Aggregation a, int layers, int hidden, bool skip, double dropout) {
  GnnSpec g;
  g.update = u;
  g.aggregation = a;
  g.layers = layers;
  g.hidden = hidden;
  g.skip = skip;
  g.dropout = dropout;
  return g;
}

} // namespace

std::vector<GridEntry> preset_grid(const std::string& name, const TrainConfig& train) {
  using ad::Aggregation;
  std::vector<GridEntry> grid;
  const double p = train.dropout;
  if (name == "table4") {
    grid.push_back({"MNL", MnlSpec{}, "", "MNL"});
    grid.push_back({"SCL", SclSpec{}, "", "SCL"});
    grid.push_back({"ASU-DNN", gnn(UpdateKind::gat, Aggregation::sum, 0, 64, true, p), "", "ASU-DNN"});
    for (int k = 1; k <= 3; ++k) {
      const auto label = "GNN (" + std::to_string(k) + (k == 1 ? " layer)" : " layers)");
      grid.push_back({label, gnn(UpdateKind::gat, Aggregation::sum, k, 64, true, p), "", label});
    }
    return grid;
  }
  if (name == "table5") {
    struct Row {
      const char* name;
      UpdateKind update;
      Aggregation agg;
    };
    const Row rows[] = {{"MPNN/Sum", UpdateKind::mpnn, Aggregation::sum}, {"MPNN/Max", UpdateKind::mpnn, Aggregation::max},
                        {"MPNN/Mean", UpdateKind::mpnn, Aggregation::mean}, {"MPNN/LSE", UpdateKind::mpnn, Aggregation::lse},
                        {"GCN/Sum", UpdateKind::gcn, Aggregation::sum},     {"GAT/Sum", UpdateKind::gat, Aggregation::sum}};
    for (const auto& r : rows) {
      auto add = [&](const std::string& column, int layers, int hidden, bool skip) {
        grid.push_back({std::string(r.name) + " " + column, gnn(r.update, r.agg, layers, hidden, skip, p), r.name, column});
      };
      add("K_g=1", 1, 64, true);
      add("K_g=2", 2, 64, true);
      add("K_g=3", 3, 64, true);
      add("h=1", 2, 1, true);
      add("h=16", 2, 16, true);
      add("h=32", 2, 32, true);
      add("h=128", 2, 128, true);
      add("w/o skip", 2, 64, false);
    }
    return grid;
  }
  throw UsageError("unknown grid preset '" + name + "' (table4, table5)");
}

std::vector<GridEntry> grid_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw UsageError("model grid must be a non-empty array");
  std::vector<GridEntry> grid;
  for (const auto& e : j) {
    GridEntry g;
    g.spec = spec_from_json(e);
    g.label = e.value("label", model_label(g.spec));
    g.row = e.value("row", std::string());
    g.column = e.value("column", std::string());
    grid.push_back(std::move(g));
  }
  return grid;
}

json CvConfig::to_json() const {
  json g = json::array();
  for (const auto& e : grid) {
    auto s = spec_to_json(e.spec);
    s["label"] = e.label;
    if (!e.row.empty()) s["row"] = e.row;
    if (!e.column.empty()) s["column"] = e.column;
    g.push_back(std::move(s));
  }
  json j{{"grid", g}, {"folds", folds}, {"train", train.to_json()}};
  if (!preset.empty()) j["preset"] = preset;
  return j;
}

std::uint64_t CvConfig::hash() const { return fnv1a64(to_json().dump()); }

CvReport cross_validate(const ChoiceDataset& ds, const AlternativeGraph& graph, const CvConfig& config,
                        const std::string& model_dir) {
  if (config.grid.empty()) throw UsageError("empty model grid");
  if (config.jobs < 1) throw UsageError("jobs must be positive");
  config.train.validate();
  if (graph.num_nodes() != ds.num_alternatives) throw DataError("graph size does not match the alternative count");
  CvReport report;
  report.plan = make_folds(ds.num_households, config.folds, config.train.seed);
  report.config_hash = config.hash();
  report.seed = config.train.seed;
  report.preset = config.preset;
  const int num_cfg = static_cast<int>(config.grid.size());
  const int k = config.folds;
  report.rows.resize(num_cfg);
  for (int c = 0; c < num_cfg; ++c) {
    report.rows[c].entry = config.grid[c];
    report.rows[c].folds.resize(k);
  }
  if (config.save_models) fs::create_directories(model_dir);

  auto run_cell = [&](int c, int f) {
    auto& out = report.rows[c].folds[f];
    out.seed = mix_seed(config.train.seed, static_cast<std::uint64_t>(f));
    try {
      if (config.inject_fold_failure && config.inject_fold_failure->first == c && config.inject_fold_failure->second == f)
        throw NumericalError("injected fold failure");
      const auto train_idx = report.plan.train_indices(f);
      const auto test_idx = report.plan.test_indices(f);
      const auto train = ds.subset(train_idx);
      const auto test = ds.subset(test_idx);
      ChoiceModel model(config.grid[c].spec, graph, ds.num_features);
      model.init_params(out.seed);
      auto tc = config.train;
      tc.seed = out.seed;
      auto fr = fit(model, train, tc);
      out.optimizer = fr.optimizer;
      out.loss_trace = fr.loss_trace;
      out.metrics = evaluate(model, test);
      out.metrics.train_log_likelihood = -fr.train_nll;
      if (config.save_models)
        model.save((fs::path(model_dir) / ("config" + std::to_string(c) + "-fold" + std::to_string(f) + ".bin")).string(),
                   FeatureScaling::of(ds));
      out.ok = true;
    } catch (const std::exception& e) {
      out.ok = false;
      out.error = e.what();
    }
  };

  const int cells = num_cfg * k;
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int cell = next++; cell < cells; cell = next++) run_cell(cell / k, cell % k);
  };
  const int threads = std::min(config.jobs, cells);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (auto& row : report.rows) {
    std::vector<MetricReport> ok;
    for (const auto& f : row.folds)
      if (f.ok) ok.push_back(f.metrics);
    row.folds_ok = static_cast<int>(ok.size());
    row.mean = MetricReport::mean(ok);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Output files

namespace {

std::string num(double v) { return std::isfinite(v) ? format_double(v) : std::string("nan"); }

std::string csv_field(std::string s) {
  for (auto& ch : s)
    if (ch == ',' || ch == '\n') ch = ';';
  return s;
}

std::ofstream open_csv(const fs::path& p, const CvReport& r) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << "# config_hash=" << hex64(r.config_hash) << " seed=" << r.seed << '\n';
  return out;
}

std::string status_of(const CvRow& row) {
  if (!row.failed()) return "ok";
  for (std::size_t f = 0; f < row.folds.size(); ++f)
    if (!row.folds[f].ok) return "failed (fold " + std::to_string(f) + ": " + csv_field(row.folds[f].error) + ")";
  return "failed";
}

} // namespace

void write_cv_outputs(const CvReport& report, const CvConfig& config, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path root(dir);
  {
    auto out = open_csv(root / "metrics.csv", report);
    out << "config,label,family,status,folds_ok,test_log_likelihood,train_log_likelihood,accuracy,top5_accuracy,"
           "avg_distance_km,macro_f1,mrr\n";
    for (std::size_t c = 0; c < report.rows.size(); ++c) {
      const auto& row = report.rows[c];
      const auto& m = row.mean;
      out << c << ',' << csv_field(row.entry.label) << ',' << model_family(row.entry.spec) << ',' << status_of(row) << ','
          << row.folds_ok << ',' << num(m.log_likelihood) << ',' << num(m.train_log_likelihood) << ',' << num(m.accuracy)
          << ',' << num(m.top5_accuracy) << ',' << num(m.avg_distance_km) << ',' << num(m.macro_f1) << ',' << num(m.mrr)
          << '\n';
    }
  }
  {
    auto out = open_csv(root / "folds.csv", report);
    out << "config,fold,seed,status,optimizer,households,test_log_likelihood,train_log_likelihood,accuracy,"
           "top5_accuracy,avg_distance_km,macro_f1,mrr\n";
    for (std::size_t c = 0; c < report.rows.size(); ++c) {
      for (std::size_t f = 0; f < report.rows[c].folds.size(); ++f) {
        const auto& o = report.rows[c].folds[f];
        const auto& m = o.metrics;
        out << c << ',' << f << ',' << o.seed << ',' << (o.ok ? std::string("ok") : "failed: " + csv_field(o.error)) << ','
            << o.optimizer << ',';
        if (o.ok)
          out << m.households << ',' << num(m.log_likelihood) << ',' << num(m.train_log_likelihood) << ','
              << num(m.accuracy) << ',' << num(m.top5_accuracy) << ',' << num(m.avg_distance_km) << ','
              << num(m.macro_f1) << ',' << num(m.mrr);
        else
          out << ",,,,,,,";
        out << '\n';
      }
    }
  }
  {
    auto out = open_csv(root / "loss_trace.csv", report);
    out << "config,fold,step,loss\n";
    for (std::size_t c = 0; c < report.rows.size(); ++c)
      for (std::size_t f = 0; f < report.rows[c].folds.size(); ++f) {
        const auto& t = report.rows[c].folds[f].loss_trace;
        for (std::size_t s = 0; s < t.size(); ++s) out << c << ',' << f << ',' << s << ',' << num(t[s]) << '\n';
      }
  }
  // Pivot of accuracy for grid-shaped runs.
  std::vector<std::string> row_names, col_names;
  std::map<std::pair<std::string, std::string>, const CvRow*> cells;
  for (const auto& row : report.rows) {
    if (row.entry.row.empty() || row.entry.column.empty()) continue;
    if (std::find(row_names.begin(), row_names.end(), row.entry.row) == row_names.end()) row_names.push_back(row.entry.row);
    if (std::find(col_names.begin(), col_names.end(), row.entry.column) == col_names.end())
      col_names.push_back(row.entry.column);
    cells[{row.entry.row, row.entry.column}] = &row;
  }
  if (!row_names.empty()) {
    auto out = open_csv(root / "table5.csv", report);
    out << "model,aggregation";
    for (const auto& c : col_names) out << ',' << csv_field(c);
    out << '\n';
    for (const auto& r : row_names) {
      const auto slash = r.find('/');
      out << r.substr(0, slash) << ',' << (slash == std::string::npos ? "" : r.substr(slash + 1));
      for (const auto& c : col_names) {
        auto it = cells.find({r, c});
        out << ',';
        if (it == cells.end()) continue;
        out << (it->second->failed() ? std::string("failed") : num(it->second->mean.accuracy));
      }
      out << '\n';
    }
  } else if (config.preset == "table4") {
    auto out = open_csv(root / "table4.csv", report);
    out << "metric";
    for (const auto& row : report.rows) out << ',' << csv_field(row.entry.label);
    out << '\n';
    auto line = [&](const char* name, auto get) {
      out << name;
      for (const auto& row : report.rows) out << ',' << (row.failed() ? std::string("failed") : num(get(row.mean)));
      out << '\n';
    };
    line("test_log_likelihood", [](const MetricReport& m) { return m.log_likelihood; });
    line("train_log_likelihood", [](const MetricReport& m) { return m.train_log_likelihood; });
    line("accuracy", [](const MetricReport& m) { return m.accuracy; });
    line("top5_accuracy", [](const MetricReport& m) { return m.top5_accuracy; });
    line("avg_distance_km", [](const MetricReport& m) { return m.avg_distance_km; });
    line("macro_f1", [](const MetricReport& m) { return m.macro_f1; });
    line("mrr", [](const MetricReport& m) { return m.mrr; });
  }
  json rows = json::array();
  for (std::size_t c = 0; c < report.rows.size(); ++c) {
    const auto& row = report.rows[c];
    json folds = json::array();
    for (const auto& f : row.folds) {
      json fj{{"ok", f.ok}, {"seed", f.seed}};
      if (f.ok) fj["metrics"] = f.metrics.to_json();
      else fj["error"] = f.error;
      folds.push_back(fj);
    }
    rows.push_back({{"config", c},
                    {"label", row.entry.label},
                    {"spec", spec_to_json(row.entry.spec)},
                    {"status", row.failed() ? "failed" : "ok"},
                    {"mean", row.mean.to_json()},
                    {"folds", folds}});
  }
  json summary{{"config_hash", hex64(report.config_hash)},
               {"seed", report.seed},
               {"config", config.to_json()},
               {"fold_assignments", report.plan.assignments},
               {"rows", rows}};
  std::ofstream out(root / "cv.json", std::ios::binary);
  if (!out) throw DataError("cannot write cv.json");
  out << summary.dump(2) << '\n';
}

} // namespace gnndcm
