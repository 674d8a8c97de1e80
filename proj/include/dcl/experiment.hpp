#pragma once

// Grid experiment harness: simulate, fit and score every (cell, rep, method)
// task on a worker pool and merge the rows in canonical order.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dcl/io.hpp"
#include "dcl/metrics.hpp"
#include "dcl/pipeline.hpp"
#include "dcl/simulator.hpp"

namespace dcl {

struct ExperimentCell {
  int q_P = 0;
  double U_d = 0.0;
  double L_d = 0.0;
};

/// Localized density of the fixed-confounder DCL1 design: 15 columns at p = 40.
inline constexpr double kDcl1LocalizedDensity = 0.075;

struct ExperimentSpec {
  std::string name = "dcl1";  // dcl1, dcl2 or custom
  std::string scale = "desk";  // paper or desk
  std::vector<ExperimentCell> grid;
  int reps = 5;
  int n = 400;
  int p = 20;
  std::vector<Method> methods{Method::DclDecor, Method::DecorGl, Method::Notears};
  std::uint64_t base_seed = 0;
  SimConfig sim;  // template for everything the grid does not set
  MethodConfigs fit;
  bool timing = false;

  void validate() const {
    if (reps < 1) throw InvalidConfig("experiment: reps must be >= 1");
    if (grid.empty()) throw InvalidConfig("experiment: grid is empty");
    if (methods.empty()) throw InvalidConfig("experiment: no methods");
    if (p < 2 || n < 2) throw InvalidConfig("experiment: need p >= 2 and n >= 2");
  }
};

inline std::vector<ExperimentCell> dcl1_grid() {
  std::vector<ExperimentCell> g;
  for (int q : {1, 3, 5})
    for (double u : {0.5, 1.0, 2.0}) g.push_back({q, u, kDcl1LocalizedDensity});
  return g;
}

inline std::vector<ExperimentCell> dcl2_grid() {
  std::vector<ExperimentCell> g;
  for (double l : {0.0, 0.05, 0.10, 0.15, 0.20}) g.push_back({3, 1.0, l});
  return g;
}

inline void apply_scale(ExperimentSpec& s, const std::string& scale) {
  if (scale == "paper") {
    s.p = 40, s.n = 600, s.reps = 10;
  } else if (scale == "desk") {
    s.p = 20, s.n = 400, s.reps = 5;
  } else {
    throw InvalidConfig("experiment: scale must be paper or desk");
  }
  s.scale = scale;
}

inline ExperimentSpec named_experiment(const std::string& name, const std::string& scale) {
  ExperimentSpec s;
  s.name = name;
  if (name == "dcl1") {
    s.grid = dcl1_grid();
  } else if (name == "dcl2") {
    s.grid = dcl2_grid();
  } else if (name != "custom") {
    throw InvalidConfig("experiment: name must be dcl1, dcl2 or custom");
  }
  apply_scale(s, scale);
  return s;
}

namespace detail {
inline std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}
}  // namespace detail

/// [experiment] keys: name, scale, reps, n, p, methods (comma list), base_seed,
/// cells ("q_P:U_d:L_d" separated by ';', replaces the named grid). Other
/// sections are read as in a run config. Explicit keys override the scale.
inline ExperimentSpec parse_experiment(const pt::ptree& tree) {
  const RunConfig rc = parse_run_config(tree);
  const auto ex = tree.get_child_optional("experiment");
  const auto str = [&](const char* key, const std::string& dflt) {
    return ex ? ex->get<std::string>(key, dflt) : dflt;
  };
  ExperimentSpec s = named_experiment(str("name", "dcl1"), str("scale", "desk"));
  s.sim = rc.sim;
  s.fit = rc.methods;
  if (ex) {
    static const std::set<std::string> known{"name", "scale", "reps", "n", "p", "methods", "base_seed", "cells"};
    for (const auto& kv : *ex)
      if (!known.count(kv.first)) throw InvalidConfig("config: unknown key [experiment] " + kv.first);
    try {
      s.reps = ex->get<int>("reps", s.reps);
      s.n = ex->get<int>("n", s.n);
      s.p = ex->get<int>("p", s.p);
      s.base_seed = ex->get<std::uint64_t>("base_seed", s.base_seed);
    } catch (const pt::ptree_error& e) {
      throw InvalidConfig(std::string("config: [experiment] ") + e.what());
    }
    if (auto m = ex->get_optional<std::string>("methods")) {
      s.methods.clear();
      for (const auto& name : detail::split_on(*m, ',')) {
        auto parsed = parse_method(name);
        if (!parsed) throw InvalidConfig("config: unknown method '" + name + "'");
        s.methods.push_back(*parsed);
      }
    }
    if (auto c = ex->get_optional<std::string>("cells")) {
      s.grid.clear();
      for (const auto& cell : detail::split_on(*c, ';')) {
        const auto parts = detail::split_on(cell, ':');
        if (parts.size() != 3) throw InvalidConfig("config: cell '" + cell + "' must be q_P:U_d:L_d");
        try {
          s.grid.push_back({std::stoi(parts[0]), std::stod(parts[1]), std::stod(parts[2])});
        } catch (const std::exception&) {
          throw InvalidConfig("config: cannot parse cell '" + cell + "'");
        }
      }
    }
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------

struct ResultRow {
  Method method = Method::DclDecor;
  int cell = 0;
  ExperimentCell params;
  int rep = 0;
  std::uint64_t seed = 0;
  EdgeMetrics metrics;
  double h_final = 0.0;
  bool converged = false;
  double runtime_ms = 0.0;
  std::string status = "ok";
  // Bow-free contract of the estimate, checked on every row.
  bool bow_free = true;
  bool acyclic = true;
};

inline constexpr const char* kResultHeader =
    "method,q_P,U_d,L_d,rep,seed,f1,precision,recall,shd,h_final,converged,runtime_ms,status";

/// Data seed for a (cell, rep) pair. All methods share it so they are fit on
/// the same dataset.
inline std::uint64_t task_seed(std::uint64_t base, int cell, int rep) {
  return derive_seed(base, {static_cast<std::uint64_t>(cell), static_cast<std::uint64_t>(rep)});
}

inline SimConfig cell_config(const ExperimentSpec& s, const ExperimentCell& c, std::uint64_t seed) {
  SimConfig cfg = s.sim;
  cfg.p = s.p;
  cfg.n = s.n;
  cfg.q_P = c.q_P;
  cfg.U_d = c.U_d;
  cfg.r_S = localized_count(c.L_d, s.p);
  cfg.s_active = std::min(cfg.s_active, s.p);
  cfg.seed = seed;
  return cfg;
}

inline bool estimate_is_bow_free(const AdmgEstimate& e) {
  const Index p = e.B_hat.rows();
  for (Index i = 0; i < p; ++i)
    for (Index j = i + 1; j < p; ++j)
      if ((e.B_hat(i, j) != 0.0 || e.B_hat(j, i) != 0.0) && e.Gamma_hat(i, j) != 0.0) return false;
  return true;
}

inline ResultRow run_task(const ExperimentSpec& s, int cell, int rep, Method method) {
  ResultRow row;
  row.method = method;
  row.cell = cell;
  row.params = s.grid[static_cast<size_t>(cell)];
  row.rep = rep;
  row.seed = task_seed(s.base_seed, cell, rep);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const Dataset data = simulate(cell_config(s, row.params, row.seed));
    const MethodFit fit = fit_method(method, data, s.fit);
    row.metrics = score(fit.estimate.B_hat, data.model->B, s.fit.dcl.decor.tau_B);
    row.h_final = acyclicity_value(fit.estimate.B_hat);
    row.converged = fit.converged;
    row.bow_free = estimate_is_bow_free(fit.estimate);
    row.acyclic = is_acyclic_support(fit.estimate.B_hat) && row.h_final <= 1e-8;
  } catch (const std::exception& e) {
    row.status = std::string("error: ") + e.what();
    std::replace(row.status.begin(), row.status.end(), ',', ';');
    std::replace(row.status.begin(), row.status.end(), '\n', ' ');
  }
  if (s.timing) row.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

inline int method_rank(const ExperimentSpec& s, Method m) {
  return static_cast<int>(std::find(s.methods.begin(), s.methods.end(), m) - s.methods.begin());
}

/// Executes every task on `threads` workers; rows come back sorted by
/// (method, cell, rep) whatever the scheduling.
inline std::vector<ResultRow> run_experiment(const ExperimentSpec& s, int threads = 1) {
  s.validate();
  struct Task {
    int cell, rep;
    Method method;
  };
  std::vector<Task> tasks;
  for (Method m : s.methods)
    for (int c = 0; c < static_cast<int>(s.grid.size()); ++c)
      for (int r = 0; r < s.reps; ++r) tasks.push_back({c, r, m});

  std::vector<ResultRow> rows(tasks.size());
  std::atomic<size_t> next{0};
  const auto worker = [&] {
    for (size_t k; (k = next.fetch_add(1)) < tasks.size();) rows[k] = run_task(s, tasks[k].cell, tasks[k].rep, tasks[k].method);
  };
  const int nworkers = std::max(1, std::min<int>(threads, static_cast<int>(tasks.size())));
  if (nworkers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nworkers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  std::sort(rows.begin(), rows.end(), [&](const ResultRow& a, const ResultRow& b) {
    const int ma = method_rank(s, a.method), mb = method_rank(s, b.method);
    if (ma != mb) return ma < mb;
    if (a.cell != b.cell) return a.cell < b.cell;
    return a.rep < b.rep;
  });
  return rows;
}

inline std::string results_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  out << kResultHeader << "\n";
  for (const auto& r : rows) {
    const bool ok = r.status == "ok";
    const auto num = [&](double x) { return ok ? format_double(x) : std::string("nan"); };
    out << method_name(r.method) << ',' << r.params.q_P << ',' << format_double(r.params.U_d) << ','
        << format_double(r.params.L_d) << ',' << r.rep << ',' << r.seed << ',' << num(r.metrics.f1) << ','
        << num(r.metrics.precision) << ',' << num(r.metrics.recall) << ',' << (ok ? std::to_string(r.metrics.shd) : "nan")
        << ',' << num(r.h_final) << ',' << (r.converged ? 1 : 0) << ',' << format_double(r.runtime_ms) << ','
        << r.status << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------

struct SummaryEntry {
  Method method = Method::DclDecor;
  int cell = -1;  // -1 for the overall mean
  int count = 0;
  double f1 = 0.0, shd = 0.0, precision = 0.0, recall = 0.0;
  std::optional<double> delta_f1;  // versus decor_gl on the same cell
};

/// Per-cell and overall means over successful rows.
inline std::vector<SummaryEntry> summarize(const ExperimentSpec& s, const std::vector<ResultRow>& rows) {
  std::vector<SummaryEntry> out;
  const int ncell = static_cast<int>(s.grid.size());
  std::map<std::pair<int, int>, SummaryEntry> acc;  // (method rank, cell)
  for (const auto& r : rows) {
    if (r.status != "ok") continue;
    for (int cell : {r.cell, -1}) {
      auto& e = acc[{method_rank(s, r.method), cell}];
      e.method = r.method;
      e.cell = cell;
      ++e.count;
      e.f1 += r.metrics.f1;
      e.shd += r.metrics.shd;
      e.precision += r.metrics.precision;
      e.recall += r.metrics.recall;
    }
  }
  for (auto& [key, e] : acc) {
    e.f1 /= e.count, e.shd /= e.count, e.precision /= e.count, e.recall /= e.count;
  }
  const int ref = method_rank(s, Method::DecorGl);
  for (int m = 0; m < static_cast<int>(s.methods.size()); ++m)
    for (int cell = 0; cell <= ncell; ++cell) {
      const int c = cell == ncell ? -1 : cell;
      auto it = acc.find({m, c});
      if (it == acc.end()) continue;
      SummaryEntry e = it->second;
      auto rt = acc.find({ref, c});
      if (rt != acc.end()) e.delta_f1 = e.f1 - rt->second.f1;
      out.push_back(e);
    }
  return out;
}

inline std::string summary_csv(const ExperimentSpec& s, const std::vector<SummaryEntry>& entries) {
  std::ostringstream out;
  out << "scope,method,q_P,U_d,L_d,count,mean_f1,mean_shd,mean_precision,mean_recall,delta_f1_vs_decor_gl\n";
  for (const auto& e : entries) {
    if (e.cell >= 0) {
      const auto& c = s.grid[static_cast<size_t>(e.cell)];
      out << "cell," << method_name(e.method) << ',' << c.q_P << ',' << format_double(c.U_d) << ','
          << format_double(c.L_d);
    } else {
      out << "overall," << method_name(e.method) << ",,,";
    }
    out << ',' << e.count << ',' << format_double(e.f1) << ',' << format_double(e.shd) << ','
        << format_double(e.precision) << ',' << format_double(e.recall) << ','
        << (e.delta_f1 ? format_double(*e.delta_f1) : "") << "\n";
  }
  return out.str();
}

}  // namespace dcl
