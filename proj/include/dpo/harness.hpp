#pragma once

// Strategy matrix: {Global, Block} x {FP, INT8} for each named backend,
// evaluated by budget feasibility, per-step net returns and Sharpe ratio.

#include "dpo/backends.hpp"
#include "dpo/bcd.hpp"
#include "dpo/dpo_model.hpp"
#include "dpo/market_data.hpp"
#include "dpo/precision.hpp"
#include "dpo/qubo.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpo {

enum class Decomposition { Global, Block };
enum class Precision { FP, INT8 };

struct StrategyVariant {
  Decomposition decomposition = Decomposition::Global;
  Precision precision = Precision::FP;

  std::string label() const {
    return std::string(decomposition == Decomposition::Global ? "Global" : "Block") + "-" +
           (precision == Precision::FP ? "FP" : "INT8");
  }

  static StrategyVariant parse(const std::string& s) {
    for (const auto& v : all()) {
      if (v.label() == s) return v;
    }
    throw std::invalid_argument("unknown strategy variant '" + s +
                                "' (expected Global-FP, Block-FP, Global-INT8 or Block-INT8)");
  }

  static std::vector<StrategyVariant> all() {
    return {{Decomposition::Global, Precision::FP},
            {Decomposition::Block, Precision::FP},
            {Decomposition::Global, Precision::INT8},
            {Decomposition::Block, Precision::INT8}};
  }

  friend bool operator==(const StrategyVariant&, const StrategyVariant&) = default;
};

struct Feasibility {
  bool feasible = false;
  std::vector<std::int64_t> step_totals;
  /// Time steps whose total differs from K.
  std::vector<std::size_t> violations;
};

inline Feasibility check_feasibility(const PortfolioAllocation& w, std::int64_t budget) {
  Feasibility f;
  for (std::size_t t = 0; t < w.n_t(); ++t) {
    std::int64_t total = 0;
    for (std::size_t a = 0; a < w.n_a(); ++a) total += w(t, a);
    f.step_totals.push_back(total);
    if (total != budget) f.violations.push_back(t);
  }
  f.feasible = f.violations.empty();
  return f;
}

/// F^net_t = F_t - C_t for t = 0..N_t-1, with omega_{-1} = 0 so the initial
/// buy-in cost is charged to t = 0.
inline std::vector<double> net_mean_return(const PortfolioAllocation& w,
                                           const ReturnPanel& panel,
                                           const DpoConfig& config) {
  if (w.n_t() != panel.n_t() || w.n_a() != panel.n_a()) {
    throw std::invalid_argument("net_mean_return: allocation is " + std::to_string(w.n_t()) +
                                "x" + std::to_string(w.n_a()) + ", panel is " +
                                std::to_string(panel.n_t()) + "x" +
                                std::to_string(panel.n_a()));
  }
  std::vector<double> out(w.n_t());
  for (std::size_t t = 0; t < w.n_t(); ++t) {
    out[t] = step_return(w, panel, t) - step_transaction_cost(w, config, t);
  }
  return out;
}

struct SharpeRatio {
  std::optional<double> value;
  /// R(Omega) == 0, e.g. an all-cash or empty portfolio.
  bool zero_risk = false;
};

/// S = F / sqrt(R) under the risk model used for the solve.
inline SharpeRatio sharpe_ratio(const PortfolioAllocation& w, const ReturnPanel& panel,
                                const std::vector<RiskMatrix>& risks,
                                const DpoConfig& config) {
  const auto terms = objective_terms(config, panel, risks, w);
  SharpeRatio s;
  if (!(terms.risk > 0.0)) {
    s.zero_risk = true;
    return s;
  }
  s.value = terms.expected_return / std::sqrt(terms.risk);
  return s;
}

/// Everything needed to solve and evaluate one problem.
struct DpoInstance {
  DpoConfig config;
  ReturnPanel panel;
  std::vector<RiskMatrix> risks;
  Qubo qubo;
};

inline DpoInstance make_instance(const DpoConfig& config, const ReturnPanel& panel) {
  config.validate();
  DpoInstance inst{config, panel, compute_risks(panel, config.risk), Qubo()};
  inst.qubo = encode_qubo(inst.config, inst.panel, inst.risks);
  return inst;
}

/// Loads a price CSV, normalizes every series, optionally appends a cash
/// asset, and keeps N_t * dt + 1 prices according to `trim`.
inline ReturnPanel panel_from_prices(const std::vector<PriceSeries>& raw, std::size_t n_t,
                                     std::size_t dt, TrimRule trim, bool add_cash) {
  if (raw.empty()) throw std::invalid_argument("panel_from_prices: no price series");
  std::vector<PriceSeries> series;
  series.reserve(raw.size() + 1);
  for (const auto& s : raw) series.push_back(normalize_prices(s));
  if (add_cash) series.push_back(cash_series(raw.front().dates));
  return compute_returns(series, n_t, dt, trim);
}

/// `n_risky` synthetic assets plus, when `with_cash`, a constant CASH series.
inline std::vector<PriceSeries> synthetic_prices(std::uint64_t seed, std::size_t n_risky,
                                                 std::size_t days, bool with_cash,
                                                 const SyntheticParams& params = {}) {
  if (n_risky == 0) throw std::invalid_argument("synthetic_prices: need at least one risky asset");
  auto series = generate_synthetic(seed, n_risky, days, params);
  if (with_cash) series.push_back(cash_series(series.front().dates));
  return series;
}

struct PlantedParams {
  std::size_t n_t = 3;
  std::size_t n_a = 3;
  std::size_t n_r = 2;
  std::int64_t budget = 3;
  /// Weight of each time step's return and budget terms.
  std::vector<double> step_scales{1.0, 1.0 / 400.0, 1.0 / 400.0};
  double rho = 1.0;
  /// Returns are drawn from U(-return_spread, return_spread) * rho.
  double return_spread = 0.2;
  /// Unweighted transaction-cost rate nu * lambda.
  double coupling = 1.0 / 1000.0;
};

/// DPO-style instance whose later time steps are weighted far below the first
/// one, so every coupling between adjacent blocks is small next to the largest
/// in-block coefficient (ratio below 1/255 with the defaults). Risk is zero;
/// the Sharpe ratio of its solutions is therefore absent.
inline DpoInstance planted_scale_separated_instance(std::uint64_t seed,
                                                    const PlantedParams& p = {}) {
  if (p.step_scales.size() != p.n_t) {
    throw std::invalid_argument("planted instance: need one step scale per time step");
  }
  DpoConfig cfg;
  cfg.n_t = p.n_t;
  cfg.n_a = p.n_a;
  cfg.n_r = p.n_r;
  cfg.budget = p.budget;
  cfg.nu = p.coupling;
  cfg.lambda = 1.0;
  cfg.rho = p.rho;
  cfg.gamma = 0.0;
  cfg.dt = 1;
  cfg.validate();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-p.return_spread, p.return_spread);
  ReturnPanel panel;
  panel.dt = 1;
  panel.interval_returns.resize(Eigen::Index(p.n_t), Eigen::Index(p.n_a));
  for (Eigen::Index t = 0; t < panel.interval_returns.rows(); ++t) {
    for (Eigen::Index a = 0; a < panel.interval_returns.cols(); ++a) {
      panel.interval_returns(t, a) = unif(rng) * p.rho;
    }
  }
  panel.daily_returns = Eigen::MatrixXd::Zero(Eigen::Index(p.n_t), Eigen::Index(p.n_a));
  for (std::size_t a = 0; a < p.n_a; ++a) panel.asset_ids.push_back("P" + std::to_string(a + 1));
  std::vector<RiskMatrix> risks(
      p.n_t, RiskMatrix{Eigen::MatrixXd::Zero(Eigen::Index(p.n_a), Eigen::Index(p.n_a)),
                        std::nullopt});

  const auto m = Eigen::Index(p.n_t * p.n_a);
  const double K = double(p.budget);
  WeightQuadratic g{Eigen::MatrixXd::Zero(m, m), Eigen::VectorXd::Zero(m), 0.0};
  for (std::size_t t = 0; t < p.n_t; ++t) {
    const double s = p.step_scales[t];
    for (std::size_t a = 0; a < p.n_a; ++a) {
      const auto i = Eigen::Index(t * p.n_a + a);
      g.linear[i] += s * (-panel.interval_returns(Eigen::Index(t), Eigen::Index(a)) -
                          2.0 * p.rho * K);
      for (std::size_t b = 0; b < p.n_a; ++b) {
        g.quadratic(i, Eigen::Index(t * p.n_a + b)) += s * p.rho;
      }
      g.quadratic(i, i) += p.coupling;
      if (t >= 1) {
        const auto j = Eigen::Index((t - 1) * p.n_a + a);
        g.quadratic(j, j) += p.coupling;
        g.quadratic(i, j) -= p.coupling;
        g.quadratic(j, i) -= p.coupling;
      }
    }
    g.constant += s * p.rho * K * K;
  }
  return DpoInstance{cfg, std::move(panel), std::move(risks),
                     binary_expand(g, p.n_t, p.n_a, p.n_r)};
}

/// Metrics of one solution. Performance fields are filled only when the
/// solution is feasible.
struct Evaluation {
  Feasibility feasibility;
  double energy = 0.0;  // full-precision QUBO energy
  std::optional<ObjectiveTerms> terms;
  std::vector<double> net_returns;
  std::optional<double> total_net_return;
  SharpeRatio sharpe;
};

inline Evaluation evaluate_solution(const DpoInstance& inst, const Assignment& x) {
  Evaluation ev;
  const auto w = decode(x, inst.config);
  ev.energy = qubo_energy(inst.qubo, x);
  ev.feasibility = check_feasibility(w, inst.config.budget);
  if (!ev.feasibility.feasible) return ev;
  ev.terms = objective_terms(inst.config, inst.panel, inst.risks, w);
  ev.net_returns = net_mean_return(w, inst.panel, inst.config);
  double total = 0.0;
  for (double v : ev.net_returns) total += v;
  ev.total_net_return = total;
  ev.sharpe = sharpe_ratio(w, inst.panel, inst.risks, inst.config);
  return ev;
}

struct MatrixOptions {
  /// Base backend names; each is run plain for FP cells and wrapped as
  /// int8(<name>) for INT8 cells. An explicit int8(...) name runs INT8 cells only.
  std::vector<std::string> backends{"sa", "tabu"};
  std::vector<StrategyVariant> variants = StrategyVariant::all();
  std::size_t runs = 3;
  std::uint64_t seed = 1;
  BcdConfig bcd;
  BackendOptions backend_options;
  /// Effort for Global solves (unset: backend default).
  std::optional<std::uint64_t> global_effort;
};

struct RunRecord {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  std::optional<std::string> error;
  Assignment assignment;
  Evaluation evaluation;
  /// Solver wall time only (sum over block solves for Block cells).
  double solver_time = 0.0;
  std::vector<BcdTraceRecord> trace;
  std::optional<QuantizationLoss> quantization_loss;
};

struct CellReport {
  std::string backend;
  std::string solver_id;
  StrategyVariant variant;
  std::vector<RunRecord> runs;
  /// Index into runs of the feasible run with the highest total net return.
  std::optional<std::size_t> selected;
  /// Set when the cell could not run at all.
  std::optional<std::string> failure;

  std::string cell_id() const { return backend + "_" + variant.label(); }
  const RunRecord* selected_run() const {
    return selected ? &runs[*selected] : nullptr;
  }
};

inline std::uint64_t run_seed(std::uint64_t base, std::size_t run) {
  return base + 1000003ULL * run;
}

namespace detail {

inline bool is_int8_name(const std::string& name) { return name.rfind("int8(", 0) == 0; }

inline RunRecord run_cell_once(const DpoInstance& inst, const Backend& backend,
                               const StrategyVariant& v, const MatrixOptions& opts,
                               std::size_t run) {
  RunRecord rec;
  rec.run = run;
  rec.seed = run_seed(opts.seed, run);
  try {
    if (v.decomposition == Decomposition::Global) {
      auto r = backend.solve(SolveRequest{inst.qubo, rec.seed, opts.global_effort});
      rec.assignment = std::move(r.assignment);
      rec.solver_time = r.wall_time;
      if (r.quantization) rec.quantization_loss = r.quantization->loss;
    } else {
      BcdConfig cfg = opts.bcd;
      cfg.seed = rec.seed;
      auto r = bcd_solve(inst.qubo, backend, cfg);
      rec.assignment = std::move(r.assignment);
      rec.solver_time = r.solver_time;
      rec.trace = std::move(r.trace);
    }
    rec.evaluation = evaluate_solution(inst, rec.assignment);
  } catch (const BcdAborted& e) {
    rec.error = e.what();
    rec.trace = e.partial_trace();
  } catch (const std::exception& e) {
    rec.error = e.what();
  }
  return rec;
}

}  // namespace detail

inline CellReport run_cell(const DpoInstance& inst, const std::string& backend_name,
                           const StrategyVariant& v, const MatrixOptions& opts) {
  CellReport cell;
  cell.backend = backend_name;
  cell.variant = v;
  const bool wrapped = detail::is_int8_name(backend_name);
  if (wrapped && v.precision == Precision::FP) {
    cell.failure = "backend '" + backend_name + "' emulates an int8 device; FP variants do not apply";
    return cell;
  }
  std::shared_ptr<const Backend> backend;
  try {
    const std::string name =
        v.precision == Precision::INT8 && !wrapped ? "int8(" + backend_name + ")" : backend_name;
    backend = make_backend(name, opts.backend_options);
  } catch (const std::exception& e) {
    cell.failure = e.what();
    return cell;
  }
  cell.solver_id = backend->id();
  for (std::size_t k = 0; k < opts.runs; ++k) {
    cell.runs.push_back(detail::run_cell_once(inst, *backend, v, opts, k));
  }
  bool any_ok = false;
  for (std::size_t k = 0; k < cell.runs.size(); ++k) {
    const auto& r = cell.runs[k];
    if (r.error) continue;
    any_ok = true;
    if (!r.evaluation.total_net_return) continue;
    if (!cell.selected ||
        *r.evaluation.total_net_return > *cell.runs[*cell.selected].evaluation.total_net_return) {
      cell.selected = k;
    }
  }
  if (!any_ok && !cell.runs.empty()) cell.failure = *cell.runs.front().error;
  return cell;
}

/// Cells in (backend, variant) order. Failures are recorded per cell and the
/// matrix continues.
inline std::vector<CellReport> run_matrix(const DpoInstance& inst, const MatrixOptions& opts) {
  if (opts.runs == 0) throw std::invalid_argument("run_matrix: runs must be >= 1");
  opts.bcd.validate();
  std::vector<CellReport> out;
  for (const auto& b : opts.backends) {
    for (const auto& v : opts.variants) out.push_back(run_cell(inst, b, v, opts));
  }
  return out;
}

inline std::string cell_status(const CellReport& c) {
  if (c.failure) return "failed";
  return c.selected ? "feasible" : "infeasible";
}

inline nlohmann::ordered_json report_json(const DpoInstance& inst,
                                          const std::vector<CellReport>& cells) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["n_variables"] = inst.qubo.n();
  j["n_t"] = inst.config.n_t;
  j["n_a"] = inst.config.n_a;
  j["n_r"] = inst.config.n_r;
  j["budget"] = inst.config.budget;
  j["risk_model"] = risk_model_name(inst.config.risk);
  j["cells"] = ordered_json::array();
  for (const auto& c : cells) {
    ordered_json cj;
    cj["backend"] = c.backend;
    cj["solver"] = c.solver_id;
    cj["variant"] = c.variant.label();
    cj["status"] = cell_status(c);
    if (c.failure) cj["failure"] = *c.failure;
    if (const auto* r = c.selected_run()) {
      const auto& ev = r->evaluation;
      cj["selected_run"] = r->run;
      cj["seed"] = r->seed;
      cj["energy"] = ev.energy;
      cj["objective"] = {{"expected_return", ev.terms->expected_return},
                         {"risk", ev.terms->risk},
                         {"transaction_cost", ev.terms->transaction_cost},
                         {"budget_penalty", ev.terms->budget_penalty},
                         {"objective", ev.terms->objective}};
      cj["total_net_return"] = *ev.total_net_return;
      cj["sharpe"] = ev.sharpe.value ? ordered_json(*ev.sharpe.value) : ordered_json(nullptr);
      cj["zero_risk"] = ev.sharpe.zero_risk;
      cj["assignment"] = r->assignment.to_string();
    }
    cj["runs"] = ordered_json::array();
    for (const auto& r : c.runs) {
      ordered_json rj;
      rj["run"] = r.run;
      rj["seed"] = r.seed;
      if (r.error) {
        rj["error"] = *r.error;
      } else {
        rj["feasible"] = r.evaluation.feasibility.feasible;
        rj["energy"] = r.evaluation.energy;
        rj["step_totals"] = r.evaluation.feasibility.step_totals;
      }
      if (r.quantization_loss) {
        rj["zeroed_inter"] = r.quantization_loss->zeroed_inter;
        rj["inter_nonzero"] = r.quantization_loss->inter_nonzero;
      }
      cj["runs"].push_back(std::move(rj));
    }
    j["cells"].push_back(std::move(cj));
  }
  return j;
}

struct ReportFiles {
  std::filesystem::path summary;
  std::vector<std::filesystem::path> series;
  std::filesystem::path timings;
  std::filesystem::path traces;
};

/// Writes into `dir`:
///   summary.json          per-cell status, selected run, metrics (deterministic)
///   series_<cell>.csv     t, F_t, C_t, F_net_t for each feasible cell (deterministic)
///   timings.csv           solver wall time per run
///   traces.jsonl          BCD update records, one per block update
inline ReportFiles emit_report(const DpoInstance& inst, const std::vector<CellReport>& cells,
                               const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [](const fs::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
    return os;
  };
  ReportFiles files;
  files.summary = dir / "summary.json";
  {
    auto os = open(files.summary);
    os << report_json(inst, cells).dump(2) << '\n';
  }
  for (const auto& c : cells) {
    const auto* r = c.selected_run();
    if (!r) continue;
    const auto path = dir / ("series_" + c.cell_id() + ".csv");
    auto os = open(path);
    os.precision(17);
    const auto w = decode(r->assignment, inst.config);
    os << "t,return,transaction_cost,net_return\n";
    for (std::size_t t = 0; t < inst.config.n_t; ++t) {
      os << t << ',' << step_return(w, inst.panel, t) << ','
         << step_transaction_cost(w, inst.config, t) << ',' << r->evaluation.net_returns[t]
         << '\n';
    }
    files.series.push_back(path);
  }
  files.timings = dir / "timings.csv";
  {
    auto os = open(files.timings);
    os.precision(9);
    os << "backend,variant,run,seed,solver_seconds\n";
    for (const auto& c : cells) {
      for (const auto& r : c.runs) {
        os << c.backend << ',' << c.variant.label() << ',' << r.run << ',' << r.seed << ','
           << r.solver_time << '\n';
      }
    }
  }
  files.traces = dir / "traces.jsonl";
  {
    auto os = open(files.traces);
    for (const auto& c : cells) {
      for (const auto& r : c.runs) {
        if (r.trace.empty()) continue;
        write_trace_jsonl(os, r.trace,
                          "\"cell\":\"" + c.cell_id() + "\",\"run\":" + std::to_string(r.run) + ",");
      }
    }
  }
  return files;
}

}  // namespace dpo
