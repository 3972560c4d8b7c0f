// dpo_cli: build, solve and evaluate dynamic portfolio QUBOs, run the
// strategy matrix, and generate synthetic price fixtures.

#include "dpo/dpo.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::ordered_json;

/// Flags shared by every command that needs market data and a model config.
struct ModelFlags {
  std::string config_path;
  std::string prices;
  bool synthetic = false;
  bool add_cash = false;
  std::optional<std::string> trim;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_t, n_a, n_r, dt;
  std::optional<std::int64_t> budget;
  std::optional<double> nu, lambda, rho, gamma;
  std::optional<std::string> risk;

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--prices", prices, "price CSV (date,<asset>,...)")->check(CLI::ExistingFile);
    app.add_flag("--synthetic", synthetic,
                 "generate N_a-1 synthetic assets plus cash from --seed");
    app.add_flag("--add-cash", add_cash, "append a constant cash asset to --prices");
    app.add_option("--trim", trim, "keep the leading or trailing days of a longer history")
        ->check(CLI::IsMember({"leading", "trailing"}));
    app.add_option("--seed", seed, "seed for all randomness (data synthesis and solvers)");
    app.add_option("--n-t", n_t, "rebalancing steps N_t");
    app.add_option("--n-a", n_a, "assets N_a (including cash)");
    app.add_option("--n-r", n_r, "bits per weight N_r");
    app.add_option("--budget", budget, "budget K in capital units");
    app.add_option("--nu", nu, "transaction cost rate");
    app.add_option("--lambda", lambda, "transaction cost scale");
    app.add_option("--rho", rho, "budget penalty (default 2 max|mu|)");
    app.add_option("--gamma", gamma, "risk aversion");
    app.add_option("--dt", dt, "daily observations per interval");
    app.add_option("--risk", risk, "risk model")
        ->check(CLI::IsMember({"covariance", "semicovariance", "shrinkage"}));
    app.add_option("--size", size_, "problem size preset: S, M or L (N_t = 2, 6, 22 with N_a = 6, N_r = 4, K = 15)")
        ->check(CLI::IsMember({"S", "M", "L"}));
  }

  dpo::RunConfig run_config() const {
    dpo::RunConfig c = config_path.empty() ? dpo::RunConfig{} : dpo::load_run_config(config_path);
    if (size_ == "S") c.model.n_t = 2;
    if (size_ == "M") c.model.n_t = 6;
    if (size_ == "L") c.model.n_t = 22;
    if (!size_.empty()) {
      c.model.n_a = 6;
      c.model.n_r = 4;
      c.model.budget = 15;
    }
    if (n_t) c.model.n_t = *n_t;
    if (n_a) c.model.n_a = *n_a;
    if (n_r) c.model.n_r = *n_r;
    if (dt) c.model.dt = *dt;
    if (budget) c.model.budget = *budget;
    if (nu) c.model.nu = *nu;
    if (lambda) c.model.lambda = *lambda;
    if (rho) c.model.rho = *rho;
    if (gamma) c.model.gamma = *gamma;
    if (risk) {
      if (*risk == "covariance") c.model.risk = dpo::CovarianceRisk{};
      if (*risk == "semicovariance") c.model.risk = dpo::SemicovarianceRisk{};
      if (*risk == "shrinkage") c.model.risk = dpo::ShrinkageRisk{};
    }
    if (seed) c.matrix.seed = *seed;
    if (!prices.empty()) c.data.prices = prices;
    if (add_cash) c.data.add_cash = true;
    if (trim) c.data.trim = *trim == "leading" ? dpo::TrimRule::KeepLeading
                                               : dpo::TrimRule::KeepTrailing;
    c.model.validate();
    return c;
  }

  dpo::ReturnPanel panel(const dpo::RunConfig& c) const {
    const auto& m = c.model;
    if (synthetic || !c.data.prices) {
      if (!synthetic) {
        throw std::invalid_argument("no price data: pass --prices, --synthetic or a config with data.prices");
      }
      if (m.n_a < 2) throw std::invalid_argument("--synthetic needs N_a >= 2 (risky assets plus cash)");
      const auto raw = dpo::synthetic_prices(c.matrix.seed, m.n_a - 1, m.n_t * m.dt + 1, true);
      return dpo::panel_from_prices(raw, m.n_t, m.dt, dpo::TrimRule::KeepLeading, false);
    }
    const auto raw = dpo::load_prices(*c.data.prices);
    return dpo::panel_from_prices(raw, m.n_t, m.dt, c.data.trim, c.data.add_cash);
  }

  dpo::DpoInstance instance(const dpo::RunConfig& c) const {
    const auto p = panel(c);
    if (p.n_a() != c.model.n_a) {
      throw std::invalid_argument("data has " + std::to_string(p.n_a()) +
                                  " assets but N_a = " + std::to_string(c.model.n_a));
    }
    return dpo::make_instance(c.model, p);
  }

 private:
  std::string size_;
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
  os << text;
}

dpo::Qubo model_as_qubo(const dpo::AnyModel& m) {
  if (const auto* q = std::get_if<dpo::Qubo>(&m)) return *q;
  if (const auto* i = std::get_if<dpo::IsingModel>(&m)) return dpo::ising_to_qubo(*i);
  return std::get<dpo::QuantizedIsing>(m).to_qubo();
}

ordered_json evaluation_json(const dpo::DpoInstance& inst, const dpo::Evaluation& ev) {
  ordered_json j;
  j["feasible"] = ev.feasibility.feasible;
  j["energy"] = ev.energy;
  j["step_totals"] = ev.feasibility.step_totals;
  j["violations"] = ev.feasibility.violations;
  if (ev.feasibility.feasible) {
    j["objective"] = {{"expected_return", ev.terms->expected_return},
                      {"risk", ev.terms->risk},
                      {"transaction_cost", ev.terms->transaction_cost},
                      {"budget_penalty", ev.terms->budget_penalty},
                      {"objective", ev.terms->objective}};
    j["net_returns"] = ev.net_returns;
    j["total_net_return"] = *ev.total_net_return;
    j["sharpe"] = ev.sharpe.value ? ordered_json(*ev.sharpe.value) : ordered_json(nullptr);
    j["zero_risk"] = ev.sharpe.zero_risk;
  }
  j["risk_model"] = dpo::risk_model_name(inst.config.risk);
  return j;
}

int cmd_synth(const std::string& out, std::uint64_t seed, std::size_t assets, std::size_t days,
              bool cash, const std::vector<double>& drift, const std::vector<double>& vol,
              double corr) {
  dpo::SyntheticParams p;
  if (!drift.empty()) p.drift = drift;
  if (!vol.empty()) p.volatility = vol;
  p.correlation = corr;
  const auto series = dpo::synthetic_prices(seed, assets, days, cash, p);
  std::ostringstream os;
  dpo::write_prices(os, series);
  write_text(out, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic portfolio optimization as QUBO: build, solve, evaluate, matrix, synth"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic price CSV");
  std::string synth_out = "-";
  std::uint64_t synth_seed = 1;
  std::size_t synth_assets = 5, synth_days = 529;
  bool synth_cash = false;
  std::vector<double> synth_drift, synth_vol;
  double synth_corr = 0.3;
  synth->add_option("--out,-o", synth_out, "output CSV ('-' for stdout)");
  synth->add_option("--seed", synth_seed, "random seed");
  synth->add_option("--assets", synth_assets, "number of risky assets");
  synth->add_option("--days", synth_days, "number of prices per asset");
  synth->add_flag("--cash", synth_cash, "append a constant CASH column");
  synth->add_option("--drift", synth_drift, "daily log drift (one value or one per asset)")
      ->delimiter(',');
  synth->add_option("--vol", synth_vol, "daily volatility (one value or one per asset)")
      ->delimiter(',');
  synth->add_option("--correlation", synth_corr, "shock correlation in [0, 1)");

  // build
  auto* build = app.add_subcommand("build", "encode prices and config as a QUBO model file");
  ModelFlags build_flags;
  build_flags.attach(*build);
  std::string build_out = "-";
  bool build_ising = false, build_quantize = false;
  build->add_option("--out,-o", build_out, "model file ('-' for stdout)");
  build->add_flag("--ising", build_ising, "write the Ising form (offset kept)");
  build->add_flag("--quantize", build_quantize,
                  "write the tuned int8 Ising model the int8 adapter would submit");

  // solve
  auto* solve = app.add_subcommand("solve", "solve a model file");
  std::string solve_model, solve_backend = "sa", solve_strategy = "global", solve_out = "-",
                           solve_trace;
  std::uint64_t solve_seed = 1;
  std::optional<std::uint64_t> solve_effort;
  std::size_t solve_iters = 3, solve_repeats = 3;
  solve->add_option("--model,-m", solve_model, "model file")->required()->check(CLI::ExistingFile);
  solve->add_option("--backend,-b", solve_backend, "exhaustive | sa | tabu | int8(<name>)");
  solve->add_option("--strategy", solve_strategy, "global or block")
      ->check(CLI::IsMember({"global", "block"}));
  solve->add_option("--seed", solve_seed, "base seed");
  solve->add_option("--effort", solve_effort, "sweeps (sa) or iterations (tabu)");
  solve->add_option("--iters", solve_iters, "BCD global iterations");
  solve->add_option("--repeats", solve_repeats, "BCD solver runs per block");
  solve->add_option("--out,-o", solve_out, "solution JSON ('-' for stdout)");
  solve->add_option("--trace", solve_trace, "write BCD update records as JSON lines");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a solution against market data");
  ModelFlags eval_flags;
  eval_flags.attach(*evaluate);
  std::string eval_solution, eval_assignment, eval_out = "-";
  evaluate->add_option("--solution", eval_solution, "solution JSON from 'solve'")
      ->check(CLI::ExistingFile);
  evaluate->add_option("--assignment", eval_assignment, "bit string x_0 x_1 ...");
  evaluate->add_option("--out,-o", eval_out, "report JSON ('-' for stdout)");

  // matrix
  auto* matrix = app.add_subcommand("matrix", "run the Global/Block x FP/INT8 strategy matrix");
  ModelFlags matrix_flags;
  matrix_flags.attach(*matrix);
  std::vector<std::string> matrix_backends, matrix_variants;
  std::optional<std::size_t> matrix_runs;
  std::string matrix_out = "report";
  matrix->add_option("--backends", matrix_backends, "backend names")->delimiter(',');
  matrix->add_option("--variants", matrix_variants, "Global-FP, Block-FP, Global-INT8, Block-INT8")
      ->delimiter(',');
  matrix->add_option("--runs", matrix_runs, "independent runs per cell");
  matrix->add_option("--out,-o", matrix_out, "report directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      return cmd_synth(synth_out, synth_seed, synth_assets, synth_days, synth_cash, synth_drift,
                       synth_vol, synth_corr);
    }
    if (*build) {
      const auto cfg = build_flags.run_config();
      const auto inst = build_flags.instance(cfg);
      std::ostringstream os;
      if (build_quantize) {
        const auto source = dpo::qubo_to_ising(inst.qubo).without_offset();
        auto tuned = dpo::reduce_dynamic_range(source, cfg.matrix.backend_options.tuning);
        auto q = dpo::quantize_int8(tuned.model);
        q.tuning_steps = tuned.steps.size();
        dpo::write_model(os, q, inst.qubo.partition());
      } else if (build_ising) {
        dpo::write_model(os, dpo::qubo_to_ising(inst.qubo), inst.qubo.partition());
      } else {
        dpo::write_model(os, inst.qubo);
      }
      write_text(build_out, os.str());
      return 0;
    }
    if (*solve) {
      auto q = model_as_qubo(dpo::load_model(solve_model));
      const auto backend = dpo::make_backend(solve_backend);
      ordered_json j;
      if (solve_strategy == "global") {
        auto r = backend->solve(dpo::SolveRequest{q, solve_seed, solve_effort});
        j["assignment"] = r.assignment.to_string();
        j["energy"] = dpo::qubo_energy(q, r.assignment);
        j["reported_energy"] = r.reported_energy;
        j["backend"] = r.backend_id;
        j["strategy"] = "global";
        j["seed"] = solve_seed;
        j["wall_time"] = r.wall_time;
        if (r.quantization) {
          j["quantization"] = {{"scale", r.quantization->model.scale},
                               {"tuning_steps", r.quantization->model.tuning_steps},
                               {"dr_before", r.quantization->dr_before},
                               {"dr_after", r.quantization->dr_after},
                               {"zeroed", r.quantization->loss.zeroed},
                               {"zeroed_inter", r.quantization->loss.zeroed_inter},
                               {"inter_nonzero", r.quantization->loss.inter_nonzero}};
        }
      } else {
        dpo::BcdConfig cfg;
        cfg.global_iters = solve_iters;
        cfg.repeats = solve_repeats;
        cfg.seed = solve_seed;
        cfg.effort = solve_effort;
        auto r = dpo::bcd_solve(q, *backend, cfg);
        j["assignment"] = r.assignment.to_string();
        j["energy"] = r.energy;
        j["backend"] = backend->id();
        j["strategy"] = "block";
        j["seed"] = solve_seed;
        j["wall_time"] = r.solver_time;
        j["updates"] = r.trace.size();
        if (!solve_trace.empty()) {
          std::ofstream os(solve_trace);
          if (!os) throw std::runtime_error("cannot write '" + solve_trace + "'");
          dpo::write_trace_jsonl(os, r.trace);
        }
      }
      write_text(solve_out, j.dump(2) + "\n");
      return 0;
    }
    if (*evaluate) {
      if (eval_solution.empty() == eval_assignment.empty()) {
        throw std::invalid_argument("pass exactly one of --solution or --assignment");
      }
      std::string bits = eval_assignment;
      if (!eval_solution.empty()) {
        std::ifstream is(eval_solution);
        bits = nlohmann::json::parse(is).at("assignment").get<std::string>();
      }
      const auto cfg = eval_flags.run_config();
      const auto inst = eval_flags.instance(cfg);
      const auto ev = dpo::evaluate_solution(inst, dpo::Assignment::parse(bits));
      write_text(eval_out, evaluation_json(inst, ev).dump(2) + "\n");
      return ev.feasibility.feasible ? 0 : 3;
    }
    if (*matrix) {
      auto cfg = matrix_flags.run_config();
      if (!matrix_backends.empty()) cfg.matrix.backends = matrix_backends;
      if (!matrix_variants.empty()) {
        cfg.matrix.variants.clear();
        for (const auto& v : matrix_variants) cfg.matrix.variants.push_back(dpo::StrategyVariant::parse(v));
      }
      if (matrix_runs) cfg.matrix.runs = *matrix_runs;
      const auto inst = matrix_flags.instance(cfg);
      const auto cells = dpo::run_matrix(inst, cfg.matrix);
      dpo::emit_report(inst, cells, matrix_out);
      for (const auto& c : cells) {
        std::cout << c.backend << ' ' << c.variant.label() << ' ' << dpo::cell_status(c);
        if (const auto* r = c.selected_run()) {
          std::cout << " net=" << *r->evaluation.total_net_return;
          if (r->evaluation.sharpe.value) std::cout << " sharpe=" << *r->evaluation.sharpe.value;
        }
        if (c.failure) std::cout << " (" << *c.failure << ')';
        std::cout << '\n';
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
