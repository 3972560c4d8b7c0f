// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Thresholds and tolerances are fixed here and are not configurable.

#include "dpo/dpo.hpp"
#include "oracles.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#ifndef DPO_DATA_DIR
#error "DPO_DATA_DIR must point at the bundled data directory"
#endif

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

dpo::RiskModelChoice random_risk(std::mt19937_64& rng) {
  switch (rng() % 3) {
    case 0: return dpo::CovarianceRisk{};
    case 1: return dpo::SemicovarianceRisk{0.0};
    default: return dpo::ShrinkageRisk{};
  }
}

// 1. qubo_energy(encode_qubo(x)) + O(decode(x)) is constant over all x.
Outcome energy_identity() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  int done = 0;
  while (done < 20) {
    dpo::DpoConfig c;
    c.n_t = 1 + rng() % 3;
    c.n_a = 1 + rng() % 3;
    c.n_r = 1 + rng() % 3;
    if (c.num_variables() > 12) continue;
    c.dt = 2 + rng() % 6;
    c.budget = std::int64_t(rng() % (c.n_a * c.max_weight() + 1));
    std::uniform_real_distribution<double> u(0.0, 2.0);
    c.nu = 0.05 * u(rng);
    c.lambda = u(rng);
    c.gamma = u(rng);
    if (rng() % 2) c.rho = u(rng);
    c.risk = random_risk(rng);
    const auto panel = oracle::random_panel(c.n_t, c.n_a, c.dt, rng, 0.05);
    const auto risks = dpo::compute_risks(panel, c.risk);
    const auto q = dpo::encode_qubo(c, panel, risks);
    std::vector<Eigen::MatrixXd> sig;
    for (const auto& r : risks) sig.push_back(r.sigma);
    const double rho = c.rho.value_or(2.0 * panel.interval_returns.cwiseAbs().maxCoeff());
    const double scale = oracle::coeff_scale(q);
    double lo = 1e300, hi = -1e300;
    for (std::uint64_t code = 0; code < (std::uint64_t{1} << q.n()); ++code) {
      const auto x = oracle::bits_of(code, q.n());
      const auto w = oracle::weights_of(x, c.n_t, c.n_a, c.n_r);
      const double s =
          dpo::qubo_energy(q, dpo::Assignment::from_integer(code, q.n())) +
          oracle::objective(w, panel.interval_returns, sig, c.gamma, c.nu, c.lambda, rho,
                            double(c.budget));
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    worst = std::max(worst, (hi - lo) / scale);
    ++done;
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 30.0,
          "max spread/scale " + fmt(worst) + " (<= 1e-9), " + fmt(secs) + " s (< 30)"};
}

// 2. BCD with an exact block backend is block-wise optimal and monotone.
Outcome bcd_correctness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  const dpo::ExhaustiveBackend exact;
  int optimal = 0, monotone = 0, global = 0;
  for (int k = 0; k < 100; ++k) {
    std::vector<std::size_t> sizes(3 + rng() % 2);
    for (auto& s : sizes) s = 1 + rng() % 4;
    const auto q = oracle::random_block_tridiagonal(sizes, rng);
    const auto r = dpo::bcd_solve(q, exact, dpo::BcdConfig{});
    const double tol = 1e-12 * oracle::coeff_scale(q);
    const auto x = oracle::to_vec(r.assignment);
    optimal += oracle::block_wise_optimal(q, x, tol);
    bool mono = true;
    double prev = oracle::qubo_value(q, std::vector<int>(q.n(), 0));
    for (const auto& rec : r.trace) {
      mono = mono && rec.energy_after <= prev + tol && rec.energy_after <= rec.energy_before + tol;
      prev = rec.energy_after;
    }
    monotone += mono;
    const auto all = oracle::enumerate(q.coeffs(), q.offset(), tol);
    global += oracle::qubo_value(q, x) <= all.min_energy + tol;
  }
  const double secs = seconds_since(t0);
  return {optimal == 100 && monotone == 100 && global >= 80 && secs < 60.0,
          "block-wise optimal " + std::to_string(optimal) + "/100, monotone " +
              std::to_string(monotone) + "/100, global optimum " + std::to_string(global) +
              "/100 (>= 80), " + fmt(secs) + " s (< 60)"};
}

// 3. Local energy delta from Q_hat equals the global energy delta.
Outcome delta_identity() {
  std::mt19937_64 rng(303);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    std::vector<std::size_t> sizes(1 + rng() % 4);
    for (auto& s : sizes) s = 1 + rng() % 5;
    const auto q = oracle::random_block_tridiagonal(sizes, rng);
    std::vector<std::uint8_t> bits(q.n());
    for (auto& b : bits) b = rng() & 1U;
    const dpo::Assignment x(bits);
    const std::size_t i = rng() % sizes.size();
    const auto sub = dpo::extract_subproblem(q, x, i);
    std::vector<std::uint8_t> ybits(sub.size());
    for (auto& b : ybits) b = rng() & 1U;
    const dpo::Assignment y(ybits);
    const double local = sub.local_energy(y) - sub.local_energy(x.slice(sub.range));
    auto xv = oracle::to_vec(x);
    const double before = oracle::qubo_value(q, xv);
    for (std::size_t k2 = 0; k2 < sub.size(); ++k2) xv[sub.range.begin + k2] = y[k2];
    const double global = oracle::qubo_value(q, xv) - before;
    worst = std::max(worst, std::abs(local - global) / oracle::coeff_scale(q));
  }
  return {worst <= 1e-9, "max |local - global| / scale " + fmt(worst) + " (<= 1e-9)"};
}

// 4. Quantized coefficients lie in int8, the largest maps to +-127, and the
//    output is invariant under positive rescaling of the source.
Outcome quantization_contract() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> log_scale(-6.0, 6.0);
  int ok = 0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 1 + rng() % 16;
    const auto m = oracle::random_ising(n, rng, std::exp(log_scale(rng)));
    const auto q = dpo::quantize_int8(m);
    bool in_range = true;
    int max_abs = 0;
    for (Eigen::Index i = 0; i < q.linear.size(); ++i) {
      in_range = in_range && q.linear[i] >= -128 && q.linear[i] <= 127;
      max_abs = std::max(max_abs, std::abs(q.linear[i]));
      for (Eigen::Index j = 0; j < q.linear.size(); ++j) {
        in_range = in_range && q.quadratic(i, j) >= -128 && q.quadratic(i, j) <= 127;
        max_abs = std::max(max_abs, std::abs(q.quadratic(i, j)));
      }
    }
    const double c = std::exp(log_scale(rng));
    const dpo::IsingModel scaled(c * m.linear(), c * m.quadratic(), 0.0);
    const auto qs = dpo::quantize_int8(scaled);
    const bool invariant = qs.linear == q.linear && qs.quadratic == q.quadratic;
    ok += in_range && max_abs == 127 && invariant;
  }
  return {ok == 100, std::to_string(ok) + "/100 models satisfy range, +-127 and rescaling invariance"};
}

// 5. Every accepted tuning step strictly lowers DR and keeps a common minimizer.
Outcome dr_tuning() {
  std::mt19937_64 rng(505);
  int ok = 0, steps = 0, tuned_models = 0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 2 + rng() % 9;
    auto m = oracle::random_ising(n, rng);
    // Sparsify some models so that exact ties and zero entries occur.
    if (k % 3 == 0) {
      Eigen::MatrixXd J = m.quadratic();
      Eigen::VectorXd h = m.linear();
      for (Eigen::Index i = 0; i < J.rows(); ++i) {
        h[i] = std::round(h[i] * 4.0) / 4.0;
        for (Eigen::Index j = i + 1; j < J.cols(); ++j) {
          if (rng() % 2) J(i, j) = J(j, i) = 0.0;
        }
      }
      m = dpo::IsingModel(h, J, 0.0);
    }
    const auto res = dpo::reduce_dynamic_range(m);
    bool good = true;
    double prev = dpo::dynamic_range(m).bits;
    dpo::IsingModel cur = m;
    for (const auto& s : res.steps) {
      good = good && s.dr_after < s.dr_before && s.dr_before <= prev + 1e-12;
      prev = s.dr_after;
    }
    good = good && std::abs(dpo::dynamic_range(res.model).bits - prev) <= 1e-12;
    const double tol_a = 1e-9 * (1.0 + m.linear().cwiseAbs().sum() + m.quadratic().cwiseAbs().sum());
    const double tol_b = 1e-9 * (1.0 + res.model.linear().cwiseAbs().sum() +
                                 res.model.quadratic().cwiseAbs().sum());
    const auto a = oracle::enumerate_ising(m, tol_a);
    const auto b = oracle::enumerate_ising(res.model, tol_b);
    bool meet = false;
    for (auto x : a.argmins) {
      for (auto y : b.argmins) meet = meet || x == y;
    }
    good = good && meet;
    ok += good;
    steps += int(res.steps.size());
    tuned_models += !res.steps.empty();
  }
  return {ok == 200, std::to_string(ok) + "/200 models valid (" + std::to_string(steps) +
                         " accepted steps over " + std::to_string(tuned_models) + " tuned models)"};
}

// 6. Planted scale-separated instances: Global-INT8 zeroes every inter-block
//    coupling and is infeasible; Block-INT8 is feasible.
Outcome scale_separation() {
  const auto exact = std::make_shared<dpo::ExhaustiveBackend>();
  const dpo::FinitePrecisionAdapter int8(exact);
  int hold = 0;
  double worst_ratio = 0.0;
  std::string misses;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = dpo::planted_scale_separated_instance(seed);
    const auto sep = dpo::scale_separation_report(inst.qubo);
    worst_ratio = std::max(worst_ratio, sep.ratio);
    const auto g = int8.solve(dpo::SolveRequest{inst.qubo, seed, std::nullopt});
    const auto& loss = g.quantization->loss;
    const bool all_zeroed = loss.inter_nonzero > 0 && loss.zeroed_inter == loss.inter_nonzero;
    const bool global_infeasible =
        !dpo::check_feasibility(dpo::decode(g.assignment, inst.config), inst.config.budget).feasible;
    dpo::BcdConfig bcd;
    bcd.seed = seed;
    const auto b = dpo::bcd_solve(inst.qubo, int8, bcd);
    const bool block_feasible =
        dpo::check_feasibility(dpo::decode(b.assignment, inst.config), inst.config.budget).feasible;
    const bool ok = sep.ratio < 1.0 / 255.0 && all_zeroed && global_infeasible && block_feasible;
    hold += ok;
    if (!ok) misses += " seed" + std::to_string(seed);
  }
  return {hold >= 9, "pattern holds on " + std::to_string(hold) + "/10 (>= 9), max inter/intra " +
                         fmt(worst_ratio) + (misses.empty() ? "" : ", misses:" + misses)};
}

// 7. Problem sizes for the S/M/L configurations.
Outcome table_shapes() {
  const auto raw = dpo::load_prices(std::string(DPO_DATA_DIR) + "/synthetic_6x529.csv");
  const std::size_t nts[] = {2, 6, 22};
  const std::size_t expect[] = {48, 144, 528};
  std::string got;
  bool ok = true;
  for (int k = 0; k < 3; ++k) {
    dpo::DpoConfig c;
    c.n_t = nts[k];
    c.n_a = 6;
    c.n_r = 4;
    c.budget = 15;
    const auto panel = dpo::panel_from_prices(raw, c.n_t, c.dt, dpo::TrimRule::KeepLeading, false);
    const auto inst = dpo::make_instance(c, panel);
    ok = ok && inst.qubo.n() == expect[k] && inst.qubo.require_partition().num_blocks() == nts[k];
    got += (k ? "/" : "") + std::to_string(inst.qubo.n());
  }
  return {ok, "n = " + got + " (expect 48/144/528)"};
}

// 8. Risk estimators are symmetric PSD; shrinkage keeps the trace.
Outcome risk_estimators() {
  std::mt19937_64 rng(808);
  int ok = 0;
  for (int k = 0; k < 500; ++k) {
    const std::size_t na = 1 + rng() % 8;
    const std::size_t dt = 2 + rng() % 30;
    const auto panel = oracle::random_panel(1, na, dt, rng, 0.01 + 0.05 * double(rng() % 100) / 100.0);
    bool good = true;
    for (int which = 0; which < 3; ++which) {
      dpo::RiskMatrix r;
      if (which == 0) r = dpo::covariance_risk(panel, 0);
      if (which == 1) r = dpo::semicovariance_risk(panel, 0, 0.0);
      if (which == 2) r = dpo::shrinkage_risk(panel, 0);
      const auto& S = r.sigma;
      good = good && S.isApprox(S.transpose(), 0.0);
      const double norm = S.norm();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
      good = good && es.eigenvalues().minCoeff() >= -1e-10 * norm;
      if (which == 2) {
        const double d = r.shrinkage->delta;
        good = good && d >= 0.0 && d <= 1.0;
        const double tc = oracle::sample_covariance(panel, 0).trace();
        good = good && std::abs(S.trace() - tc) <= 1e-10 * std::max(1.0, std::abs(tc));
      }
    }
    ok += good;
  }
  return {ok == 500, std::to_string(ok) + "/500 panels pass all three estimators"};
}

// 9. SA and tabu at default effort reach the exhaustive optimum.
Outcome backend_calibration() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(909);
  const dpo::ExhaustiveBackend exact;
  const dpo::SimulatedAnnealingBackend sa;
  const dpo::TabuBackend tabu;
  int sa_hits = 0, tabu_hits = 0;
  for (int k = 0; k < 100; ++k) {
    const dpo::Qubo q(oracle::random_symmetric(10, rng), 0.0);
    const double best = exact.solve({q, 0, std::nullopt}).reported_energy;
    const double tol = 1e-9 * oracle::coeff_scale(q);
    sa_hits += sa.solve({q, std::uint64_t(k), std::nullopt}).reported_energy <= best + tol;
    tabu_hits += tabu.solve({q, std::uint64_t(k), std::nullopt}).reported_energy <= best + tol;
  }
  const double secs = seconds_since(t0);
  return {sa_hits >= 95 && tabu_hits >= 95 && secs < 120.0,
          "sa " + std::to_string(sa_hits) + "/100, tabu " + std::to_string(tabu_hits) +
              "/100 (>= 95 each), " + fmt(secs) + " s (< 120)"};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// 10. The full matrix on the size-S fixture is reproducible byte for byte.
Outcome matrix_determinism() {
  namespace fs = std::filesystem;
  const auto t0 = Clock::now();
  const auto cfg = dpo::load_run_config(std::string(DPO_DATA_DIR) + "/../configs/default.json");
  const auto raw = dpo::load_prices(std::string(DPO_DATA_DIR) + "/synthetic_6x529.csv");
  const auto panel = dpo::panel_from_prices(raw, cfg.model.n_t, cfg.model.dt, cfg.data.trim,
                                            cfg.data.add_cash);
  const auto inst = dpo::make_instance(cfg.model, panel);
  const auto base = fs::temp_directory_path() / "dpo_acceptance_matrix";
  fs::remove_all(base);
  std::vector<dpo::ReportFiles> files;
  for (int rep = 0; rep < 2; ++rep) {
    const auto cells = dpo::run_matrix(inst, cfg.matrix);
    files.push_back(dpo::emit_report(inst, cells, base / ("run" + std::to_string(rep))));
  }
  const double secs = seconds_since(t0);
  bool same = slurp(files[0].summary) == slurp(files[1].summary) &&
              files[0].series.size() == files[1].series.size();
  for (std::size_t k = 0; same && k < files[0].series.size(); ++k) {
    same = files[0].series[k].filename() == files[1].series[k].filename() &&
           slurp(files[0].series[k]) == slurp(files[1].series[k]);
  }
  fs::remove_all(base);
  return {same && inst.qubo.n() == 48 && secs < 600.0,
          std::string(same ? "identical" : "DIFFERENT") + " summary and " +
              std::to_string(files[0].series.size()) + " series files, n = " +
              std::to_string(inst.qubo.n()) + ", two matrix runs in " + fmt(secs) +
              " s (< 600)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 energy identity", energy_identity},
      {"2 BCD correctness", bcd_correctness},
      {"3 subproblem delta identity", delta_identity},
      {"4 quantization contract", quantization_contract},
      {"5 DR tuning", dr_tuning},
      {"6 scale-separation pattern", scale_separation},
      {"7 S/M/L problem sizes", table_shapes},
      {"8 risk estimators", risk_estimators},
      {"9 backend calibration", backend_calibration},
      {"10 end-to-end determinism", matrix_determinism},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << name << "] " << o.detail << std::endl;
  }
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << "(" << criteria.size() - failed << "/"
            << criteria.size() << ")" << std::endl;
  return failed ? 1 : 0;
}
