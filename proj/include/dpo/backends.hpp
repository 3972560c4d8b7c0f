#pragma once

// Uniform solver interface over QUBO minimizers:
//   exhaustive  Gray-code enumeration, exact, ties -> lowest sum_i x_i 2^i
//   sa          single-flip Metropolis sweeps, geometric cooling
//   tabu        steepest single-flip moves, fixed tenure, best-energy aspiration
//   int8(name)  QUBO -> Ising, dynamic-range tuning, int8 quantization, then
//               the inner backend on the quantized model
//
// All backends are deterministic functions of (model, seed, effort).

#include "dpo/precision.hpp"
#include "dpo/qubo.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace dpo {

using SolveModel = std::variant<Qubo, QuantizedIsing>;

struct SolveRequest {
  SolveModel model;
  std::uint64_t seed = 0;
  /// Backend-specific count (sweeps for sa, iterations for tabu); unset means
  /// the backend default. Must be > 0 when set.
  std::optional<std::uint64_t> effort;
};

struct QuantizationInfo {
  QuantizedIsing model;
  QuantizationLoss loss;
  double dr_before = 0.0;
  double dr_after = 0.0;
};

struct SolveResult {
  Assignment assignment;
  /// Energy of `assignment` under the model the backend solved (quantized
  /// units for int8 adapters).
  double reported_energy = 0.0;
  double wall_time = 0.0;  // seconds
  std::string backend_id;
  std::optional<QuantizationInfo> quantization;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  virtual SolveResult solve(const SolveRequest& request) const = 0;
};

namespace detail {

inline Qubo request_qubo(const SolveRequest& req) {
  if (req.effort && *req.effort == 0) {
    throw std::invalid_argument("SolveRequest: effort must be > 0");
  }
  if (const auto* q = std::get_if<Qubo>(&req.model)) return *q;
  const auto& qi = std::get<QuantizedIsing>(req.model);
  qi.validate();
  return qi.to_qubo();
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Bit-flip bookkeeping for x^T Q x: field_k = sum_j Q_kj x_j.
class BitState {
 public:
  BitState(const Qubo& q, Assignment x) : q_(&q), x_(std::move(x)) {
    field_ = q.coeffs() * x_.as_vector();
    energy_ = qubo_energy(q, x_);
  }

  double energy() const { return energy_; }
  const Assignment& assignment() const { return x_; }

  double flip_delta(std::size_t k) const {
    const auto i = Eigen::Index(k);
    const double qkk = q_->coeffs()(i, i);
    const double s = x_[k] ? -1.0 : 1.0;
    return s * (qkk + 2.0 * (field_[i] - qkk * x_[k]));
  }

  void flip(std::size_t k, double delta) {
    const double s = x_[k] ? -1.0 : 1.0;
    energy_ += delta;
    x_.flip(k);
    field_ += s * q_->coeffs().col(Eigen::Index(k));
  }

 private:
  const Qubo* q_;
  Assignment x_;
  Eigen::VectorXd field_;
  double energy_ = 0.0;
};

inline Assignment random_assignment(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::uint8_t> bits(n);
  for (auto& b : bits) b = rng() & 1U;
  return Assignment(std::move(bits));
}

inline double energy_scale(const Qubo& q) {
  return 1.0 + q.coeffs().cwiseAbs().sum() + std::abs(q.offset());
}

inline SolveResult finish(const Qubo& q, Assignment x, const Stopwatch& sw,
                          std::string id) {
  SolveResult r;
  r.reported_energy = qubo_energy(q, x);
  r.assignment = std::move(x);
  r.wall_time = sw.seconds();
  r.backend_id = std::move(id);
  return r;
}

}  // namespace detail

class ExhaustiveBackend final : public Backend {
 public:
  explicit ExhaustiveBackend(std::size_t max_variables = 24)
      : max_variables_(max_variables) {
    if (max_variables_ > 40) {
      throw std::invalid_argument("ExhaustiveBackend: cap must be <= 40");
    }
  }

  std::string id() const override { return "exhaustive"; }

  SolveResult solve(const SolveRequest& req) const override {
    detail::Stopwatch sw;
    const Qubo q = detail::request_qubo(req);
    const std::size_t n = q.n();
    if (n > max_variables_) {
      throw std::invalid_argument("exhaustive: " + std::to_string(n) +
                                  " variables exceed the cap of " +
                                  std::to_string(max_variables_));
    }
    const auto& Q = q.coeffs();
    const double* data = Q.data();
    std::vector<double> field(n, 0.0);
    std::vector<std::uint8_t> x(n, 0);
    const double tol = 1e-12 * detail::energy_scale(q);
    double e = q.offset();
    double best_e = e;
    std::uint64_t best_code = 0;
    std::uint64_t code = 0;
    const std::uint64_t count = std::uint64_t{1} << n;
    for (std::uint64_t k = 1; k < count; ++k) {
      const auto b = static_cast<std::size_t>(std::countr_zero(k));
      const double qbb = data[b * n + b];
      const double s = x[b] ? -1.0 : 1.0;
      e += s * (qbb + 2.0 * (field[b] - qbb * x[b]));
      x[b] ^= 1U;
      code ^= std::uint64_t{1} << b;
      const double* col = data + b * n;
      for (std::size_t j = 0; j < n; ++j) field[j] += s * col[j];
      if (e < best_e - tol || (e <= best_e + tol && code < best_code)) {
        best_e = std::min(best_e, e);
        best_code = code;
      }
    }
    return detail::finish(q, Assignment::from_integer(best_code, n), sw, id());
  }

 private:
  std::size_t max_variables_;
};

struct AnnealingParams {
  /// Starting temperature; unset means max |Q_ij| * n.
  std::optional<double> initial_temperature;
  double cooling = 0.97;
  /// Each sweep proposes one flip per variable.
  std::uint64_t sweeps = 200;
};

class SimulatedAnnealingBackend final : public Backend {
 public:
  explicit SimulatedAnnealingBackend(AnnealingParams params = {})
      : params_(params) {
    if (params_.initial_temperature && !(*params_.initial_temperature > 0.0)) {
      throw std::invalid_argument("sa: initial temperature must be > 0");
    }
    if (!(params_.cooling > 0.0 && params_.cooling < 1.0)) {
      throw std::invalid_argument("sa: cooling factor must lie in (0, 1)");
    }
    if (params_.sweeps == 0) throw std::invalid_argument("sa: sweeps must be > 0");
  }

  std::string id() const override { return "sa"; }

  SolveResult solve(const SolveRequest& req) const override {
    detail::Stopwatch sw;
    const Qubo q = detail::request_qubo(req);
    const std::size_t n = q.n();
    std::mt19937_64 rng(req.seed);
    detail::BitState state(q, detail::random_assignment(n, rng));
    Assignment best = state.assignment();
    double best_e = state.energy();
    if (n == 0) return detail::finish(q, best, sw, id());

    double t0 = params_.initial_temperature.value_or(
        q.coeffs().cwiseAbs().maxCoeff() * double(n));
    if (!(t0 > 0.0)) t0 = 1.0;
    const std::uint64_t sweeps = req.effort.value_or(params_.sweeps);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double temperature = t0;
    for (std::uint64_t s = 0; s < sweeps; ++s, temperature *= params_.cooling) {
      for (std::size_t k = 0; k < n; ++k) {
        const double d = state.flip_delta(k);
        if (d <= 0.0 || unif(rng) < std::exp(-d / temperature)) {
          state.flip(k, d);
          if (state.energy() < best_e) {
            best_e = state.energy();
            best = state.assignment();
          }
        }
      }
    }
    return detail::finish(q, std::move(best), sw, id());
  }

 private:
  AnnealingParams params_;
};

struct TabuParams {
  /// Unset means max(7, n / 10).
  std::optional<std::size_t> tenure;
  /// Unset means 100 * n.
  std::optional<std::uint64_t> iterations;
};

class TabuBackend final : public Backend {
 public:
  explicit TabuBackend(TabuParams params = {}) : params_(params) {
    if (params_.tenure && *params_.tenure == 0) {
      throw std::invalid_argument("tabu: tenure must be >= 1");
    }
    if (params_.iterations && *params_.iterations == 0) {
      throw std::invalid_argument("tabu: iterations must be > 0");
    }
  }

  std::string id() const override { return "tabu"; }

  SolveResult solve(const SolveRequest& req) const override {
    detail::Stopwatch sw;
    const Qubo q = detail::request_qubo(req);
    const std::size_t n = q.n();
    std::mt19937_64 rng(req.seed);
    detail::BitState state(q, detail::random_assignment(n, rng));
    Assignment best = state.assignment();
    double best_e = state.energy();
    if (n == 0) return detail::finish(q, best, sw, id());

    const std::size_t tenure = params_.tenure.value_or(std::max<std::size_t>(7, n / 10));
    const std::uint64_t iterations =
        req.effort.value_or(params_.iterations.value_or(100 * std::uint64_t(n)));
    const double tol = 1e-12 * detail::energy_scale(q);
    std::vector<std::uint64_t> tabu_until(n, 0);
    for (std::uint64_t it = 1; it <= iterations; ++it) {
      std::size_t pick = n;
      double pick_delta = 0.0;
      std::size_t fallback = 0;
      double fallback_delta = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < n; ++k) {
        const double d = state.flip_delta(k);
        if (d < fallback_delta) {
          fallback_delta = d;
          fallback = k;
        }
        const bool aspirates = state.energy() + d < best_e - tol;
        if (tabu_until[k] >= it && !aspirates) continue;
        if (pick == n || d < pick_delta) {
          pick = k;
          pick_delta = d;
        }
      }
      if (pick == n) {
        pick = fallback;
        pick_delta = fallback_delta;
      }
      state.flip(pick, pick_delta);
      tabu_until[pick] = it + tenure;
      if (state.energy() < best_e) {
        best_e = state.energy();
        best = state.assignment();
      }
    }
    return detail::finish(q, std::move(best), sw, id());
  }

 private:
  TabuParams params_;
};

/// Emulates a signed 8-bit coefficient device in front of `inner`. Callers
/// re-score the returned assignment in full precision.
class FinitePrecisionAdapter final : public Backend {
 public:
  explicit FinitePrecisionAdapter(std::shared_ptr<const Backend> inner,
                                  TuningOptions tuning = {})
      : inner_(std::move(inner)), tuning_(tuning) {
    if (!inner_) throw std::invalid_argument("int8 adapter: no inner backend");
  }

  std::string id() const override { return "int8(" + inner_->id() + ")"; }

  SolveResult solve(const SolveRequest& req) const override {
    detail::Stopwatch sw;
    if (std::holds_alternative<QuantizedIsing>(req.model)) {
      auto r = inner_->solve(req);
      r.backend_id = id();
      r.wall_time = sw.seconds();
      return r;
    }
    const Qubo& q = std::get<Qubo>(req.model);
    const IsingModel source = qubo_to_ising(q).without_offset();
    const auto tuned = reduce_dynamic_range(source, tuning_);
    QuantizationInfo info;
    info.model = quantize_int8(tuned.model);
    info.model.tuning_steps = tuned.steps.size();
    info.loss = quantization_loss_report(source, info.model, q.partition());
    info.dr_before = dynamic_range(source).bits;
    info.dr_after = tuned.steps.empty() ? info.dr_before
                                        : tuned.steps.back().dr_after;

    SolveRequest inner_req{info.model, req.seed, req.effort};
    auto r = inner_->solve(inner_req);
    r.backend_id = id();
    r.wall_time = sw.seconds();
    r.quantization = std::move(info);
    return r;
  }

  const Backend& inner() const { return *inner_; }

 private:
  std::shared_ptr<const Backend> inner_;
  TuningOptions tuning_;
};

struct BackendOptions {
  std::size_t exhaustive_cap = 24;
  AnnealingParams annealing;
  TabuParams tabu;
  TuningOptions tuning;
};

/// "exhaustive" | "sa" | "tabu", optionally wrapped as "int8(<name>)".
inline std::shared_ptr<const Backend> make_backend(const std::string& name,
                                                   const BackendOptions& opts = {}) {
  const std::string prefix = "int8(";
  if (name.size() > prefix.size() + 1 && name.rfind(prefix, 0) == 0 &&
      name.back() == ')') {
    const auto inner = name.substr(prefix.size(), name.size() - prefix.size() - 1);
    if (inner.rfind(prefix, 0) == 0) {
      throw std::invalid_argument("make_backend: nested int8 adapters");
    }
    return std::make_shared<FinitePrecisionAdapter>(make_backend(inner, opts),
                                                    opts.tuning);
  }
  if (name == "exhaustive") {
    return std::make_shared<ExhaustiveBackend>(opts.exhaustive_cap);
  }
  if (name == "sa") return std::make_shared<SimulatedAnnealingBackend>(opts.annealing);
  if (name == "tabu") return std::make_shared<TabuBackend>(opts.tabu);
  throw std::invalid_argument("make_backend: unknown backend '" + name +
                              "' (expected exhaustive, sa, tabu or int8(<name>))");
}

inline bool is_finite_precision(const Backend& b) {
  return dynamic_cast<const FinitePrecisionAdapter*>(&b) != nullptr;
}

}  // namespace dpo
