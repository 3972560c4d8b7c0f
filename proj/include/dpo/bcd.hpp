#pragma once

// Block coordinate descent over a block-partitioned QUBO.
//
// With every block except i frozen, the energy restricted to block i is
//   x_i^T Q_ii x_i + h_i^T x_i + const,  h_i = 2 Q_{i-1,i}^T x_{i-1} + 2 Q_{i,i+1} x_{i+1},
// and since x_i is binary the linear part folds into the diagonal:
//   Q_hat_i = Q_ii + diag(h_i).
// One global iteration sweeps i = 0..m-1 in ascending order. Each block is
// solved `repeats` times with distinct seeds; the candidate with the lowest
// full-precision local energy replaces the block only if it does not worsen
// the incumbent, so the recorded global energy never increases.
//
// Worst-case work: O(J * m * I * 2^{block size}) with an exact block solver,
// against O(2^n) for the undecomposed problem.

#include "dpo/backends.hpp"
#include "dpo/qubo.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace dpo {

struct AllZerosInit {};
struct RandomInit {
  std::uint64_t seed = 0;
};
struct ProvidedInit {
  Assignment x;
};
using InitPolicy = std::variant<AllZerosInit, RandomInit, ProvidedInit>;

struct BcdConfig {
  std::size_t global_iters = 3;  // J
  std::size_t repeats = 3;       // I, solver runs per block
  std::uint64_t seed = 0;
  InitPolicy init = AllZerosInit{};
  /// Stop once a full sweep leaves x unchanged.
  bool early_stop = false;
  /// Passed through to every block solve.
  std::optional<std::uint64_t> effort;

  void validate() const {
    if (global_iters == 0) throw std::invalid_argument("BcdConfig: global_iters must be >= 1");
    if (repeats == 0) throw std::invalid_argument("BcdConfig: repeats must be >= 1");
    if (effort && *effort == 0) throw std::invalid_argument("BcdConfig: effort must be > 0");
  }
};

struct Subproblem {
  Eigen::MatrixXd q_hat;
  std::size_t block_index = 0;
  IndexRange range;
  /// Bits of the neighbouring blocks at extraction time (empty at the ends).
  std::vector<std::uint8_t> previous_block;
  std::vector<std::uint8_t> next_block;

  std::size_t size() const { return range.size(); }

  /// y^T Q_hat y for a candidate block vector.
  double local_energy(const Assignment& y) const {
    if (y.size() != size()) {
      throw std::invalid_argument("Subproblem::local_energy: length mismatch");
    }
    return quadratic_form(q_hat, y);
  }

  Qubo as_qubo() const { return Qubo(q_hat, 0.0, BlockPartition::single(size())); }
};

class BlockSolveError : public std::runtime_error {
 public:
  BlockSolveError(std::size_t block, const std::string& what)
      : std::runtime_error("block " + std::to_string(block) + ": " + what),
        block_(block) {}
  std::size_t block() const { return block_; }

 private:
  std::size_t block_;
};

struct BcdTraceRecord {
  std::size_t iteration = 0;
  std::size_t block = 0;
  double energy_before = 0.0;
  double energy_after = 0.0;
  /// Sum of backend wall times over the repeats of this block.
  double wall_time = 0.0;
  std::string backend_id;
  /// Seed of the first repeat; repeat k used seed + k.
  std::uint64_t seed = 0;
  bool accepted = false;
};

struct BcdResult {
  Assignment assignment;
  double energy = 0.0;
  std::vector<BcdTraceRecord> trace;
  /// Summed backend wall time over all block solves.
  double solver_time = 0.0;
  /// Wall time of the whole descent including extraction and write-back.
  double total_time = 0.0;
  std::size_t iterations_run = 0;
};

class BcdAborted : public std::runtime_error {
 public:
  BcdAborted(const BlockSolveError& cause, std::vector<BcdTraceRecord> partial)
      : std::runtime_error(cause.what()),
        block_(cause.block()),
        partial_(std::move(partial)) {}
  std::size_t block() const { return block_; }
  const std::vector<BcdTraceRecord>& partial_trace() const { return partial_; }

 private:
  std::size_t block_;
  std::vector<BcdTraceRecord> partial_;
};

inline Subproblem extract_subproblem(const Qubo& q, const Assignment& x, std::size_t i) {
  const auto& part = q.require_partition();
  if (i >= part.num_blocks()) {
    throw std::out_of_range("extract_subproblem: block " + std::to_string(i) +
                            " out of range (" + std::to_string(part.num_blocks()) +
                            " blocks)");
  }
  if (x.size() != q.n()) {
    throw std::invalid_argument("extract_subproblem: assignment has " +
                                std::to_string(x.size()) + " bits, model has " +
                                std::to_string(q.n()));
  }
  const auto& Q = q.coeffs();
  Subproblem sub;
  sub.block_index = i;
  sub.range = part.block(i);
  const auto b = Eigen::Index(sub.range.begin);
  const auto ni = Eigen::Index(sub.range.size());
  sub.q_hat = Q.block(b, b, ni, ni);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(ni);
  if (i > 0) {
    const auto prev = part.block(i - 1);
    const Assignment xp = x.slice(prev);
    h += 2.0 * Q.block(Eigen::Index(prev.begin), b, Eigen::Index(prev.size()), ni)
                   .transpose() *
         xp.as_vector();
    sub.previous_block.assign(xp.bits().begin(), xp.bits().end());
  }
  if (i + 1 < part.num_blocks()) {
    const auto next = part.block(i + 1);
    const Assignment xn = x.slice(next);
    h += 2.0 * Q.block(b, Eigen::Index(next.begin), ni, Eigen::Index(next.size())) *
         xn.as_vector();
    sub.next_block.assign(xn.bits().begin(), xn.bits().end());
  }
  sub.q_hat.diagonal() += h;
  return sub;
}

struct BlockSolution {
  Assignment bits;
  double local_energy = 0.0;
  std::size_t run = 0;
  double wall_time = 0.0;
  std::string backend_id;
};

/// Runs `backend` cfg.repeats times with seeds base_seed + k and keeps the
/// candidate with the lowest full-precision local energy (lowest k on ties).
inline BlockSolution solve_block(const Subproblem& sub, const Backend& backend,
                                 const BcdConfig& cfg, std::uint64_t base_seed) {
  cfg.validate();
  const Qubo local = sub.as_qubo();
  BlockSolution best;
  bool have = false;
  for (std::size_t k = 0; k < cfg.repeats; ++k) {
    SolveResult r;
    try {
      r = backend.solve(SolveRequest{local, base_seed + k, cfg.effort});
    } catch (const std::exception& e) {
      throw BlockSolveError(sub.block_index, e.what());
    }
    if (r.assignment.size() != sub.size()) {
      throw BlockSolveError(sub.block_index, "backend returned " +
                                                 std::to_string(r.assignment.size()) +
                                                 " bits for a block of " +
                                                 std::to_string(sub.size()));
    }
    best.wall_time += r.wall_time;
    const double e = sub.local_energy(r.assignment);
    if (!have || e < best.local_energy) {
      best.bits = std::move(r.assignment);
      best.local_energy = e;
      best.run = k;
      have = true;
    }
    best.backend_id = std::move(r.backend_id);
  }
  return best;
}

inline BlockSolution solve_block(const Subproblem& sub, const Backend& backend,
                                 const BcdConfig& cfg) {
  return solve_block(sub, backend, cfg, cfg.seed);
}

inline Assignment write_back(const Assignment& x, const IndexRange& range,
                             const Assignment& block) {
  if (block.size() != range.size()) {
    throw std::invalid_argument("write_back: block solution has " +
                                std::to_string(block.size()) + " bits, block has " +
                                std::to_string(range.size()));
  }
  if (range.end > x.size()) throw std::out_of_range("write_back: block outside assignment");
  Assignment out = x;
  for (std::size_t k = 0; k < block.size(); ++k) out.set(range.begin + k, block[k]);
  return out;
}

inline Assignment write_back(const Qubo& q, const Assignment& x, std::size_t i,
                             const Assignment& block) {
  const auto& part = q.require_partition();
  if (i >= part.num_blocks()) throw std::out_of_range("write_back: block index out of range");
  return write_back(x, part.block(i), block);
}

inline Assignment initial_assignment(const InitPolicy& init, std::size_t n) {
  if (std::holds_alternative<AllZerosInit>(init)) return Assignment::zeros(n);
  if (const auto* r = std::get_if<RandomInit>(&init)) {
    std::mt19937_64 rng(r->seed);
    return detail::random_assignment(n, rng);
  }
  const auto& x = std::get<ProvidedInit>(init).x;
  if (x.size() != n) {
    throw std::invalid_argument("bcd: provided initial assignment has " +
                                std::to_string(x.size()) + " bits, model has " +
                                std::to_string(n));
  }
  return x;
}

/// Seed of the first repeat for block `block` in global iteration `iter`.
inline std::uint64_t block_seed(const BcdConfig& cfg, std::size_t num_blocks,
                                std::size_t iter, std::size_t block) {
  return cfg.seed + (std::uint64_t(iter) * num_blocks + block) * cfg.repeats;
}

inline BcdResult bcd_solve(const Qubo& q, const Backend& backend, const BcdConfig& cfg) {
  cfg.validate();
  const auto& part = q.require_partition();
  const auto check = verify_block_tridiagonal(q);
  if (!check.ok) {
    const auto& v = check.violations.front();
    throw std::invalid_argument(
        "bcd_solve: model is not block tridiagonal (coupling between blocks " +
        std::to_string(v.block_p) + " and " + std::to_string(v.block_q) + ")");
  }
  const auto start = std::chrono::steady_clock::now();
  BcdResult res;
  Assignment x = initial_assignment(cfg.init, q.n());
  double energy = qubo_energy(q, x);
  const std::size_t m = part.num_blocks();
  for (std::size_t it = 0; it < cfg.global_iters; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < m; ++i) {
      const Subproblem sub = extract_subproblem(q, x, i);
      const Assignment current = x.slice(sub.range);
      const double current_local = sub.local_energy(current);
      const std::uint64_t seed = block_seed(cfg, m, it, i);
      BlockSolution sol;
      try {
        sol = solve_block(sub, backend, cfg, seed);
      } catch (const BlockSolveError& e) {
        throw BcdAborted(e, std::move(res.trace));
      }
      BcdTraceRecord rec;
      rec.iteration = it;
      rec.block = i;
      rec.energy_before = energy;
      rec.wall_time = sol.wall_time;
      rec.backend_id = sol.backend_id;
      rec.seed = seed;
      rec.accepted = sol.local_energy <= current_local;
      if (rec.accepted && sol.bits != current) {
        x = write_back(x, sub.range, sol.bits);
        energy = qubo_energy(q, x);
        changed = true;
      }
      rec.energy_after = energy;
      res.solver_time += sol.wall_time;
      res.trace.push_back(std::move(rec));
    }
    res.iterations_run = it + 1;
    if (cfg.early_stop && !changed) break;
  }
  res.assignment = std::move(x);
  res.energy = energy;
  res.total_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

/// One JSON object per line; wall_time is the only non-deterministic field.
/// `leading_fields` (e.g. "\"run\":0,") is inserted at the start of each object.
inline void write_trace_jsonl(std::ostream& os, const std::vector<BcdTraceRecord>& trace,
                              const std::string& leading_fields = {}) {
  const auto prec = os.precision(17);
  for (const auto& r : trace) {
    os << '{' << leading_fields << "\"iteration\":" << r.iteration << ",\"block\":" << r.block
       << ",\"energy_before\":" << r.energy_before << ",\"energy_after\":" << r.energy_after
       << ",\"wall_time\":" << r.wall_time << ",\"backend\":\"" << r.backend_id
       << "\",\"seed\":" << r.seed << ",\"accepted\":" << (r.accepted ? "true" : "false")
       << "}\n";
  }
  os.precision(prec);
}

}  // namespace dpo
