#pragma once

// Coefficient conditioning for signed 8-bit execution:
//   * dynamic range DR(X) = log2(max D(X) / min D(X)) over the distinct
//     coefficient values, D(X) = nonzero pairwise absolute differences;
//   * single-entry tuning that lowers DR while keeping a global minimizer;
//   * scale-round-clip quantization X~ = clip(round(127 / alpha * X), -128, 127)
//     with alpha = max |X|.
//
// Coefficients are the linear fields and the upper-triangle couplings of an
// IsingModel, taken jointly. Zero values participate; zero differences do not.

#include "dpo/qubo.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpo {

struct CoefficientRef {
  enum class Kind { Linear, Quadratic };
  Kind kind = Kind::Linear;
  std::size_t i = 0;
  std::size_t j = 0;  // == i for linear entries
};

/// Flat view of every linear and quadratic (i < j) coefficient of a model.
struct CoefficientSet {
  std::vector<double> values;
  std::vector<CoefficientRef> refs;

  static CoefficientSet from_ising(const IsingModel& m) {
    CoefficientSet s;
    const auto n = m.n();
    s.values.reserve(n + n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
      s.values.push_back(m.linear()[Eigen::Index(i)]);
      s.refs.push_back({CoefficientRef::Kind::Linear, i, i});
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        s.values.push_back(m.quadratic()(Eigen::Index(i), Eigen::Index(j)));
        s.refs.push_back({CoefficientRef::Kind::Quadratic, i, j});
      }
    }
    return s;
  }
};

struct DynamicRange {
  double bits = 0.0;
  double max_difference = 0.0;
  double min_difference = 0.0;
  bool degenerate = true;  // fewer than two distinct values
};

namespace detail {

inline std::vector<double> distinct_sorted(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

inline DynamicRange dynamic_range_sorted(const std::vector<double>& v) {
  DynamicRange dr;
  if (v.size() < 2) return dr;
  dr.degenerate = false;
  dr.max_difference = v.back() - v.front();
  dr.min_difference = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < v.size(); ++k) {
    dr.min_difference = std::min(dr.min_difference, v[k] - v[k - 1]);
  }
  dr.bits = std::log2(dr.max_difference / dr.min_difference);
  return dr;
}

}  // namespace detail

/// Sort-based: max D is the value range and min D the tightest adjacent gap.
inline DynamicRange dynamic_range(std::span<const double> values) {
  for (double x : values) {
    if (!std::isfinite(x)) {
      throw std::invalid_argument("dynamic_range: non-finite coefficient");
    }
  }
  return detail::dynamic_range_sorted(detail::distinct_sorted(values));
}

inline DynamicRange dynamic_range(const CoefficientSet& x) {
  return dynamic_range(std::span<const double>(x.values));
}

inline DynamicRange dynamic_range(const IsingModel& m) {
  return dynamic_range(CoefficientSet::from_ising(m));
}

namespace detail {

// Incremental Ising evaluation on +/-1 spins.
class SpinState {
 public:
  SpinState(const IsingModel& m, Spins z) : m_(&m), z_(std::move(z)) {
    field_ = m.linear() + m.quadratic() * spin_vector();
    energy_ = ising_energy(m, z_);
  }

  double energy() const { return energy_; }
  const Spins& spins() const { return z_; }
  double flip_delta(std::size_t k) const {
    return -2.0 * z_[k] * field_[Eigen::Index(k)];
  }
  void flip(std::size_t k) {
    energy_ += flip_delta(k);
    const double old = z_[k];
    z_[k] = static_cast<std::int8_t>(-z_[k]);
    field_ += (-2.0 * old) * m_->quadratic().col(Eigen::Index(k));
  }

 private:
  Eigen::VectorXd spin_vector() const {
    Eigen::VectorXd v(Eigen::Index(z_.size()));
    for (std::size_t i = 0; i < z_.size(); ++i) v[Eigen::Index(i)] = z_[i];
    return v;
  }

  const IsingModel* m_;
  Spins z_;
  Eigen::VectorXd field_;
  double energy_ = 0.0;
};

// All Ising energies by Gray-code enumeration; index bit i set <-> z_i = -1.
inline std::vector<double> enumerate_ising(const IsingModel& m) {
  const std::size_t n = m.n();
  if (n > 24) throw std::invalid_argument("enumerate_ising: n > 24");
  const std::uint64_t count = std::uint64_t{1} << n;
  std::vector<double> energies(count);
  SpinState s(m, Spins(n, 1));
  std::uint64_t code = 0;
  energies[0] = s.energy();
  for (std::uint64_t k = 1; k < count; ++k) {
    const auto bit = static_cast<std::size_t>(std::countr_zero(k));
    s.flip(bit);
    code ^= std::uint64_t{1} << bit;
    energies[code] = s.energy();
  }
  return energies;
}

inline double energy_tolerance(const IsingModel& m) {
  return 1e-9 * (1.0 + m.linear().cwiseAbs().sum() +
                 0.5 * m.quadratic().cwiseAbs().sum());
}

// Steepest single-flip descent to a local minimum.
inline void descend(SpinState& s, double tol) {
  const std::size_t n = s.spins().size();
  while (true) {
    std::size_t best = n;
    double best_delta = -tol;
    for (std::size_t k = 0; k < n; ++k) {
      const double d = s.flip_delta(k);
      if (d < best_delta) {
        best_delta = d;
        best = k;
      }
    }
    if (best == n) return;
    s.flip(best);
  }
}

inline Spins random_spins(std::size_t n, std::mt19937_64& rng) {
  Spins z(n);
  for (auto& v : z) v = (rng() & 1U) ? 1 : -1;
  return z;
}

}  // namespace detail

struct TuningOptions {
  /// Maximum number of accepted steps.
  std::size_t budget = 100;
  /// Models up to this many spins are verified by exhaustive enumeration.
  std::size_t exact_limit = 12;
  /// Local-search restarts for the sampled check on larger models.
  std::size_t sample_restarts = 48;
  std::uint64_t seed = 0x5eed;
  /// Partial shrinks tried (halving) when a full move is rejected.
  std::size_t refinements = 6;
};

struct TuningStep {
  std::size_t index = 0;  // linear coefficient h_index
  double old_value = 0.0;
  double new_value = 0.0;
  double dr_before = 0.0;
  double dr_after = 0.0;
  bool extreme_move = true;  // false: tightest-gap move
};

struct TuningResult {
  IsingModel model;
  std::vector<TuningStep> steps;
};

/// Decides whether a tuned model still has a global minimizer of the source.
class MinimizerCheck {
 public:
  MinimizerCheck(const IsingModel& source, const TuningOptions& opts)
      : opts_(opts), n_(source.n()) {
    if (n_ <= opts.exact_limit) {
      const auto e = detail::enumerate_ising(source);
      const double lo = *std::min_element(e.begin(), e.end());
      const double tol = detail::energy_tolerance(source);
      for (std::uint64_t k = 0; k < e.size(); ++k) {
        if (e[k] <= lo + tol) argmin_.push_back(k);
      }
    } else {
      reference_ = best_found(source);
    }
  }

  bool exact() const { return n_ <= opts_.exact_limit; }

  bool preserves(const IsingModel& tuned) const {
    const double tol = detail::energy_tolerance(tuned);
    if (exact()) {
      const auto e = detail::enumerate_ising(tuned);
      const double lo = *std::min_element(e.begin(), e.end());
      for (auto k : argmin_) {
        if (e[k] <= lo + tol) return true;
      }
      return false;
    }
    detail::SpinState ref(tuned, reference_);
    for (std::size_t k = 0; k < n_; ++k) {
      if (ref.flip_delta(k) < -tol) return false;
    }
    const Spins other = best_found(tuned);
    return ising_energy(tuned, other) >= ref.energy() - tol;
  }

 private:
  Spins best_found(const IsingModel& m) const {
    std::mt19937_64 rng(opts_.seed);
    const double tol = detail::energy_tolerance(m);
    std::optional<detail::SpinState> best;
    for (std::size_t r = 0; r < std::max<std::size_t>(1, opts_.sample_restarts);
         ++r) {
      detail::SpinState s(m, detail::random_spins(n_, rng));
      detail::descend(s, tol);
      if (!best || s.energy() < best->energy() - tol) best = s;
    }
    return best->spins();
  }

  TuningOptions opts_;
  std::size_t n_;
  std::vector<std::uint64_t> argmin_;
  Spins reference_;
};

namespace detail {

struct Move {
  std::size_t index;
  double target;
  bool extreme;
};

inline bool toward_zero(double from, double to) {
  return std::abs(to) < std::abs(from) && (to == 0.0 || (to > 0) == (from > 0));
}

// Candidate single-entry moves on linear fields, most promising first.
inline std::vector<Move> candidate_moves(const IsingModel& m,
                                         const std::vector<double>& sorted) {
  std::vector<Move> moves;
  const auto& h = m.linear();
  auto holders = [&](double value) {
    std::vector<std::size_t> idx;
    for (Eigen::Index i = 0; i < h.size(); ++i) {
      if (h[i] == value) idx.push_back(std::size_t(i));
    }
    return idx;
  };

  // Extremes: shrink to the next smaller magnitude present in the set.
  std::vector<double> extremes{sorted.front(), sorted.back()};
  if (std::abs(extremes[0]) < std::abs(extremes[1])) {
    std::swap(extremes[0], extremes[1]);
  }
  for (double e : extremes) {
    double next = 0.0;
    for (double v : sorted) {
      if (std::abs(v) < std::abs(e)) next = std::max(next, std::abs(v));
    }
    const double target = std::copysign(next, e);
    if (!toward_zero(e, target)) continue;
    for (auto i : holders(e)) moves.push_back({i, target, true});
  }

  // Tightest gaps: merge the pair or widen the gap to the second-tightest.
  double g1 = std::numeric_limits<double>::infinity();
  double g2 = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < sorted.size(); ++k) {
    const double g = sorted[k] - sorted[k - 1];
    if (g < g1) {
      g2 = g1;
      g1 = g;
    } else if (g > g1 && g < g2) {
      g2 = g;
    }
  }
  for (std::size_t k = 1; k < sorted.size(); ++k) {
    const double lo = sorted[k - 1];
    const double hi = sorted[k];
    if (hi - lo != g1) continue;
    if (hi > 0.0 && lo >= 0.0) {
      for (auto i : holders(hi)) moves.push_back({i, lo, false});
      if (std::isfinite(g2) && lo > 0.0) {
        const double t = std::max(0.0, lo - (g2 - g1));
        for (auto i : holders(lo)) moves.push_back({i, t, false});
      }
    }
    if (lo < 0.0 && hi <= 0.0) {
      for (auto i : holders(lo)) moves.push_back({i, hi, false});
      if (std::isfinite(g2) && hi < 0.0) {
        const double t = std::min(0.0, hi + (g2 - g1));
        for (auto i : holders(hi)) moves.push_back({i, t, false});
      }
    }
  }
  return moves;
}

inline IsingModel with_linear(const IsingModel& m, std::size_t i, double v) {
  Eigen::VectorXd h = m.linear();
  h[Eigen::Index(i)] = v;
  return IsingModel(std::move(h), m.quadratic(), m.offset());
}

}  // namespace detail

/// Greedy single-entry tuning of linear fields. A move is accepted only if DR
/// strictly decreases and the MinimizerCheck against the source model passes;
/// rejected full moves are retried at half, quarter, ... of the distance.
inline TuningResult reduce_dynamic_range(const IsingModel& model,
                                         const TuningOptions& opts = {}) {
  TuningResult out{model, {}};
  if (opts.budget == 0 || model.n() == 0) return out;
  std::optional<MinimizerCheck> check;
  while (out.steps.size() < opts.budget) {
    const auto sorted =
        detail::distinct_sorted(CoefficientSet::from_ising(out.model).values);
    const auto dr = detail::dynamic_range_sorted(sorted);
    if (dr.degenerate) break;
    bool accepted = false;
    for (const auto& mv : detail::candidate_moves(out.model, sorted)) {
      const double from = out.model.linear()[Eigen::Index(mv.index)];
      for (std::size_t k = 0; k <= opts.refinements && !accepted; ++k) {
        const double target = from + std::ldexp(mv.target - from, -int(k));
        if (target == from) break;
        auto trial = detail::with_linear(out.model, mv.index, target);
        const auto dr_trial = dynamic_range(trial);
        if (!(dr_trial.bits < dr.bits)) continue;
        if (!check) check.emplace(model, opts);
        if (!check->preserves(trial)) continue;
        out.steps.push_back(
            {mv.index, from, target, dr.bits, dr_trial.bits, mv.extreme});
        out.model = std::move(trial);
        accepted = true;
      }
      if (accepted) break;
    }
    if (!accepted) break;
  }
  return out;
}

/// Signed 8-bit Ising coefficients with the factor that produced them.
struct QuantizedIsing {
  Eigen::VectorXi linear;
  Eigen::MatrixXi quadratic;
  /// 127 / alpha; 1 for the all-zero model.
  double scale = 1.0;
  bool degenerate = false;  // source model was all zero
  std::size_t tuning_steps = 0;

  std::size_t n() const { return std::size_t(linear.size()); }

  void validate() const {
    const auto n = linear.size();
    if (quadratic.rows() != n || quadratic.cols() != n) {
      throw std::invalid_argument("QuantizedIsing: dimension mismatch");
    }
    auto in_range = [](int v) { return v >= -128 && v <= 127; };
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!in_range(linear[i])) {
        throw std::invalid_argument("QuantizedIsing: coefficient out of int8");
      }
      if (quadratic(i, i) != 0) {
        throw std::invalid_argument("QuantizedIsing: nonzero coupling diagonal");
      }
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (quadratic(i, j) != quadratic(j, i) || !in_range(quadratic(i, j))) {
          throw std::invalid_argument("QuantizedIsing: invalid coupling");
        }
      }
    }
    if (!(scale > 0.0) || !std::isfinite(scale)) {
      throw std::invalid_argument("QuantizedIsing: scale must be > 0");
    }
  }

  /// Integer-valued model in quantized units, offset 0.
  IsingModel to_model() const {
    return IsingModel(linear.cast<double>(), quadratic.cast<double>(), 0.0);
  }

  /// Integer QUBO whose energies equal the quantized Ising energies.
  Qubo to_qubo() const { return ising_to_qubo(to_model()); }
};

inline QuantizedIsing quantize_int8(const IsingModel& model) {
  const auto n = Eigen::Index(model.n());
  double alpha = model.linear().size() ? model.linear().cwiseAbs().maxCoeff() : 0.0;
  if (n > 0) alpha = std::max(alpha, model.quadratic().cwiseAbs().maxCoeff());
  QuantizedIsing q;
  q.linear = Eigen::VectorXi::Zero(n);
  q.quadratic = Eigen::MatrixXi::Zero(n, n);
  if (alpha == 0.0) {
    q.degenerate = true;
    q.scale = 1.0;
    return q;
  }
  q.scale = 127.0 / alpha;
  auto convert = [&](double x) {
    // x / alpha first so that rescaling the source does not change the result.
    const double v = std::round(127.0 * (x / alpha));
    return static_cast<int>(std::clamp(v, -128.0, 127.0));
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    q.linear[i] = convert(model.linear()[i]);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      q.quadratic(i, j) = convert(model.quadratic()(i, j));
      q.quadratic(j, i) = q.quadratic(i, j);
    }
  }
  return q;
}

struct QuantizationLoss {
  std::size_t zeroed = 0;        // nonzero source, zero quantized
  std::size_t zeroed_intra = 0;  // linear terms and same-block couplings
  std::size_t zeroed_inter = 0;  // couplings across blocks
  std::size_t inter_nonzero = 0;
  double max_relative_error = 0.0;  // max |q / scale - x| / |x| over x != 0
};

inline QuantizationLoss quantization_loss_report(
    const IsingModel& model, const QuantizedIsing& q,
    const std::optional<BlockPartition>& partition = std::nullopt) {
  if (q.n() != model.n()) {
    throw std::invalid_argument("quantization_loss_report: dimension mismatch");
  }
  if (partition && partition->total_size() != model.n()) {
    throw std::invalid_argument("quantization_loss_report: partition mismatch");
  }
  QuantizationLoss loss;
  auto account = [&](double x, int v, bool inter) {
    if (x == 0.0) return;
    if (inter) ++loss.inter_nonzero;
    loss.max_relative_error = std::max(
        loss.max_relative_error, std::abs(double(v) / q.scale - x) / std::abs(x));
    if (v != 0) return;
    ++loss.zeroed;
    if (inter) {
      ++loss.zeroed_inter;
    } else {
      ++loss.zeroed_intra;
    }
  };
  const auto n = model.n();
  for (std::size_t i = 0; i < n; ++i) {
    account(model.linear()[Eigen::Index(i)], q.linear[Eigen::Index(i)], false);
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool inter =
          partition && partition->block_of(i) != partition->block_of(j);
      account(model.quadratic()(Eigen::Index(i), Eigen::Index(j)),
              q.quadratic(Eigen::Index(i), Eigen::Index(j)), inter);
    }
  }
  return loss;
}

}  // namespace dpo
