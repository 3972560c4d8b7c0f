#pragma once

// QUBO and Ising representations, energy evaluation and block-structure
// diagnostics.
//
// Conventions:
//   * A Qubo stores a fully symmetric coefficient matrix Q; the energy is
//     f(x) = x^T Q x + offset, so an off-diagonal pair contributes
//     2 Q_ij x_i x_j.
//   * An IsingModel stores linear fields h, a symmetric coupling matrix J with
//     zero diagonal and an offset. Each unordered pair is counted once:
//     E(z) = offset + sum_i h_i z_i + sum_{i<j} J_ij z_i z_j.
//   * Spins are related to bits by z_i = 1 - 2 x_i (x = 1 <-> z = -1).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dpo {

/// Half-open index range [begin, end).
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Ordered, contiguous, disjoint blocks covering 0..n.
class BlockPartition {
 public:
  BlockPartition() = default;

  explicit BlockPartition(std::vector<IndexRange> blocks)
      : blocks_(std::move(blocks)) {
    std::size_t expected = 0;
    for (const auto& b : blocks_) {
      if (b.begin != expected || b.end <= b.begin) {
        throw std::invalid_argument(
            "BlockPartition: blocks must be non-empty, sorted and contiguous "
            "from index 0");
      }
      expected = b.end;
    }
  }

  static BlockPartition uniform(std::size_t num_blocks,
                                std::size_t block_size) {
    std::vector<IndexRange> blocks;
    blocks.reserve(num_blocks);
    for (std::size_t k = 0; k < num_blocks; ++k) {
      blocks.push_back({k * block_size, (k + 1) * block_size});
    }
    return BlockPartition(std::move(blocks));
  }

  static BlockPartition single(std::size_t n) {
    if (n == 0) return BlockPartition();
    return BlockPartition({IndexRange{0, n}});
  }

  std::size_t num_blocks() const { return blocks_.size(); }
  const IndexRange& block(std::size_t k) const { return blocks_.at(k); }
  const std::vector<IndexRange>& blocks() const { return blocks_; }
  std::size_t total_size() const {
    return blocks_.empty() ? 0 : blocks_.back().end;
  }

  /// Block containing variable i.
  std::size_t block_of(std::size_t i) const {
    auto it = std::upper_bound(
        blocks_.begin(), blocks_.end(), i,
        [](std::size_t v, const IndexRange& r) { return v < r.end; });
    if (it == blocks_.end()) {
      throw std::out_of_range("BlockPartition: index outside partition");
    }
    return static_cast<std::size_t>(it - blocks_.begin());
  }

  friend bool operator==(const BlockPartition&,
                         const BlockPartition&) = default;

 private:
  std::vector<IndexRange> blocks_;
};

/// Binary decision vector.
class Assignment {
 public:
  Assignment() = default;

  explicit Assignment(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto b : bits_) {
      if (b > 1) throw std::invalid_argument("Assignment: bits must be 0 or 1");
    }
  }

  static Assignment zeros(std::size_t n) {
    return Assignment(std::vector<std::uint8_t>(n, 0));
  }

  /// Bit i of the assignment is bit i of `value` (x_0 least significant).
  static Assignment from_integer(std::uint64_t value, std::size_t n) {
    std::vector<std::uint8_t> bits(n);
    for (std::size_t i = 0; i < n; ++i) bits[i] = (value >> i) & 1U;
    return Assignment(std::move(bits));
  }

  std::size_t size() const { return bits_.size(); }
  std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
  std::span<const std::uint8_t> bits() const { return bits_; }

  void set(std::size_t i, bool v) { bits_.at(i) = v ? 1 : 0; }
  void flip(std::size_t i) { bits_.at(i) ^= 1U; }

  Assignment slice(const IndexRange& r) const {
    if (r.end > bits_.size()) {
      throw std::out_of_range("Assignment::slice: range outside assignment");
    }
    return Assignment(std::vector<std::uint8_t>(bits_.begin() + r.begin,
                                                bits_.begin() + r.end));
  }

  Eigen::VectorXd as_vector() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(bits_.size()));
    for (std::size_t i = 0; i < bits_.size(); ++i) v[Eigen::Index(i)] = bits_[i];
    return v;
  }

  std::string to_string() const {
    std::string s;
    s.reserve(bits_.size());
    for (auto b : bits_) s.push_back(b ? '1' : '0');
    return s;
  }

  static Assignment parse(const std::string& s) {
    std::vector<std::uint8_t> bits;
    bits.reserve(s.size());
    for (char c : s) {
      if (c != '0' && c != '1') {
        throw std::invalid_argument("Assignment::parse: expected '0'/'1'");
      }
      bits.push_back(c == '1' ? 1 : 0);
    }
    return Assignment(std::move(bits));
  }

  friend bool operator==(const Assignment&, const Assignment&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

/// f(x) = x^T Q x + offset with symmetric Q.
class Qubo {
 public:
  Qubo() = default;

  /// Requires an exactly symmetric, finite matrix.
  explicit Qubo(Eigen::MatrixXd coeffs, double offset = 0.0,
                std::optional<BlockPartition> partition = std::nullopt)
      : coeffs_(std::move(coeffs)),
        offset_(offset),
        partition_(std::move(partition)) {
    if (coeffs_.rows() != coeffs_.cols()) {
      throw std::invalid_argument("Qubo: coefficient matrix must be square");
    }
    if (!std::isfinite(offset_) || !coeffs_.allFinite()) {
      throw std::invalid_argument("Qubo: non-finite coefficient");
    }
    for (Eigen::Index i = 0; i < coeffs_.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < coeffs_.cols(); ++j) {
        if (coeffs_(i, j) != coeffs_(j, i)) {
          throw std::invalid_argument(
              "Qubo: coefficient matrix must be symmetric (use "
              "Qubo::symmetrized for triangular input)");
        }
      }
    }
    if (partition_ && partition_->total_size() != n()) {
      throw std::invalid_argument(
          "Qubo: partition does not cover the variable set");
    }
  }

  /// Builds from an arbitrary square matrix via (M + M^T) / 2. Energies are
  /// unchanged; an upper-triangular matrix U becomes (U + U^T) / 2.
  static Qubo symmetrized(const Eigen::MatrixXd& m, double offset = 0.0,
                          std::optional<BlockPartition> partition = std::nullopt) {
    if (m.rows() != m.cols()) {
      throw std::invalid_argument("Qubo: coefficient matrix must be square");
    }
    Eigen::MatrixXd s = 0.5 * (m + m.transpose());
    return Qubo(std::move(s), offset, std::move(partition));
  }

  std::size_t n() const { return static_cast<std::size_t>(coeffs_.rows()); }
  const Eigen::MatrixXd& coeffs() const { return coeffs_; }
  double offset() const { return offset_; }
  const std::optional<BlockPartition>& partition() const { return partition_; }

  const BlockPartition& require_partition() const {
    if (!partition_) throw std::invalid_argument("Qubo: partition required");
    return *partition_;
  }

  Qubo with_partition(BlockPartition p) const {
    return Qubo(coeffs_, offset_, std::move(p));
  }
  Qubo without_offset() const { return Qubo(coeffs_, 0.0, partition_); }

 private:
  Eigen::MatrixXd coeffs_;
  double offset_ = 0.0;
  std::optional<BlockPartition> partition_;
};

class IsingModel {
 public:
  IsingModel() = default;

  IsingModel(Eigen::VectorXd linear, Eigen::MatrixXd quadratic,
             double offset = 0.0)
      : linear_(std::move(linear)),
        quadratic_(std::move(quadratic)),
        offset_(offset) {
    const auto n = linear_.size();
    if (quadratic_.rows() != n || quadratic_.cols() != n) {
      throw std::invalid_argument("IsingModel: dimension mismatch");
    }
    if (!linear_.allFinite() || !quadratic_.allFinite() ||
        !std::isfinite(offset_)) {
      throw std::invalid_argument("IsingModel: non-finite coefficient");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (quadratic_(i, i) != 0.0) {
        throw std::invalid_argument("IsingModel: coupling diagonal must be 0");
      }
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (quadratic_(i, j) != quadratic_(j, i)) {
          throw std::invalid_argument("IsingModel: couplings must be symmetric");
        }
      }
    }
  }

  std::size_t n() const { return static_cast<std::size_t>(linear_.size()); }
  const Eigen::VectorXd& linear() const { return linear_; }
  const Eigen::MatrixXd& quadratic() const { return quadratic_; }
  double offset() const { return offset_; }

  IsingModel without_offset() const {
    return IsingModel(linear_, quadratic_, 0.0);
  }
  bool is_zero() const {
    return linear_.isZero(0.0) && quadratic_.isZero(0.0);
  }

 private:
  Eigen::VectorXd linear_;
  Eigen::MatrixXd quadratic_;
  double offset_ = 0.0;
};

using Spins = std::vector<std::int8_t>;

inline Spins to_spins(const Assignment& x) {
  Spins z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i] ? -1 : 1;
  return z;
}

inline Assignment from_spins(std::span<const std::int8_t> z) {
  std::vector<std::uint8_t> bits(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i] != 1 && z[i] != -1) {
      throw std::invalid_argument("from_spins: entries must be +1 or -1");
    }
    bits[i] = z[i] == -1 ? 1 : 0;
  }
  return Assignment(std::move(bits));
}

inline double qubo_energy(const Qubo& q, const Assignment& x) {
  if (x.size() != q.n()) {
    throw std::invalid_argument("qubo_energy: assignment length " +
                                std::to_string(x.size()) + " != " +
                                std::to_string(q.n()));
  }
  const auto& Q = q.coeffs();
  std::vector<Eigen::Index> on;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i]) on.push_back(static_cast<Eigen::Index>(i));
  }
  double e = 0.0;
  for (auto i : on) {
    double row = 0.0;
    for (auto j : on) row += Q(i, j);
    e += row;
  }
  return e + q.offset();
}

/// x^T M x for a dense square matrix (no offset, no symmetry check).
inline double quadratic_form(const Eigen::MatrixXd& m, const Assignment& x) {
  if (x.size() != static_cast<std::size_t>(m.rows())) {
    throw std::invalid_argument("quadratic_form: dimension mismatch");
  }
  double e = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (!x[std::size_t(i)]) continue;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (x[std::size_t(j)]) e += m(i, j);
    }
  }
  return e;
}

/// Substitutes x = (1 - z) / 2. Energies agree on every assignment.
inline IsingModel qubo_to_ising(const Qubo& q) {
  const auto& Q = q.coeffs();
  const Eigen::Index n = Q.rows();
  Eigen::VectorXd h(n);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  double offset = q.offset();
  for (Eigen::Index i = 0; i < n; ++i) {
    // Q_ii x_i = Q_ii / 2 - (Q_ii / 2) z_i
    double hi = -0.5 * Q(i, i);
    offset += 0.5 * Q(i, i);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      // 2 Q_ij x_i x_j = (Q_ij / 2)(1 - z_i - z_j + z_i z_j)
      hi -= 0.5 * Q(i, j);
      if (j > i) {
        J(i, j) = 0.5 * Q(i, j);
        J(j, i) = J(i, j);
        offset += 0.5 * Q(i, j);
      }
    }
    h[i] = hi;
  }
  return IsingModel(std::move(h), std::move(J), offset);
}

/// Inverse substitution z = 1 - 2x.
inline Qubo ising_to_qubo(const IsingModel& m,
                          std::optional<BlockPartition> partition = std::nullopt) {
  const auto& h = m.linear();
  const auto& J = m.quadratic();
  const Eigen::Index n = h.size();
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
  double offset = m.offset();
  for (Eigen::Index i = 0; i < n; ++i) {
    // h_i z_i = h_i - 2 h_i x_i
    offset += h[i];
    Q(i, i) += -2.0 * h[i];
    for (Eigen::Index j = i + 1; j < n; ++j) {
      // J z_i z_j = J (1 - 2x_i - 2x_j + 4 x_i x_j)
      const double c = J(i, j);
      if (c == 0.0) continue;
      offset += c;
      Q(i, i) += -2.0 * c;
      Q(j, j) += -2.0 * c;
      Q(i, j) += 2.0 * c;
      Q(j, i) += 2.0 * c;
    }
  }
  return Qubo(std::move(Q), offset, std::move(partition));
}

inline double ising_energy(const IsingModel& m, std::span<const std::int8_t> z) {
  if (z.size() != m.n()) {
    throw std::invalid_argument("ising_energy: spin vector length mismatch");
  }
  for (auto s : z) {
    if (s != 1 && s != -1) {
      throw std::invalid_argument("ising_energy: spins must be +1 or -1");
    }
  }
  const auto& h = m.linear();
  const auto& J = m.quadratic();
  double e = m.offset();
  const auto n = static_cast<Eigen::Index>(z.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    e += h[i] * z[std::size_t(i)];
    for (Eigen::Index j = i + 1; j < n; ++j) {
      e += J(i, j) * z[std::size_t(i)] * z[std::size_t(j)];
    }
  }
  return e;
}

struct TridiagonalViolation {
  std::size_t block_p = 0;  // p < q
  std::size_t block_q = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  double value = 0.0;
};

struct TridiagonalCheck {
  bool ok = true;
  std::vector<TridiagonalViolation> violations;
};

/// Scans the upper triangle for nonzeros in block pairs with |p - q| > 1.
inline TridiagonalCheck verify_block_tridiagonal(const Qubo& q) {
  const auto& part = q.require_partition();
  const auto& Q = q.coeffs();
  TridiagonalCheck out;
  for (std::size_t p = 0; p < part.num_blocks(); ++p) {
    for (std::size_t r = p + 2; r < part.num_blocks(); ++r) {
      const auto& bp = part.block(p);
      const auto& br = part.block(r);
      for (std::size_t i = bp.begin; i < bp.end; ++i) {
        for (std::size_t j = br.begin; j < br.end; ++j) {
          const double v = Q(Eigen::Index(i), Eigen::Index(j));
          if (v != 0.0) out.violations.push_back({p, r, i, j, v});
        }
      }
    }
  }
  out.ok = out.violations.empty();
  return out;
}

struct ScaleSeparation {
  double max_intra = 0.0;
  double max_inter = 0.0;
  double ratio = 0.0;  // max_inter / max_intra; 0 without inter-block terms
};

inline ScaleSeparation scale_separation_report(const Qubo& q) {
  const auto& part = q.require_partition();
  const auto& Q = q.coeffs();
  ScaleSeparation s;
  std::vector<std::size_t> owner(q.n());
  for (std::size_t k = 0; k < part.num_blocks(); ++k) {
    for (std::size_t i = part.block(k).begin; i < part.block(k).end; ++i) {
      owner[i] = k;
    }
  }
  for (std::size_t i = 0; i < q.n(); ++i) {
    for (std::size_t j = i; j < q.n(); ++j) {
      const double a = std::abs(Q(Eigen::Index(i), Eigen::Index(j)));
      if (owner[i] == owner[j]) {
        s.max_intra = std::max(s.max_intra, a);
      } else {
        s.max_inter = std::max(s.max_inter, a);
      }
    }
  }
  if (s.max_inter > 0.0) {
    s.ratio = s.max_intra > 0.0 ? s.max_inter / s.max_intra
                                : std::numeric_limits<double>::infinity();
  }
  return s;
}

}  // namespace dpo
