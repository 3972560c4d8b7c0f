#pragma once

// Reference computations for the tests. Everything here is written from the
// defining formulas with plain loops and deliberately shares no code paths
// with the library beyond its data types.

#include "dpo/dpo.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

inline std::vector<int> bits_of(std::uint64_t code, std::size_t n) {
  std::vector<int> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = int((code >> i) & 1U);
  return x;
}

/// sum_ij Q_ij x_i x_j + offset, computed entry by entry.
inline double qubo_value(const Eigen::MatrixXd& Q, double offset, const std::vector<int>& x) {
  double e = offset;
  for (Eigen::Index i = 0; i < Q.rows(); ++i) {
    for (Eigen::Index j = 0; j < Q.cols(); ++j) e += Q(i, j) * x[i] * x[j];
  }
  return e;
}

inline double qubo_value(const dpo::Qubo& q, const std::vector<int>& x) {
  return qubo_value(q.coeffs(), q.offset(), x);
}

inline std::vector<int> to_vec(const dpo::Assignment& a) {
  std::vector<int> x(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) x[i] = a[i];
  return x;
}

struct Enumeration {
  double min_energy = std::numeric_limits<double>::infinity();
  std::vector<std::uint64_t> argmins;  // all codes within tol of the minimum
  std::vector<double> energies;        // indexed by code
};

/// Energy of every assignment; argmins within `tol` of the minimum.
inline Enumeration enumerate(const Eigen::MatrixXd& Q, double offset, double tol) {
  const auto n = std::size_t(Q.rows());
  Enumeration out;
  out.energies.resize(std::size_t{1} << n);
  for (std::uint64_t c = 0; c < out.energies.size(); ++c) {
    out.energies[c] = qubo_value(Q, offset, bits_of(c, n));
    out.min_energy = std::min(out.min_energy, out.energies[c]);
  }
  for (std::uint64_t c = 0; c < out.energies.size(); ++c) {
    if (out.energies[c] <= out.min_energy + tol) out.argmins.push_back(c);
  }
  return out;
}

/// Ising energy with spin z_i = 1 - 2 x_i, each unordered pair once.
inline double ising_value(const dpo::IsingModel& m, const std::vector<int>& x) {
  double e = m.offset();
  const auto n = Eigen::Index(x.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double zi = 1.0 - 2.0 * x[i];
    e += m.linear()[i] * zi;
    for (Eigen::Index j = i + 1; j < n; ++j) e += m.quadratic()(i, j) * zi * (1.0 - 2.0 * x[j]);
  }
  return e;
}

inline Enumeration enumerate_ising(const dpo::IsingModel& m, double tol) {
  const auto n = m.n();
  Enumeration out;
  out.energies.resize(std::size_t{1} << n);
  for (std::uint64_t c = 0; c < out.energies.size(); ++c) {
    out.energies[c] = ising_value(m, bits_of(c, n));
    out.min_energy = std::min(out.min_energy, out.energies[c]);
  }
  for (std::uint64_t c = 0; c < out.energies.size(); ++c) {
    if (out.energies[c] <= out.min_energy + tol) out.argmins.push_back(c);
  }
  return out;
}

/// Integer weights omega_{t,a} = sum_r 2^r x_{(t*N_a + a)*N_r + r}.
inline std::vector<std::vector<long long>> weights_of(const std::vector<int>& x,
                                                      std::size_t nt, std::size_t na,
                                                      std::size_t nr) {
  std::vector<std::vector<long long>> w(nt, std::vector<long long>(na, 0));
  for (std::size_t t = 0; t < nt; ++t) {
    for (std::size_t a = 0; a < na; ++a) {
      for (std::size_t r = 0; r < nr; ++r) {
        w[t][a] += (long long)x[(t * na + a) * nr + r] << r;
      }
    }
  }
  return w;
}

/// O = F - R - C - B from the defining sums.
inline double objective(const std::vector<std::vector<long long>>& w,
                        const Eigen::MatrixXd& mu, const std::vector<Eigen::MatrixXd>& sigma,
                        double gamma, double nu, double lambda, double rho, double K) {
  const std::size_t nt = w.size();
  const std::size_t na = nt ? w[0].size() : 0;
  double F = 0, R = 0, C = 0, B = 0;
  for (std::size_t t = 0; t < nt; ++t) {
    double total = 0;
    for (std::size_t a = 0; a < na; ++a) {
      F += double(w[t][a]) * mu(t, a);
      const double prev = t == 0 ? 0.0 : double(w[t - 1][a]);
      C += (double(w[t][a]) - prev) * (double(w[t][a]) - prev);
      total += double(w[t][a]);
      for (std::size_t b = 0; b < na; ++b) {
        R += double(w[t][a]) * sigma[t](a, b) * double(w[t][b]);
      }
    }
    B += (total - K) * (total - K);
  }
  return F - 0.5 * gamma * R - nu * lambda * C - rho * B;
}

inline Eigen::MatrixXd random_symmetric(std::size_t n, std::mt19937_64& rng, double lo = -1.0,
                                        double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd Q(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < Q.rows(); ++i) {
    for (Eigen::Index j = i; j < Q.cols(); ++j) Q(i, j) = Q(j, i) = u(rng);
  }
  return Q;
}

/// Random QUBO with nonzeros only in diagonal and adjacent off-diagonal blocks.
inline dpo::Qubo random_block_tridiagonal(const std::vector<std::size_t>& sizes,
                                          std::mt19937_64& rng) {
  std::vector<dpo::IndexRange> ranges;
  std::size_t n = 0;
  for (auto s : sizes) {
    ranges.push_back({n, n + s});
    n += s;
  }
  dpo::BlockPartition part(ranges);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const auto bi = part.block_of(i);
      const auto bj = part.block_of(j);
      if (bj - bi <= 1) Q(Eigen::Index(i), Eigen::Index(j)) = Q(Eigen::Index(j), Eigen::Index(i)) = u(rng);
    }
  }
  return dpo::Qubo(Q, u(rng), part);
}

inline dpo::IsingModel random_ising(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::VectorXd h(static_cast<Eigen::Index>(n));
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    h[i] = u(rng);
    for (Eigen::Index j = i + 1; j < h.size(); ++j) J(i, j) = J(j, i) = u(rng);
  }
  return dpo::IsingModel(h, J, 0.0);
}

/// Panel with N_t intervals of dt daily returns drawn i.i.d. normal.
inline dpo::ReturnPanel random_panel(std::size_t nt, std::size_t na, std::size_t dt,
                                     std::mt19937_64& rng, double vol = 0.02) {
  std::normal_distribution<double> g(0.0005, vol);
  dpo::ReturnPanel p;
  p.dt = dt;
  p.daily_returns.resize(Eigen::Index(nt * dt), Eigen::Index(na));
  for (Eigen::Index d = 0; d < p.daily_returns.rows(); ++d) {
    for (Eigen::Index a = 0; a < p.daily_returns.cols(); ++a) p.daily_returns(d, a) = g(rng);
  }
  p.interval_returns.resize(Eigen::Index(nt), Eigen::Index(na));
  for (std::size_t t = 0; t < nt; ++t) {
    for (Eigen::Index a = 0; a < p.daily_returns.cols(); ++a) {
      double s = 0;
      for (std::size_t d = t * dt; d < (t + 1) * dt; ++d) s += p.daily_returns(Eigen::Index(d), a);
      p.interval_returns(Eigen::Index(t), a) = s;
    }
  }
  for (std::size_t a = 0; a < na; ++a) p.asset_ids.push_back("X" + std::to_string(a));
  return p;
}

/// Sample covariance of one interval with the 1/(dt - 1) normalization.
inline Eigen::MatrixXd sample_covariance(const dpo::ReturnPanel& p, std::size_t t) {
  const auto na = p.daily_returns.cols();
  const auto dt = p.dt;
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(na, na);
  std::vector<double> mean(std::size_t(na), 0.0);
  for (Eigen::Index a = 0; a < na; ++a) {
    for (std::size_t d = t * dt; d < (t + 1) * dt; ++d) mean[a] += p.daily_returns(Eigen::Index(d), a);
    mean[a] /= double(dt);
  }
  for (Eigen::Index a = 0; a < na; ++a) {
    for (Eigen::Index b = 0; b < na; ++b) {
      double s = 0;
      for (std::size_t d = t * dt; d < (t + 1) * dt; ++d) {
        s += (p.daily_returns(Eigen::Index(d), a) - mean[a]) *
             (p.daily_returns(Eigen::Index(d), b) - mean[b]);
      }
      S(a, b) = s / double(dt - 1);
    }
  }
  return S;
}

/// True when no replacement of a single block lowers the energy.
inline bool block_wise_optimal(const dpo::Qubo& q, const std::vector<int>& x, double tol) {
  const double e0 = qubo_value(q, x);
  for (const auto& r : q.require_partition().blocks()) {
    const std::size_t nb = r.size();
    for (std::uint64_t c = 0; c < (std::uint64_t{1} << nb); ++c) {
      auto y = x;
      for (std::size_t k = 0; k < nb; ++k) y[r.begin + k] = int((c >> k) & 1U);
      if (qubo_value(q, y) < e0 - tol) return false;
    }
  }
  return true;
}

inline double coeff_scale(const dpo::Qubo& q) {
  return 1.0 + q.coeffs().cwiseAbs().sum() + std::abs(q.offset());
}

}  // namespace oracle
