#pragma once

// Dynamic portfolio objective O = F - R - C - B and its QUBO encoding.
//
// Weights are integers omega_{t,a} = sum_r 2^r x_{t,a,r}. Binary variables are
// flattened as (t * N_a + a) * N_r + r, so each rebalancing time occupies one
// contiguous block of N_a * N_r variables. The encoded QUBO minimizes -O.

#include "dpo/market_data.hpp"
#include "dpo/qubo.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace dpo {

struct CovarianceRisk {};
struct SemicovarianceRisk {
  double benchmark = 0.0;
};
struct ShrinkageRisk {
  /// Forces the shrinkage intensity instead of estimating it.
  std::optional<double> intensity_override;
};
using RiskModelChoice =
    std::variant<CovarianceRisk, SemicovarianceRisk, ShrinkageRisk>;

inline std::string risk_model_name(const RiskModelChoice& r) {
  switch (r.index()) {
    case 0: return "covariance";
    case 1: return "semicovariance";
    default: return "shrinkage";
  }
}

struct ShrinkageDiagnostics {
  double delta = 0.0;
  double alpha_hat = 0.0;  // ||S - F||_F^2
  double beta_hat = 0.0;   // min(alpha_hat, sampling-noise estimate)
};

struct RiskMatrix {
  Eigen::MatrixXd sigma;
  std::optional<ShrinkageDiagnostics> shrinkage;
};

namespace detail {

inline void check_interval(const ReturnPanel& panel, std::size_t t,
                           const char* who) {
  panel.validate();
  if (panel.dt < 2) {
    throw std::invalid_argument(std::string(who) +
                                ": dt must be >= 2 (divides by dt - 1)");
  }
  if (t >= panel.n_t()) {
    throw std::out_of_range(std::string(who) + ": interval out of range");
  }
}

// (1 / (dt - 1)) * sum_s d_s d_s^T over the rows of `dev`, symmetric by
// construction.
inline Eigen::MatrixXd scaled_gram(const Eigen::MatrixXd& dev, double denom) {
  const auto na = dev.cols();
  Eigen::MatrixXd g(na, na);
  for (Eigen::Index a = 0; a < na; ++a) {
    for (Eigen::Index b = a; b < na; ++b) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < dev.rows(); ++k) s += dev(k, a) * dev(k, b);
      g(a, b) = s / denom;
      g(b, a) = g(a, b);
    }
  }
  return g;
}

inline Eigen::MatrixXd interval_daily(const ReturnPanel& panel, std::size_t t) {
  const auto r = panel.interval_days(t);
  return panel.daily_returns.middleRows(Eigen::Index(r.begin),
                                        Eigen::Index(r.size()));
}

}  // namespace detail

inline RiskMatrix covariance_risk(const ReturnPanel& panel, std::size_t t) {
  detail::check_interval(panel, t, "covariance_risk");
  Eigen::MatrixXd daily = detail::interval_daily(panel, t);
  const Eigen::RowVectorXd mean = daily.colwise().mean();
  daily.rowwise() -= mean;
  return {detail::scaled_gram(daily, double(panel.dt) - 1.0), std::nullopt};
}

inline RiskMatrix semicovariance_risk(const ReturnPanel& panel, std::size_t t,
                                      double benchmark = 0.0) {
  detail::check_interval(panel, t, "semicovariance_risk");
  if (!std::isfinite(benchmark)) {
    throw std::invalid_argument("semicovariance_risk: benchmark not finite");
  }
  Eigen::MatrixXd clipped =
      (detail::interval_daily(panel, t).array() - benchmark).min(0.0).matrix();
  return {detail::scaled_gram(clipped, double(panel.dt) - 1.0), std::nullopt};
}

/// Linear shrinkage toward F = (tr(S) / N_a) I with intensity
/// delta = clip(beta_hat / alpha_hat, 0, 1), where
///   alpha_hat = ||S - F||_F^2,
///   beta_hat  = min(alpha_hat, (1 / dt^2) sum_s ||y_s y_s^T - S||_F^2)
/// and y_s are the centered daily returns. delta = 0 when alpha_hat = 0.
inline RiskMatrix shrinkage_risk(const ReturnPanel& panel, std::size_t t,
                                 std::optional<double> intensity_override =
                                     std::nullopt) {
  detail::check_interval(panel, t, "shrinkage_risk");
  if (intensity_override &&
      !(*intensity_override >= 0.0 && *intensity_override <= 1.0)) {
    throw std::invalid_argument("shrinkage_risk: override must lie in [0, 1]");
  }
  Eigen::MatrixXd daily = detail::interval_daily(panel, t);
  const Eigen::RowVectorXd mean = daily.colwise().mean();
  daily.rowwise() -= mean;
  const Eigen::MatrixXd S = detail::scaled_gram(daily, double(panel.dt) - 1.0);
  const auto na = S.rows();

  ShrinkageDiagnostics diag;
  if (na == 0) return {S, diag};
  const double mu = S.trace() / double(na);
  Eigen::MatrixXd F = mu * Eigen::MatrixXd::Identity(na, na);
  diag.alpha_hat = (S - F).squaredNorm();
  double noise = 0.0;
  for (Eigen::Index s = 0; s < daily.rows(); ++s) {
    const Eigen::VectorXd y = daily.row(s).transpose();
    noise += (y * y.transpose() - S).squaredNorm();
  }
  noise /= double(panel.dt) * double(panel.dt);
  diag.beta_hat = std::min(diag.alpha_hat, noise);
  if (intensity_override) {
    diag.delta = *intensity_override;
  } else if (diag.alpha_hat <= 1e-24 * S.squaredNorm()) {
    diag.delta = 0.0;
  } else {
    diag.delta = std::clamp(diag.beta_hat / diag.alpha_hat, 0.0, 1.0);
  }
  Eigen::MatrixXd out = (1.0 - diag.delta) * S;
  out.diagonal().array() += diag.delta * mu;
  return {out, diag};
}

struct DpoConfig {
  std::size_t n_t = 2;
  std::size_t n_a = 6;
  std::size_t n_r = 4;
  std::int64_t budget = 15;
  double nu = 0.01;
  double lambda = 1.0;
  /// Budget penalty; defaults to 2 * max_{t,a} |mu_{t,a}| of the panel.
  std::optional<double> rho;
  double gamma = 1.0;
  std::size_t dt = 24;
  RiskModelChoice risk = CovarianceRisk{};

  std::int64_t max_weight() const {
    return (std::int64_t{1} << n_r) - 1;
  }
  std::size_t num_variables() const { return n_t * n_a * n_r; }
  std::size_t block_size() const { return n_a * n_r; }

  void validate() const {
    if (n_t < 1 || n_a < 1 || n_r < 1) {
      throw std::invalid_argument("DpoConfig: n_t, n_a, n_r must be >= 1");
    }
    if (n_r > 30) throw std::invalid_argument("DpoConfig: n_r must be <= 30");
    if (budget < 0) throw std::invalid_argument("DpoConfig: budget must be >= 0");
    if (budget > std::int64_t(n_a) * max_weight()) {
      throw std::invalid_argument(
          "DpoConfig: budget exceeds n_a * (2^n_r - 1), not representable");
    }
    auto nonneg = [](double v, const char* name) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument(std::string("DpoConfig: ") + name +
                                    " must be finite and >= 0");
      }
    };
    nonneg(nu, "nu");
    nonneg(lambda, "lambda");
    nonneg(gamma, "gamma");
    if (rho) nonneg(*rho, "rho");
    if (dt < 1) throw std::invalid_argument("DpoConfig: dt must be >= 1");
    if (const auto* s = std::get_if<SemicovarianceRisk>(&risk);
        s && !std::isfinite(s->benchmark)) {
      throw std::invalid_argument("DpoConfig: benchmark must be finite");
    }
  }

  double resolved_rho(const ReturnPanel& panel) const {
    if (rho) return *rho;
    if (panel.interval_returns.size() == 0) return 0.0;
    return 2.0 * panel.interval_returns.cwiseAbs().maxCoeff();
  }
};

inline RiskMatrix risk_matrix(const ReturnPanel& panel, std::size_t t,
                              const RiskModelChoice& choice) {
  return std::visit(
      [&](const auto& r) -> RiskMatrix {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, CovarianceRisk>) {
          return covariance_risk(panel, t);
        } else if constexpr (std::is_same_v<T, SemicovarianceRisk>) {
          return semicovariance_risk(panel, t, r.benchmark);
        } else {
          return shrinkage_risk(panel, t, r.intensity_override);
        }
      },
      choice);
}

inline std::vector<RiskMatrix> compute_risks(const ReturnPanel& panel,
                                             const RiskModelChoice& choice) {
  std::vector<RiskMatrix> out;
  out.reserve(panel.n_t());
  for (std::size_t t = 0; t < panel.n_t(); ++t) {
    out.push_back(risk_matrix(panel, t, choice));
  }
  return out;
}

using WeightMatrix =
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Integer capital units omega_{t,a} (rows = time, columns = assets).
struct PortfolioAllocation {
  WeightMatrix weights;

  std::size_t n_t() const { return std::size_t(weights.rows()); }
  std::size_t n_a() const { return std::size_t(weights.cols()); }
  std::int64_t operator()(std::size_t t, std::size_t a) const {
    return weights(Eigen::Index(t), Eigen::Index(a));
  }
  /// omega_{t,a}, with omega_{-1,a} = 0.
  std::int64_t previous(std::size_t t, std::size_t a) const {
    return t == 0 ? 0 : (*this)(t - 1, a);
  }
  Eigen::VectorXd row(std::size_t t) const {
    return weights.row(Eigen::Index(t)).cast<double>().transpose();
  }
};

inline PortfolioAllocation decode(const Assignment& x, const DpoConfig& config) {
  if (x.size() != config.num_variables()) {
    throw std::invalid_argument("decode: assignment length " +
                                std::to_string(x.size()) + " != N_t*N_a*N_r = " +
                                std::to_string(config.num_variables()));
  }
  PortfolioAllocation out;
  out.weights = WeightMatrix::Zero(Eigen::Index(config.n_t),
                                   Eigen::Index(config.n_a));
  std::size_t k = 0;
  for (std::size_t t = 0; t < config.n_t; ++t) {
    for (std::size_t a = 0; a < config.n_a; ++a) {
      std::int64_t w = 0;
      for (std::size_t r = 0; r < config.n_r; ++r, ++k) {
        if (x[k]) w += std::int64_t{1} << r;
      }
      out.weights(Eigen::Index(t), Eigen::Index(a)) = w;
    }
  }
  return out;
}

/// Inverse of decode for weights within [0, 2^n_r - 1].
inline Assignment encode_allocation(const PortfolioAllocation& alloc,
                                    const DpoConfig& config) {
  if (alloc.n_t() != config.n_t || alloc.n_a() != config.n_a) {
    throw std::invalid_argument("encode_allocation: dimension mismatch");
  }
  std::vector<std::uint8_t> bits;
  bits.reserve(config.num_variables());
  for (std::size_t t = 0; t < config.n_t; ++t) {
    for (std::size_t a = 0; a < config.n_a; ++a) {
      const auto w = alloc(t, a);
      if (w < 0 || w > config.max_weight()) {
        throw std::invalid_argument("encode_allocation: weight out of range");
      }
      for (std::size_t r = 0; r < config.n_r; ++r) bits.push_back((w >> r) & 1);
    }
  }
  return Assignment(std::move(bits));
}

struct ObjectiveTerms {
  double expected_return = 0.0;    // F
  double risk = 0.0;               // R
  double transaction_cost = 0.0;   // C
  double budget_penalty = 0.0;     // B
  double objective = 0.0;          // O = F - R - C - B
};

namespace detail {

inline void check_model_inputs(const DpoConfig& config,
                               const ReturnPanel& panel,
                               const std::vector<RiskMatrix>& risks,
                               const char* who) {
  config.validate();
  panel.validate();
  if (panel.n_t() != config.n_t || panel.n_a() != config.n_a) {
    throw std::invalid_argument(std::string(who) +
                                ": panel is " + std::to_string(panel.n_t()) +
                                "x" + std::to_string(panel.n_a()) +
                                ", config expects " +
                                std::to_string(config.n_t) + "x" +
                                std::to_string(config.n_a));
  }
  if (risks.size() != config.n_t) {
    throw std::invalid_argument(std::string(who) +
                                ": need one risk matrix per time step");
  }
  for (const auto& r : risks) {
    if (r.sigma.rows() != Eigen::Index(config.n_a) ||
        r.sigma.cols() != Eigen::Index(config.n_a)) {
      throw std::invalid_argument(std::string(who) +
                                  ": risk matrix dimension mismatch");
    }
  }
}

}  // namespace detail

/// F_t = sum_a omega_{t,a} mu_{t,a}.
inline double step_return(const PortfolioAllocation& w, const ReturnPanel& panel,
                          std::size_t t) {
  double f = 0.0;
  for (std::size_t a = 0; a < w.n_a(); ++a) {
    f += double(w(t, a)) * panel.interval_returns(Eigen::Index(t), Eigen::Index(a));
  }
  return f;
}

/// C_t = nu * lambda * sum_a (omega_{t,a} - omega_{t-1,a})^2.
inline double step_transaction_cost(const PortfolioAllocation& w,
                                    const DpoConfig& config, std::size_t t) {
  double c = 0.0;
  for (std::size_t a = 0; a < w.n_a(); ++a) {
    const double d = double(w(t, a) - w.previous(t, a));
    c += d * d;
  }
  return config.nu * config.lambda * c;
}

inline ObjectiveTerms objective_terms(const DpoConfig& config,
                                      const ReturnPanel& panel,
                                      const std::vector<RiskMatrix>& risks,
                                      const PortfolioAllocation& w) {
  detail::check_model_inputs(config, panel, risks, "objective_terms");
  if (w.n_t() != config.n_t || w.n_a() != config.n_a) {
    throw std::invalid_argument("objective_terms: allocation dimension mismatch");
  }
  const double rho = config.resolved_rho(panel);
  ObjectiveTerms o;
  for (std::size_t t = 0; t < config.n_t; ++t) {
    o.expected_return += step_return(w, panel, t);
    const Eigen::VectorXd wt = w.row(t);
    o.risk += wt.dot(risks[t].sigma * wt);
    o.transaction_cost += step_transaction_cost(w, config, t);
    double total = 0.0;
    for (std::size_t a = 0; a < config.n_a; ++a) total += double(w(t, a));
    const double gap = total - double(config.budget);
    o.budget_penalty += rho * gap * gap;
  }
  o.risk *= 0.5 * config.gamma;
  o.objective =
      o.expected_return - o.risk - o.transaction_cost - o.budget_penalty;
  return o;
}

/// g(omega) = omega^T A omega + b^T omega + c over the flattened weight vector
/// (index t * N_a + a). A must be exactly symmetric.
struct WeightQuadratic {
  Eigen::MatrixXd quadratic;
  Eigen::VectorXd linear;
  double constant = 0.0;
};

/// -O(omega) as a quadratic in the weights.
inline WeightQuadratic negated_objective(const DpoConfig& config,
                                         const ReturnPanel& panel,
                                         const std::vector<RiskMatrix>& risks) {
  detail::check_model_inputs(config, panel, risks, "encode_qubo");
  const auto nt = config.n_t;
  const auto na = config.n_a;
  const auto m = Eigen::Index(nt * na);
  const double rho = config.resolved_rho(panel);
  const double tc = config.nu * config.lambda;
  const double K = double(config.budget);
  WeightQuadratic g{Eigen::MatrixXd::Zero(m, m), Eigen::VectorXd::Zero(m), 0.0};
  auto idx = [na](std::size_t t, std::size_t a) {
    return Eigen::Index(t * na + a);
  };
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& sigma = risks[t].sigma;
    for (std::size_t a = 0; a < na; ++a) {
      const auto i = idx(t, a);
      g.linear[i] -= panel.interval_returns(Eigen::Index(t), Eigen::Index(a));
      g.linear[i] -= 2.0 * rho * K;
      for (std::size_t b = 0; b < na; ++b) {
        // Average the two triangle entries so A stays exactly symmetric.
        const double s = 0.5 * (sigma(Eigen::Index(a), Eigen::Index(b)) +
                                sigma(Eigen::Index(b), Eigen::Index(a)));
        g.quadratic(i, idx(t, b)) += 0.5 * config.gamma * s + rho;
      }
      g.quadratic(i, i) += tc;
      if (t >= 1) {
        const auto j = idx(t - 1, a);
        g.quadratic(j, j) += tc;
        g.quadratic(i, j) -= tc;
        g.quadratic(j, i) -= tc;
      }
    }
    g.constant += rho * K * K;
  }
  return g;
}

/// Substitutes omega_{t,a} = sum_r 2^r x_{t,a,r} and folds the linear part into
/// the diagonal (x^2 = x). Blocks are the rebalancing times.
inline Qubo binary_expand(const WeightQuadratic& g, std::size_t n_t,
                          std::size_t n_a, std::size_t n_r) {
  const auto m = n_t * n_a;
  if (std::size_t(g.quadratic.rows()) != m ||
      std::size_t(g.quadratic.cols()) != m ||
      std::size_t(g.linear.size()) != m) {
    throw std::invalid_argument("binary_expand: dimension mismatch");
  }
  const auto n = Eigen::Index(m * n_r);
  Eigen::MatrixXd Q(n, n);
  for (std::size_t u = 0; u < m; ++u) {
    for (std::size_t v = 0; v < m; ++v) {
      const double a = g.quadratic(Eigen::Index(u), Eigen::Index(v));
      for (std::size_t r = 0; r < n_r; ++r) {
        for (std::size_t s = 0; s < n_r; ++s) {
          Q(Eigen::Index(u * n_r + r), Eigen::Index(v * n_r + s)) =
              std::ldexp(a, int(r + s));
        }
      }
    }
  }
  for (std::size_t u = 0; u < m; ++u) {
    for (std::size_t r = 0; r < n_r; ++r) {
      const auto i = Eigen::Index(u * n_r + r);
      Q(i, i) += std::ldexp(g.linear[Eigen::Index(u)], int(r));
    }
  }
  return Qubo(std::move(Q), g.constant,
              BlockPartition::uniform(n_t, n_a * n_r));
}

/// QUBO whose energy equals -O(decode(x)) for every assignment x.
inline Qubo encode_qubo(const DpoConfig& config, const ReturnPanel& panel,
                        const std::vector<RiskMatrix>& risks) {
  return binary_expand(negated_objective(config, panel, risks), config.n_t,
                       config.n_a, config.n_r);
}

}  // namespace dpo
