#pragma once

// JSON run configuration. Every section and key is optional; missing keys
// keep the library defaults and unknown keys are rejected.
//
// {
//   "model":    {"n_t": 2, "n_a": 6, "n_r": 4, "budget": 15, "nu": 0.01,
//                "lambda": 1.0, "rho": null, "gamma": 1.0, "dt": 24,
//                "risk": {"kind": "covariance"}},
//   "data":     {"prices": "data/synthetic_6x529.csv", "trim": "leading",
//                "add_cash": false},
//   "bcd":      {"global_iters": 3, "repeats": 3, "init": "zeros",
//                "early_stop": false, "effort": null},
//   "backends": {"exhaustive_cap": 24,
//                "sa": {"initial_temperature": null, "cooling": 0.97, "sweeps": 200},
//                "tabu": {"tenure": null, "iterations": null},
//                "tuning": {"budget": 100, "exact_limit": 12, "sample_restarts": 48,
//                           "seed": 24301, "refinements": 6}},
//   "matrix":   {"backends": ["sa", "tabu"], "variants": ["Global-FP", ...],
//                "runs": 3, "seed": 1, "global_effort": null}
// }
//
// Risk kinds: "covariance", "semicovariance" (optional "benchmark"),
// "shrinkage" (optional "intensity").

#include "dpo/backends.hpp"
#include "dpo/bcd.hpp"
#include "dpo/dpo_model.hpp"
#include "dpo/harness.hpp"
#include "dpo/market_data.hpp"

#include <json.hpp>

#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpo {

struct DataSource {
  std::optional<std::string> prices;
  TrimRule trim = TrimRule::KeepLeading;
  bool add_cash = false;
};

struct RunConfig {
  DpoConfig model;
  DataSource data;
  MatrixOptions matrix;
};

namespace detail {

using json = nlohmann::json;

inline void check_keys(const json& j, const char* section,
                       std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    throw std::invalid_argument(std::string("config: '") + section + "' must be an object");
  }
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) {
      throw std::invalid_argument(std::string("config: unknown key '") + k + "' in '" +
                                  section + "'");
    }
  }
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

template <typename T>
void get_optional(const json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
  } else {
    out = j.at(key).get<T>();
  }
}

inline RiskModelChoice parse_risk(const json& j) {
  check_keys(j, "risk", {"kind", "benchmark", "intensity"});
  const auto kind = j.value("kind", std::string("covariance"));
  if (kind == "covariance") return CovarianceRisk{};
  if (kind == "semicovariance") return SemicovarianceRisk{j.value("benchmark", 0.0)};
  if (kind == "shrinkage") {
    ShrinkageRisk r;
    get_optional(j, "intensity", r.intensity_override);
    return r;
  }
  throw std::invalid_argument("config: unknown risk kind '" + kind + "'");
}

inline json risk_json(const RiskModelChoice& r) {
  json j{{"kind", risk_model_name(r)}};
  if (const auto* s = std::get_if<SemicovarianceRisk>(&r)) j["benchmark"] = s->benchmark;
  if (const auto* s = std::get_if<ShrinkageRisk>(&r)) {
    j["intensity"] = s->intensity_override ? json(*s->intensity_override) : json(nullptr);
  }
  return j;
}

inline TrimRule parse_trim(const std::string& s) {
  if (s == "leading") return TrimRule::KeepLeading;
  if (s == "trailing") return TrimRule::KeepTrailing;
  throw std::invalid_argument("config: trim must be 'leading' or 'trailing'");
}

}  // namespace detail

inline void apply_model_json(const nlohmann::json& j, DpoConfig& m) {
  detail::check_keys(j, "model",
                     {"n_t", "n_a", "n_r", "budget", "nu", "lambda", "rho", "gamma", "dt", "risk"});
  detail::get_to(j, "n_t", m.n_t);
  detail::get_to(j, "n_a", m.n_a);
  detail::get_to(j, "n_r", m.n_r);
  detail::get_to(j, "budget", m.budget);
  detail::get_to(j, "nu", m.nu);
  detail::get_to(j, "lambda", m.lambda);
  detail::get_optional(j, "rho", m.rho);
  detail::get_to(j, "gamma", m.gamma);
  detail::get_to(j, "dt", m.dt);
  if (j.contains("risk")) m.risk = detail::parse_risk(j.at("risk"));
}

inline RunConfig parse_run_config(const nlohmann::json& j) {
  using detail::get_optional;
  using detail::get_to;
  detail::check_keys(j, "top level", {"model", "data", "bcd", "backends", "matrix"});
  RunConfig c;
  try {
    if (j.contains("model")) apply_model_json(j.at("model"), c.model);
    if (j.contains("data")) {
      const auto& d = j.at("data");
      detail::check_keys(d, "data", {"prices", "trim", "add_cash"});
      get_optional(d, "prices", c.data.prices);
      if (d.contains("trim")) c.data.trim = detail::parse_trim(d.at("trim").get<std::string>());
      get_to(d, "add_cash", c.data.add_cash);
    }
    if (j.contains("bcd")) {
      const auto& b = j.at("bcd");
      detail::check_keys(b, "bcd", {"global_iters", "repeats", "init", "early_stop", "effort"});
      get_to(b, "global_iters", c.matrix.bcd.global_iters);
      get_to(b, "repeats", c.matrix.bcd.repeats);
      get_to(b, "early_stop", c.matrix.bcd.early_stop);
      get_optional(b, "effort", c.matrix.bcd.effort);
      if (b.contains("init")) {
        const auto init = b.at("init").get<std::string>();
        if (init == "zeros") {
          c.matrix.bcd.init = AllZerosInit{};
        } else if (init == "random") {
          c.matrix.bcd.init = RandomInit{};
        } else {
          throw std::invalid_argument("config: bcd.init must be 'zeros' or 'random'");
        }
      }
    }
    if (j.contains("backends")) {
      const auto& b = j.at("backends");
      auto& o = c.matrix.backend_options;
      detail::check_keys(b, "backends", {"exhaustive_cap", "sa", "tabu", "tuning"});
      get_to(b, "exhaustive_cap", o.exhaustive_cap);
      if (b.contains("sa")) {
        const auto& s = b.at("sa");
        detail::check_keys(s, "backends.sa", {"initial_temperature", "cooling", "sweeps"});
        get_optional(s, "initial_temperature", o.annealing.initial_temperature);
        get_to(s, "cooling", o.annealing.cooling);
        get_to(s, "sweeps", o.annealing.sweeps);
      }
      if (b.contains("tabu")) {
        const auto& t = b.at("tabu");
        detail::check_keys(t, "backends.tabu", {"tenure", "iterations"});
        get_optional(t, "tenure", o.tabu.tenure);
        get_optional(t, "iterations", o.tabu.iterations);
      }
      if (b.contains("tuning")) {
        const auto& t = b.at("tuning");
        detail::check_keys(t, "backends.tuning",
                           {"budget", "exact_limit", "sample_restarts", "seed", "refinements"});
        get_to(t, "budget", o.tuning.budget);
        get_to(t, "exact_limit", o.tuning.exact_limit);
        get_to(t, "sample_restarts", o.tuning.sample_restarts);
        get_to(t, "seed", o.tuning.seed);
        get_to(t, "refinements", o.tuning.refinements);
      }
    }
    if (j.contains("matrix")) {
      const auto& m = j.at("matrix");
      detail::check_keys(m, "matrix", {"backends", "variants", "runs", "seed", "global_effort"});
      get_to(m, "backends", c.matrix.backends);
      if (m.contains("variants")) {
        c.matrix.variants.clear();
        for (const auto& v : m.at("variants")) {
          c.matrix.variants.push_back(StrategyVariant::parse(v.get<std::string>()));
        }
      }
      get_to(m, "runs", c.matrix.runs);
      get_to(m, "seed", c.matrix.seed);
      get_optional(m, "global_effort", c.matrix.global_effort);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.model.validate();
  c.matrix.bcd.validate();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config '" + path + "': " + e.what());
  }
  return parse_run_config(j);
}

inline nlohmann::ordered_json model_json(const DpoConfig& m) {
  nlohmann::ordered_json j;
  j["n_t"] = m.n_t;
  j["n_a"] = m.n_a;
  j["n_r"] = m.n_r;
  j["budget"] = m.budget;
  j["nu"] = m.nu;
  j["lambda"] = m.lambda;
  j["rho"] = m.rho ? nlohmann::ordered_json(*m.rho) : nlohmann::ordered_json(nullptr);
  j["gamma"] = m.gamma;
  j["dt"] = m.dt;
  j["risk"] = detail::risk_json(m.risk);
  return j;
}

}  // namespace dpo
