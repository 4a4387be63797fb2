#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "warprnn/params.hpp"
#include "warprnn/rng.hpp"

namespace warprnn {

// Gate-bias initialization policy. `standard` sets the forget bias to a
// constant (default 1); `chrono` draws per-unit forgetting times uniformly up
// to t_max; `gate_range` places the gated RNN's gate values in
// [1/t_max, 1/t_min]; `heavy_tail` draws forgetting times from a slowly
// decaying integer distribution (for when the dependency range is unknown);
// `none` leaves gate biases as the weight init produced them (zero).
struct InitPolicy {
  enum class Kind { none, standard, chrono, gate_range, heavy_tail };
  Kind kind = Kind::none;
  double t_max = 500.0;
  double t_min = 2.0;
  double forget_bias = 1.0;
  std::int64_t t_cap = 1'000'000;
};

// Forget biases log(U([1, T_max-1])) per unit, input biases their exact
// negation, candidate/output biases zero; weights untouched.
inline void chrono_init(LstmParams& p, double t_max, Rng& rng) {
  check_config(t_max >= 2.0, "chrono_init: T_max must be >= 2");
  for (Index j = 0; j < p.n_h(); ++j) {
    const double u = rng.uniform(1.0, t_max - 1.0);
    p.b_f[j] = std::log(u);
    p.b_i[j] = -p.b_f[j];
  }
  p.b_c.setZero();
  p.b_o.setZero();
}

// Gate biases -log(U([T_min, T_max]) - 1), so with zero-centered
// pre-activations the gate value sigmoid(b_g) = 1/u lies in [1/T_max, 1/T_min].
inline void gate_range_init(GatedParams& p, double t_min, double t_max,
                            Rng& rng) {
  check_config(t_min >= 1.0 + 1e-6,
               "gate_range_init: T_min must exceed 1 (log of u-1)");
  check_config(t_max >= t_min, "gate_range_init: T_max must be >= T_min");
  for (Index j = 0; j < p.n_h(); ++j) {
    const double u = rng.uniform(t_min, t_max);
    p.b_g[j] = -std::log(u - 1.0);
  }
}

// Constant forget bias (1 by convention, 2 for the alternative prescription);
// all other biases zero.
inline void standard_init(LstmParams& p, double forget_bias) {
  check_config(std::isfinite(forget_bias),
               "standard_init: forget_bias must be finite");
  p.b_f.setConstant(forget_bias);
  p.b_i.setZero();
  p.b_c.setZero();
  p.b_o.setZero();
}

// ---- heavy-tailed forgetting-time prior ----------------------------------------

namespace detail {
// Normalized CDF table for P(k) proportional to 1/(k * log(k+1)^2) on
// {1..T_cap}; built once per cap and shared (inverse-CDF sampling).
struct HeavyTailTable {
  std::vector<double> cdf;
};

inline const HeavyTailTable& heavy_tail_table(std::int64_t t_cap) {
  static std::mutex mu;
  static std::map<std::int64_t, std::unique_ptr<HeavyTailTable>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(t_cap);
  if (it == cache.end()) {
    auto tab = std::make_unique<HeavyTailTable>();
    tab->cdf.resize(static_cast<std::size_t>(t_cap));
    double acc = 0.0;
    for (std::int64_t k = 1; k <= t_cap; ++k) {
      const double lg = std::log(static_cast<double>(k) + 1.0);
      acc += 1.0 / (static_cast<double>(k) * lg * lg);
      tab->cdf[static_cast<std::size_t>(k - 1)] = acc;
    }
    for (double& c : tab->cdf) c /= acc;
    it = cache.emplace(t_cap, std::move(tab)).first;
  }
  return *it->second;
}
}  // namespace detail

// Samples an integer forgetting time k in {1..T_cap} with probability
// proportional to 1/(k * log(k+1)^2).
inline std::int64_t heavy_tail_T(Rng& rng, std::int64_t t_cap) {
  check_config(t_cap >= 2, "heavy_tail_T: T_cap must be >= 2");
  const detail::HeavyTailTable& tab = detail::heavy_tail_table(t_cap);
  const double u = rng.uniform(0.0, 1.0);
  const auto it = std::upper_bound(tab.cdf.begin(), tab.cdf.end(), u);
  return 1 + static_cast<std::int64_t>(it - tab.cdf.begin());
}

// Per-unit k from the heavy-tail prior, applied as b_f = log k, b_i = -log k.
inline void heavy_tail_init(LstmParams& p, std::int64_t t_cap, Rng& rng) {
  for (Index j = 0; j < p.n_h(); ++j) {
    const double k = static_cast<double>(heavy_tail_T(rng, t_cap));
    p.b_f[j] = std::log(k);
    p.b_i[j] = -p.b_f[j];
  }
  p.b_c.setZero();
  p.b_o.setZero();
}

// ---- policy dispatch -------------------------------------------------------------

inline const char* init_name(InitPolicy::Kind k) {
  switch (k) {
    case InitPolicy::Kind::none: return "default";
    case InitPolicy::Kind::standard: return "standard";
    case InitPolicy::Kind::chrono: return "chrono";
    case InitPolicy::Kind::gate_range: return "gate-range";
    case InitPolicy::Kind::heavy_tail: return "heavy-tail";
  }
  return "?";
}

// Applies the gate-bias policy to a freshly weight-initialized network,
// validating the architecture/policy combination.
inline void apply_init(AnyNet& net, const InitPolicy& policy, Rng& rng) {
  using K = InitPolicy::Kind;
  if (policy.kind == K::none) return;
  const Arch arch = arch_of(net);
  auto bad = [&]() -> ConfigError {
    return ConfigError(std::string("init '") + init_name(policy.kind) +
                       "' is not defined for architecture '" +
                       arch_name(arch) + "'");
  };
  switch (policy.kind) {
    case K::standard:
      if (auto* n = std::get_if<LstmNet>(&net)) {
        standard_init(n->cell, policy.forget_bias);
        return;
      }
      throw bad();
    case K::chrono:
      if (auto* n = std::get_if<LstmNet>(&net)) {
        chrono_init(n->cell, policy.t_max, rng);
        return;
      }
      throw bad();
    case K::heavy_tail:
      if (auto* n = std::get_if<LstmNet>(&net)) {
        heavy_tail_init(n->cell, policy.t_cap, rng);
        return;
      }
      throw bad();
    case K::gate_range:
      if (auto* n = std::get_if<GatedNet>(&net)) {
        gate_range_init(n->cell, policy.t_min, policy.t_max, rng);
        return;
      }
      throw bad();
    case K::none: return;
  }
}

}  // namespace warprnn
