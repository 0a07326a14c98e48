#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "bpr/errors.hpp"
#include "bpr/interaction_log.hpp"
#include "bpr/model.hpp"
#include "bpr/rng.hpp"

namespace bpr {

struct Triple {
  std::uint32_t u = 0;
  std::uint32_t i = 0;
  std::uint32_t j = 0;
};

struct TripleBatch {
  std::vector<Triple> triples;
};

// (u, i) uniform over all events; users are hit proportionally to |I⁺(u)|.
inline std::pair<std::uint32_t, std::uint32_t> sample_positive(const UserHistoryIndex& history,
                                                               Rng& rng) {
  if (history.event_count == 0) throw DataError("cannot sample from an empty history");
  std::uniform_int_distribution<std::size_t> pick(0, history.event_count - 1);
  const std::size_t idx = pick(rng);
  const auto it = std::upper_bound(history.offsets.begin(), history.offsets.end(), idx);
  const std::uint32_t u = static_cast<std::uint32_t>((it - history.offsets.begin()) - 1);
  return {u, history.items[idx]};
}

// j uniform over I \ I⁺(u) by rejection.
inline std::uint32_t sample_negative_uniform(std::uint32_t u, const UserHistoryIndex& history,
                                             Rng& rng) {
  if (history.degree(u) >= history.item_count) {
    throw NoNegativeAvailableError("user " + std::to_string(u) +
                                   " has interacted with every item");
  }
  std::uniform_int_distribution<std::uint32_t> pick(0, history.item_count - 1);
  for (;;) {
    const std::uint32_t j = pick(rng);
    if (!history.contains(u, j)) return j;
  }
}

// Per-factor item orderings by q_{·,f} descending plus factor standard
// deviations, refreshed against the current Q between epochs.
template <typename Real>
struct AdaptiveSamplerState {
  std::uint32_t item_count = 0;
  std::uint32_t f = 0;
  std::vector<std::uint32_t> order;  // f rows of item_count indices
  std::vector<Real> factor_std;      // length f
  double rank_temperature = 0.0;     // λ_r
  std::uint64_t refresh_interval = 0;
  int retry_cap = 50;
  bool refreshed = false;

  const std::uint32_t* ordering(std::uint32_t factor) const {
    return order.data() + static_cast<std::size_t>(factor) * item_count;
  }
};

template <typename Real>
AdaptiveSamplerState<Real> make_adaptive_state(std::uint32_t item_count, std::uint32_t f,
                                               double rank_temperature,
                                               std::uint64_t refresh_interval) {
  if (!(rank_temperature > 0)) throw ConfigError("rank_temperature must be positive");
  AdaptiveSamplerState<Real> state;
  state.item_count = item_count;
  state.f = f;
  state.order.resize(static_cast<std::size_t>(f) * item_count);
  state.factor_std.assign(f, Real(0));
  state.rank_temperature = rank_temperature;
  state.refresh_interval = refresh_interval;
  return state;
}

// Re-sorts every factor's ordering against the current Q and recomputes σ_f
// (population standard deviation, Welford). Ties in q break by item index so
// the permutation is deterministic.
template <typename Real>
void refresh_adaptive_state(const ModelParams<Real>& params, AdaptiveSamplerState<Real>& state) {
  const std::uint32_t n = state.item_count;
  for (std::uint32_t f = 0; f < state.f; ++f) {
    std::uint32_t* ord = state.order.data() + static_cast<std::size_t>(f) * n;
    std::iota(ord, ord + n, 0u);
    std::sort(ord, ord + n, [&](std::uint32_t a, std::uint32_t b) {
      const Real qa = params.q(a)[f];
      const Real qb = params.q(b)[f];
      return qa != qb ? qa > qb : a < b;
    });

    double mean = 0, m2 = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
      const double x = static_cast<double>(params.q(i)[f]);
      const double delta = x - mean;
      mean += delta / double(i + 1);
      m2 += delta * (x - mean);
    }
    state.factor_std[f] = static_cast<Real>(n ? std::sqrt(m2 / double(n)) : 0.0);
  }
  state.refreshed = true;
}

// Inverse-CDF draw from p(r) ∝ exp(−r/λ_r) truncated to n ranks.
inline std::uint32_t sample_truncated_rank(double lambda_r, std::uint32_t n, Rng& rng) {
  const double q = std::exp(-1.0 / lambda_r);
  const double qn = std::pow(q, double(n));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  const double num = std::log1p(-u * (1.0 - qn));
  const double den = std::log(q);
  if (!(den < 0.0)) return std::min(n - 1, static_cast<std::uint32_t>(u * n));  // λ_r → ∞
  auto r = static_cast<std::int64_t>(std::ceil(num / den)) - 1;
  if (r < 0) r = 0;
  if (r >= static_cast<std::int64_t>(n)) r = static_cast<std::int64_t>(n) - 1;
  return static_cast<std::uint32_t>(r);
}

// Draw factor f ∝ |p_{u,f}|·σ_f, rank r from the truncated exponential law,
// then take the rank-r item of factor f's ordering (reversed when p_{u,f} is
// negative). Rejected positives are retried up to the cap, then the uniform
// sampler takes over; all-zero selection weight falls back to uniform too.
template <typename Real>
std::uint32_t sample_negative_adaptive(std::uint32_t u, const ModelParams<Real>& params,
                                       const AdaptiveSamplerState<Real>& state,
                                       const UserHistoryIndex& history, Rng& rng) {
  if (!state.refreshed) throw Error("adaptive sampler state used before refresh");
  if (history.degree(u) >= history.item_count) {
    throw NoNegativeAvailableError("user " + std::to_string(u) +
                                   " has interacted with every item");
  }

  const Real* pu = params.p(u);
  double total = 0;
  for (std::uint32_t f = 0; f < state.f; ++f) {
    total += std::abs(static_cast<double>(pu[f])) * static_cast<double>(state.factor_std[f]);
  }
  if (!(total > 0)) return sample_negative_uniform(u, history, rng);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int attempt = 0; attempt < state.retry_cap; ++attempt) {
    double cut = unit(rng) * total;
    std::uint32_t factor = state.f - 1;
    for (std::uint32_t f = 0; f < state.f; ++f) {
      cut -= std::abs(static_cast<double>(pu[f])) * static_cast<double>(state.factor_std[f]);
      if (cut <= 0) {
        factor = f;
        break;
      }
    }
    const std::uint32_t r = sample_truncated_rank(state.rank_temperature, state.item_count, rng);
    const std::uint32_t* ord = state.ordering(factor);
    const std::uint32_t j = pu[factor] >= 0 ? ord[r] : ord[state.item_count - 1 - r];
    if (!history.contains(u, j)) return j;
  }
  return sample_negative_uniform(u, history, rng);
}

enum class SamplerKind { uniform, adaptive };

inline std::string to_string(SamplerKind k) {
  return k == SamplerKind::uniform ? "uniform" : "adaptive";
}

inline SamplerKind parse_sampler_kind(const std::string& name) {
  if (name == "uniform") return SamplerKind::uniform;
  if (name == "adaptive") return SamplerKind::adaptive;
  throw ConfigError("unknown sampler '" + name + "' (expected uniform|adaptive)");
}

struct SamplerConfig {
  SamplerKind kind = SamplerKind::uniform;
  double rank_temperature = 0.0;      // 0 → item_count / 100
  std::uint64_t refresh_interval = 0; // 0 → one epoch of triples

  double resolved_rank_temperature(std::uint32_t item_count) const {
    if (rank_temperature > 0) return rank_temperature;
    return std::max(1.0, double(item_count) / 100.0);
  }
  std::uint64_t resolved_refresh_interval(std::uint64_t epoch_triples) const {
    return refresh_interval ? refresh_interval : std::max<std::uint64_t>(1, epoch_triples);
  }
};

// Owns the per-run sampling state; the training loop calls maybe_refresh at
// the top of every iteration and sample once per triple.
template <typename Real>
class TripleSampler {
public:
  TripleSampler(const SamplerConfig& cfg, std::uint32_t item_count, std::uint32_t f,
                std::uint64_t epoch_triples)
      : kind_(cfg.kind) {
    if (kind_ == SamplerKind::adaptive) {
      state_ = make_adaptive_state<Real>(item_count, f,
                                         cfg.resolved_rank_temperature(item_count),
                                         cfg.resolved_refresh_interval(epoch_triples));
    }
  }

  void maybe_refresh(const ModelParams<Real>& params, std::uint64_t step) {
    if (kind_ == SamplerKind::adaptive && step % state_.refresh_interval == 0) {
      refresh_adaptive_state(params, state_);
    }
  }

  Triple sample(const ModelParams<Real>& params, const UserHistoryIndex& history, Rng& rng) {
    Triple t;
    std::tie(t.u, t.i) = sample_positive(history, rng);
    t.j = kind_ == SamplerKind::uniform
              ? sample_negative_uniform(t.u, history, rng)
              : sample_negative_adaptive(t.u, params, state_, history, rng);
    assert(history.contains(t.u, t.i));
    assert(!history.contains(t.u, t.j));
    return t;
  }

  SamplerKind kind() const { return kind_; }

private:
  SamplerKind kind_;
  AdaptiveSamplerState<Real> state_;
};

}  // namespace bpr
