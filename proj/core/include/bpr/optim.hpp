#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "bpr/errors.hpp"

namespace bpr {

enum class OptimizerKind { sgd, momentum_sgd, rmsprop, adam };

inline std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::momentum_sgd: return "momentum_sgd";
    case OptimizerKind::rmsprop: return "rmsprop";
    case OptimizerKind::adam: return "adam";
  }
  return "sgd";
}

inline OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "momentum_sgd" || name == "momentum") return OptimizerKind::momentum_sgd;
  if (name == "rmsprop") return OptimizerKind::rmsprop;
  if (name == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + name + "' (expected sgd|momentum_sgd|rmsprop|adam)");
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  double learning_rate = 0.05;
  double beta = 0.9;    // momentum_sgd
  double rho = 0.9;     // rmsprop
  double beta1 = 0.9;   // adam
  double beta2 = 0.999; // adam
  double eps = 1e-8;    // rmsprop, adam

  void validate() const {
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
    auto in_unit = [](double x) { return x >= 0.0 && x < 1.0; };
    if (!in_unit(beta)) throw ConfigError("momentum beta must be in [0, 1)");
    if (!in_unit(rho)) throw ConfigError("rmsprop rho must be in [0, 1)");
    if (!in_unit(beta1) || !in_unit(beta2)) throw ConfigError("adam betas must be in [0, 1)");
    if (!(eps > 0)) throw ConfigError("optimizer eps must be positive");
  }
};

// mean |first moment| over rows touched within each 1000-iteration window.
struct MomentumTelemetry {
  std::vector<std::pair<std::uint64_t, double>> window_mean_abs_m;
};

void write_telemetry_csv(const MomentumTelemetry& telemetry, const std::filesystem::path& path);

// Per-row optimizer slots for one parameter block (all of P, all of Q, or the
// bias vector with width 1). Slots are allocated the first time a row is
// updated; Adam's bias-correction timestep t is likewise per row, so rarely
// seen items are not over-corrected by a global step count.
template <typename Real>
class OptimizerState {
public:
  OptimizerState(std::uint32_t row_count, std::uint32_t width, OptimizerKind kind)
      : kind_(kind), width_(width), slot_of_row_(row_count, kNoSlot) {}

  bool has_first_moment() const {
    return kind_ == OptimizerKind::momentum_sgd || kind_ == OptimizerKind::adam;
  }

  // θ ← update(θ, g) in place. `step` only labels NumericsError diagnostics.
  void apply_update(std::uint32_t row, Real* theta, const Real* grad, const OptimizerConfig& cfg,
                    std::uint64_t step) {
    const double lr = cfg.learning_rate;
    switch (kind_) {
      case OptimizerKind::sgd: {
        for (std::uint32_t k = 0; k < width_; ++k) {
          theta[k] -= static_cast<Real>(lr) * grad[k];
        }
        break;
      }
      case OptimizerKind::momentum_sgd: {
        Real* m = moment1(slot(row));
        const Real beta = static_cast<Real>(cfg.beta);
        for (std::uint32_t k = 0; k < width_; ++k) {
          m[k] = beta * m[k] + grad[k];
          theta[k] -= static_cast<Real>(lr) * m[k];
        }
        break;
      }
      case OptimizerKind::rmsprop: {
        Real* v = moment2(slot(row));
        const Real rho = static_cast<Real>(cfg.rho);
        const Real eps = static_cast<Real>(cfg.eps);
        for (std::uint32_t k = 0; k < width_; ++k) {
          v[k] = rho * v[k] + (Real(1) - rho) * grad[k] * grad[k];
          theta[k] -= static_cast<Real>(lr) * grad[k] / (std::sqrt(v[k]) + eps);
        }
        break;
      }
      case OptimizerKind::adam: {
        const std::uint32_t s = slot(row);
        Real* m = moment1(s);
        Real* v = moment2(s);
        const std::uint64_t t = ++step_of_slot_[s];
        const Real beta1 = static_cast<Real>(cfg.beta1);
        const Real beta2 = static_cast<Real>(cfg.beta2);
        const Real eps = static_cast<Real>(cfg.eps);
        const Real c1 = Real(1) - static_cast<Real>(std::pow(cfg.beta1, double(t)));
        const Real c2 = Real(1) - static_cast<Real>(std::pow(cfg.beta2, double(t)));
        for (std::uint32_t k = 0; k < width_; ++k) {
          m[k] = beta1 * m[k] + (Real(1) - beta1) * grad[k];
          v[k] = beta2 * v[k] + (Real(1) - beta2) * grad[k] * grad[k];
          const Real m_hat = m[k] / c1;
          const Real v_hat = v[k] / c2;
          theta[k] -= static_cast<Real>(lr) * m_hat / (std::sqrt(v_hat) + eps);
        }
        break;
      }
    }
    for (std::uint32_t k = 0; k < width_; ++k) {
      if (!std::isfinite(static_cast<double>(theta[k]))) {
        throw NumericsError("non-finite parameter after update (row " + std::to_string(row) +
                            ", step " + std::to_string(step) + ")");
      }
    }
  }

  // Accumulates Σ|m| and the component count over rows touched since the
  // last flush, then clears the window marks. No-op counts for sgd/rmsprop.
  void flush_window(double& abs_sum, std::uint64_t& component_count) {
    if (has_first_moment()) {
      for (std::uint32_t s : window_slots_) {
        const Real* m = moment1(s);
        for (std::uint32_t k = 0; k < width_; ++k) {
          abs_sum += std::abs(static_cast<double>(m[k]));
        }
        component_count += width_;
        in_window_[s] = 0;
      }
    }
    window_slots_.clear();
  }

  bool row_touched(std::uint32_t row) const { return slot_of_row_[row] != kNoSlot; }

  const Real* first_moment(std::uint32_t row) const {
    return m1_.data() + static_cast<std::size_t>(slot_of_row_[row]) * width_;
  }

private:
  static constexpr std::uint32_t kNoSlot = 0xffffffffu;

  std::uint32_t slot(std::uint32_t row) {
    std::uint32_t s = slot_of_row_[row];
    if (s == kNoSlot) {
      s = static_cast<std::uint32_t>(step_of_slot_.size());
      slot_of_row_[row] = s;
      if (has_first_moment()) m1_.resize(m1_.size() + width_, Real(0));
      if (kind_ == OptimizerKind::rmsprop || kind_ == OptimizerKind::adam) {
        m2_.resize(m2_.size() + width_, Real(0));
      }
      step_of_slot_.push_back(0);
      in_window_.push_back(0);
    }
    if (has_first_moment() && !in_window_[s]) {
      in_window_[s] = 1;
      window_slots_.push_back(s);
    }
    return s;
  }

  Real* moment1(std::uint32_t s) { return m1_.data() + static_cast<std::size_t>(s) * width_; }
  Real* moment2(std::uint32_t s) { return m2_.data() + static_cast<std::size_t>(s) * width_; }
  const Real* moment1(std::uint32_t s) const {
    return m1_.data() + static_cast<std::size_t>(s) * width_;
  }

  OptimizerKind kind_;
  std::uint32_t width_;
  std::vector<std::uint32_t> slot_of_row_;
  std::vector<Real> m1_;
  std::vector<Real> m2_;
  std::vector<std::uint64_t> step_of_slot_;
  std::vector<std::uint8_t> in_window_;
  std::vector<std::uint32_t> window_slots_;
};

// Appends one (iteration, mean |m|) sample over every state's window; rows
// never touched in the window contribute nothing. No-op for kinds without a
// first moment.
template <typename Real>
void record_momentum(std::initializer_list<OptimizerState<Real>*> states,
                     MomentumTelemetry& telemetry, std::uint64_t iteration) {
  double abs_sum = 0;
  std::uint64_t count = 0;
  bool tracked = false;
  for (OptimizerState<Real>* s : states) {
    tracked = tracked || s->has_first_moment();
    s->flush_window(abs_sum, count);
  }
  if (!tracked) return;
  telemetry.window_mean_abs_m.emplace_back(iteration, count ? abs_sum / double(count) : 0.0);
}

}  // namespace bpr
