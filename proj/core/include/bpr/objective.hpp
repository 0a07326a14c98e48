#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bpr/errors.hpp"
#include "bpr/model.hpp"

namespace bpr {

enum class RegVariant { none, shared, user_item, separate };

inline std::string to_string(RegVariant v) {
  switch (v) {
    case RegVariant::none: return "none";
    case RegVariant::shared: return "shared";
    case RegVariant::user_item: return "user_item";
    case RegVariant::separate: return "separate";
  }
  return "none";
}

inline RegVariant parse_reg_variant(const std::string& name) {
  if (name == "none") return RegVariant::none;
  if (name == "shared") return RegVariant::shared;
  if (name == "user_item" || name == "user-item") return RegVariant::user_item;
  if (name == "separate") return RegVariant::separate;
  throw ConfigError("unknown regularization scheme '" + name +
                    "' (expected none|shared|user_item|separate)");
}

// Regularizer Ω = λ_u‖p_u‖² + λ_i‖q_i‖² + λ_j‖q_j‖² + λ_b(b_i² + b_j²),
// gradient 2λθ. The factories resolve scheme-specific λ substitutions up
// front: shared uses one λ everywhere, user_item applies λ_i to the negative
// item as well, and λ_b defaults to λ_i unless the separate scheme sets it.
struct RegScheme {
  RegVariant variant = RegVariant::none;
  double lambda_u = 0.0;
  double lambda_i = 0.0;
  double lambda_j = 0.0;
  double lambda_b = 0.0;

  static RegScheme none() { return RegScheme{}; }
  static RegScheme shared(double lambda);
  static RegScheme user_item(double lambda_u, double lambda_i);
  static RegScheme separate(double lambda_u, double lambda_i, double lambda_j, double lambda_b);
  RegScheme with_bias_reg(double lambda_b) const;
};

inline RegScheme RegScheme::shared(double lambda) {
  if (lambda < 0) throw ConfigError("regularization strength must be non-negative");
  RegScheme r;
  r.variant = RegVariant::shared;
  r.lambda_u = r.lambda_i = r.lambda_j = r.lambda_b = lambda;
  return r;
}

inline RegScheme RegScheme::user_item(double lambda_u, double lambda_i) {
  if (lambda_u < 0 || lambda_i < 0) {
    throw ConfigError("regularization strength must be non-negative");
  }
  RegScheme r;
  r.variant = RegVariant::user_item;
  r.lambda_u = lambda_u;
  r.lambda_i = r.lambda_j = r.lambda_b = lambda_i;
  return r;
}

inline RegScheme RegScheme::separate(double lambda_u, double lambda_i, double lambda_j,
                                     double lambda_b) {
  if (lambda_u < 0 || lambda_i < 0 || lambda_j < 0 || lambda_b < 0) {
    throw ConfigError("regularization strength must be non-negative");
  }
  RegScheme r;
  r.variant = RegVariant::separate;
  r.lambda_u = lambda_u;
  r.lambda_i = lambda_i;
  r.lambda_j = lambda_j;
  r.lambda_b = lambda_b;
  return r;
}

inline RegScheme RegScheme::with_bias_reg(double lambda_b) const {
  if (lambda_b < 0) throw ConfigError("regularization strength must be non-negative");
  RegScheme r = *this;
  r.lambda_b = lambda_b;
  return r;
}

// softplus(x) = log(1 + e^x) without overflow; −log σ(x) = softplus(−x).
template <typename Real>
Real softplus(Real x) {
  return std::max(x, Real(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename Real>
Real sigmoid(Real x) {
  if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real(1) + e);
}

template <typename Real>
Real squared_norm(const Real* v, std::uint32_t n) {
  Real s = 0;
  for (std::uint32_t k = 0; k < n; ++k) s += v[k] * v[k];
  return s;
}

template <typename Real>
Real bpr_loss(const ModelParams<Real>& m, std::uint32_t u, std::uint32_t i, std::uint32_t j,
              const RegScheme& reg) {
  const Real x = score_unchecked(m, u, i) - score_unchecked(m, u, j);
  Real loss = softplus(-x);
  loss += static_cast<Real>(reg.lambda_u) * squared_norm(m.p(u), m.f);
  loss += static_cast<Real>(reg.lambda_i) * squared_norm(m.q(i), m.f);
  loss += static_cast<Real>(reg.lambda_j) * squared_norm(m.q(j), m.f);
  if (m.has_bias()) {
    loss += static_cast<Real>(reg.lambda_b) * (m.b[i] * m.b[i] + m.b[j] * m.b[j]);
  }
  return loss;
}

template <typename Real>
struct TripleGrad {
  std::vector<Real> g_pu;
  std::vector<Real> g_qi;
  std::vector<Real> g_qj;
  Real g_bi = 0;
  Real g_bj = 0;
  Real loss_value = 0;
};

// With s = σ(−x_uij):
//   g_pu = −s(q_i − q_j) + 2λ_u p_u
//   g_qi = −s p_u + 2λ_i q_i
//   g_qj = +s p_u + 2λ_j q_j
//   g_bi = −s + 2λ_b b_i,  g_bj = +s + 2λ_b b_j
template <typename Real>
void bpr_grad_into(const ModelParams<Real>& m, std::uint32_t u, std::uint32_t i, std::uint32_t j,
                   const RegScheme& reg, TripleGrad<Real>& out) {
  const std::uint32_t f = m.f;
  out.g_pu.resize(f);
  out.g_qi.resize(f);
  out.g_qj.resize(f);

  const Real* pu = m.p(u);
  const Real* qi = m.q(i);
  const Real* qj = m.q(j);

  Real x = 0;
  for (std::uint32_t k = 0; k < f; ++k) x += pu[k] * (qi[k] - qj[k]);
  if (m.has_bias()) x += m.b[i] - m.b[j];

  const Real s = sigmoid(-x);
  const Real lu = static_cast<Real>(2.0 * reg.lambda_u);
  const Real li = static_cast<Real>(2.0 * reg.lambda_i);
  const Real lj = static_cast<Real>(2.0 * reg.lambda_j);
  for (std::uint32_t k = 0; k < f; ++k) {
    out.g_pu[k] = -s * (qi[k] - qj[k]) + lu * pu[k];
    out.g_qi[k] = -s * pu[k] + li * qi[k];
    out.g_qj[k] = s * pu[k] + lj * qj[k];
  }
  if (m.has_bias()) {
    const Real lb = static_cast<Real>(2.0 * reg.lambda_b);
    out.g_bi = -s + lb * m.b[i];
    out.g_bj = s + lb * m.b[j];
  } else {
    out.g_bi = 0;
    out.g_bj = 0;
  }
  out.loss_value = bpr_loss(m, u, i, j, reg);
}

template <typename Real>
TripleGrad<Real> bpr_grad(const ModelParams<Real>& m, std::uint32_t u, std::uint32_t i,
                          std::uint32_t j, const RegScheme& reg) {
  TripleGrad<Real> out;
  bpr_grad_into(m, u, i, j, reg, out);
  return out;
}

// 1 if i is scored above j, 0.5 on a tie, 0 otherwise.
template <typename Real>
double auc_pair_indicator(const ModelParams<Real>& m, std::uint32_t u, std::uint32_t i,
                          std::uint32_t j) {
  const Real si = score(m, u, i);
  const Real sj = score(m, u, j);
  if (si > sj) return 1.0;
  if (si < sj) return 0.0;
  return 0.5;
}

}  // namespace bpr
