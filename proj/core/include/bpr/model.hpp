#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "bpr/errors.hpp"
#include "bpr/rng.hpp"

namespace bpr {

// Factorization parameters. P and Q are row-major (row u = p_u, row i = q_i);
// item biases are present exactly when the model was built with them.
template <typename Real>
struct ModelParams {
  std::uint32_t user_count = 0;
  std::uint32_t item_count = 0;
  std::uint32_t f = 0;
  std::vector<Real> P;  // user_count * f
  std::vector<Real> Q;  // item_count * f
  std::vector<Real> b;  // item_count when biases are on, empty otherwise

  bool has_bias() const { return !b.empty(); }
  Real* p(std::uint32_t u) { return P.data() + static_cast<std::size_t>(u) * f; }
  const Real* p(std::uint32_t u) const { return P.data() + static_cast<std::size_t>(u) * f; }
  Real* q(std::uint32_t i) { return Q.data() + static_cast<std::size_t>(i) * f; }
  const Real* q(std::uint32_t i) const { return Q.data() + static_cast<std::size_t>(i) * f; }
};

struct InitSpec {
  enum class Distribution { normal, uniform };
  Distribution distribution = Distribution::normal;
  double mean = 0.0;
  double stddev = 0.01;
  double lo = 0.0;
  double hi = 0.0;
  std::uint64_t seed = 0;
  double bias_init = 0.0;

  static InitSpec normal(double mean, double stddev, std::uint64_t seed) {
    InitSpec s;
    s.distribution = Distribution::normal;
    s.mean = mean;
    s.stddev = stddev;
    s.seed = seed;
    return s;
  }
  static InitSpec uniform(double lo, double hi, std::uint64_t seed) {
    InitSpec s;
    s.distribution = Distribution::uniform;
    s.lo = lo;
    s.hi = hi;
    s.seed = seed;
    return s;
  }
};

template <typename Real>
ModelParams<Real> init_model(std::uint32_t user_count, std::uint32_t item_count, std::uint32_t f,
                             const InitSpec& spec, bool use_bias) {
  if (f == 0) throw ConfigError("embedding dimension must be at least 1");
  if (spec.distribution == InitSpec::Distribution::normal && !(spec.stddev > 0.0)) {
    throw ConfigError("init stddev must be positive");
  }
  if (spec.distribution == InitSpec::Distribution::uniform && !(spec.lo < spec.hi)) {
    throw ConfigError("init range must satisfy lo < hi");
  }

  ModelParams<Real> params;
  params.user_count = user_count;
  params.item_count = item_count;
  params.f = f;
  params.P.resize(static_cast<std::size_t>(user_count) * f);
  params.Q.resize(static_cast<std::size_t>(item_count) * f);
  if (use_bias) params.b.assign(item_count, static_cast<Real>(spec.bias_init));

  Rng rng(spec.seed);
  if (spec.distribution == InitSpec::Distribution::normal) {
    std::normal_distribution<double> dist(spec.mean, spec.stddev);
    for (Real& x : params.P) x = static_cast<Real>(dist(rng));
    for (Real& x : params.Q) x = static_cast<Real>(dist(rng));
  } else {
    std::uniform_real_distribution<double> dist(spec.lo, spec.hi);
    for (Real& x : params.P) x = static_cast<Real>(dist(rng));
    for (Real& x : params.Q) x = static_cast<Real>(dist(rng));
  }
  return params;
}

// r̂(u,i) = p_u·q_i (+ b_i when biases are on). Unchecked variant for hot loops.
template <typename Real>
Real score_unchecked(const ModelParams<Real>& m, std::uint32_t u, std::uint32_t i) {
  const Real* pu = m.p(u);
  const Real* qi = m.q(i);
  Real dot = 0;
  for (std::uint32_t k = 0; k < m.f; ++k) dot += pu[k] * qi[k];
  return m.has_bias() ? dot + m.b[i] : dot;
}

template <typename Real>
Real score(const ModelParams<Real>& m, std::uint32_t u, std::uint32_t i) {
  if (u >= m.user_count) throw IndexError("user index " + std::to_string(u) + " out of range");
  if (i >= m.item_count) throw IndexError("item index " + std::to_string(i) + " out of range");
  return score_unchecked(m, u, i);
}

template <typename Real>
void score_all_items(const ModelParams<Real>& m, std::uint32_t u, std::vector<Real>& out) {
  if (u >= m.user_count) throw IndexError("user index " + std::to_string(u) + " out of range");
  out.resize(m.item_count);
  for (std::uint32_t i = 0; i < m.item_count; ++i) out[i] = score_unchecked(m, u, i);
}

template <typename Real>
std::vector<Real> score_all_items(const ModelParams<Real>& m, std::uint32_t u) {
  std::vector<Real> out;
  score_all_items(m, u, out);
  return out;
}

// Checkpoints are stored in 64-bit reals regardless of the training
// precision: binary header (magic, version, f, counts, bias flag) followed by
// row-major P, Q, b, plus a JSON metadata twin at <path>.json.
void save_checkpoint(const ModelParams<double>& params, const std::filesystem::path& path);
ModelParams<double> load_checkpoint(const std::filesystem::path& path);

template <typename Real>
ModelParams<double> to_double(const ModelParams<Real>& m) {
  ModelParams<double> out;
  out.user_count = m.user_count;
  out.item_count = m.item_count;
  out.f = m.f;
  out.P.assign(m.P.begin(), m.P.end());
  out.Q.assign(m.Q.begin(), m.Q.end());
  out.b.assign(m.b.begin(), m.b.end());
  return out;
}

}  // namespace bpr
