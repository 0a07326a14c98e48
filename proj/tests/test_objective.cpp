#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "bpr/errors.hpp"
#include "bpr/objective.hpp"

using namespace bpr;

namespace {

// One-user, two-item model with f = 1 and hand-set weights.
ModelParams<double> tiny_model(double pu, double qi, double qj) {
  ModelParams<double> m;
  m.user_count = 1;
  m.item_count = 2;
  m.f = 1;
  m.P = {pu};
  m.Q = {qi, qj};
  return m;
}

ModelParams<double> random_model(std::uint32_t f, bool bias, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 0.8);
  ModelParams<double> m;
  m.user_count = 3;
  m.item_count = 5;
  m.f = f;
  m.P.resize(3 * f);
  m.Q.resize(5 * f);
  for (double& x : m.P) x = dist(rng);
  for (double& x : m.Q) x = dist(rng);
  if (bias) {
    m.b.resize(5);
    for (double& x : m.b) x = dist(rng);
  }
  return m;
}

}  // namespace

TEST_CASE("softplus matches frozen reference values and never overflows") {
  CHECK(softplus(0.0) == doctest::Approx(0.6931471805599453).epsilon(1e-15));
  CHECK(softplus(-10.0) == doctest::Approx(4.539889921686465e-05).epsilon(1e-12));
  CHECK(softplus(-2.0) == doctest::Approx(0.1269280110429725).epsilon(1e-14));
  CHECK(softplus(2.0) == doctest::Approx(2.1269280110429727).epsilon(1e-14));

  // Large arguments stay finite on both branches.
  CHECK(softplus(750.0) == doctest::Approx(750.0).epsilon(1e-15));
  CHECK(softplus(-750.0) == 0.0);
  CHECK(std::isfinite(softplus(1e8)));

  // -log sigmoid(-50) == softplus(50) ~ 50.
  CHECK(softplus(50.0) == doctest::Approx(50.0).epsilon(1e-12));
}

TEST_CASE("sigmoid is stable, bounded and symmetric") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-2.0) == doctest::Approx(0.11920292202211755).epsilon(1e-14));
  CHECK(sigmoid(2.0) == doctest::Approx(0.8807970779778823).epsilon(1e-14));
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) == 0.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> xs(-40.0, 40.0);
  for (int k = 0; k < 200; ++k) {
    const double x = xs(rng);
    CHECK(sigmoid(x) + sigmoid(-x) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sigmoid(x) > 0.0);
    CHECK(sigmoid(x) <= 1.0);
    // The open bound only survives while exp(-x) stays above one ulp.
    if (x < 36.0) CHECK(sigmoid(x) < 1.0);
  }
}

TEST_CASE("regularization factories resolve scheme substitutions") {
  RegScheme none = RegScheme::none();
  CHECK(none.variant == RegVariant::none);
  CHECK(none.lambda_u == 0.0);
  CHECK(none.lambda_b == 0.0);

  RegScheme shared = RegScheme::shared(0.03);
  CHECK(shared.variant == RegVariant::shared);
  CHECK(shared.lambda_u == 0.03);
  CHECK(shared.lambda_i == 0.03);
  CHECK(shared.lambda_j == 0.03);
  CHECK(shared.lambda_b == 0.03);

  RegScheme ui = RegScheme::user_item(0.1, 0.02);
  CHECK(ui.lambda_u == 0.1);
  CHECK(ui.lambda_i == 0.02);
  CHECK(ui.lambda_j == 0.02);  // negative item inherits the item strength
  CHECK(ui.lambda_b == 0.02);

  RegScheme sep = RegScheme::separate(0.1, 0.2, 0.3, 0.4);
  CHECK(sep.lambda_u == 0.1);
  CHECK(sep.lambda_i == 0.2);
  CHECK(sep.lambda_j == 0.3);
  CHECK(sep.lambda_b == 0.4);

  CHECK(sep.with_bias_reg(0.9).lambda_b == 0.9);
  CHECK_THROWS_AS(RegScheme::shared(-0.1), ConfigError);
  CHECK_THROWS_AS(RegScheme::user_item(-1, 0), ConfigError);
  CHECK_THROWS_AS(RegScheme::separate(0, 0, -2, 0), ConfigError);
  CHECK_THROWS_AS(shared.with_bias_reg(-0.5), ConfigError);
}

TEST_CASE("regularization scheme names round-trip") {
  for (RegVariant v : {RegVariant::none, RegVariant::shared, RegVariant::user_item,
                       RegVariant::separate}) {
    CHECK(parse_reg_variant(to_string(v)) == v);
  }
  CHECK(parse_reg_variant("user-item") == RegVariant::user_item);
  CHECK_THROWS_AS(parse_reg_variant("l2"), ConfigError);
}

TEST_CASE("bpr_loss equals softplus of the negated score difference") {
  // p = 1, q_i = 2, q_j = 0 gives x = 2.
  ModelParams<double> m = tiny_model(1.0, 2.0, 0.0);
  CHECK(bpr_loss(m, 0, 0, 1, RegScheme::none()) ==
        doctest::Approx(0.1269280110429725).epsilon(1e-14));

  // Shared lambda 0.1 adds 0.1 * (|p|^2 + |q_i|^2 + |q_j|^2) = 0.5.
  CHECK(bpr_loss(m, 0, 0, 1, RegScheme::shared(0.1)) ==
        doctest::Approx(0.6269280110429725).epsilon(1e-14));

  // Swapping i and j flips the sign of x.
  CHECK(bpr_loss(m, 0, 1, 0, RegScheme::none()) ==
        doctest::Approx(2.1269280110429727).epsilon(1e-14));
}

TEST_CASE("bpr_loss includes bias differences and bias regularization") {
  ModelParams<double> m = tiny_model(1.0, 2.0, 0.0);
  m.b = {0.5, 1.0};  // x becomes 2 + 0.5 - 1.0 = 1.5
  CHECK(bpr_loss(m, 0, 0, 1, RegScheme::none()) ==
        doctest::Approx(softplus(-1.5)).epsilon(1e-14));
  // lambda_b contributes b_i^2 + b_j^2 = 1.25.
  const double with_reg = bpr_loss(m, 0, 0, 1, RegScheme::shared(0.1));
  CHECK(with_reg == doctest::Approx(softplus(-1.5) + 0.1 * (1 + 4 + 0 + 1.25)).epsilon(1e-13));
}

TEST_CASE("loss decreases monotonically as the score margin grows") {
  double prev = std::numeric_limits<double>::infinity();
  for (double margin : {-3.0, -1.0, 0.0, 0.5, 2.0, 10.0}) {
    ModelParams<double> m = tiny_model(1.0, margin, 0.0);
    const double loss = bpr_loss(m, 0, 0, 1, RegScheme::none());
    CHECK(loss < prev);
    CHECK(loss >= 0.0);
    prev = loss;
  }
}

TEST_CASE("the frozen gradient example at x = 2 holds") {
  ModelParams<double> m = tiny_model(1.0, 2.0, 0.0);
  TripleGrad<double> g = bpr_grad(m, 0, 0, 1, RegScheme::none());
  // s = sigmoid(-2); g_pu = -s * (q_i - q_j).
  CHECK(g.g_pu[0] == doctest::Approx(-0.2384058440442351).epsilon(1e-14));
  CHECK(g.g_qi[0] == doctest::Approx(-0.11920292202211755).epsilon(1e-14));
  CHECK(g.g_qj[0] == doctest::Approx(0.11920292202211755).epsilon(1e-14));
  CHECK(g.g_bi == 0.0);  // no bias in the model
  CHECK(g.g_bj == 0.0);
  CHECK(g.loss_value == doctest::Approx(0.1269280110429725).epsilon(1e-14));
}

TEST_CASE("analytic gradients match central finite differences everywhere") {
  std::mt19937_64 rng(2024);
  const double h = 1e-6;
  const double tol = 1e-5;
  std::uniform_real_distribution<double> lam(0.0, 0.2);

  int instances = 0;
  for (int rep = 0; rep < 100; ++rep) {
    for (bool bias : {false, true}) {
      RegScheme schemes[] = {
          RegScheme::none(),
          RegScheme::shared(lam(rng)),
          RegScheme::user_item(lam(rng), lam(rng)),
          RegScheme::separate(lam(rng), lam(rng), lam(rng), lam(rng)),
      };
      for (const RegScheme& reg : schemes) {
        ModelParams<double> m = random_model(8, bias, rng);
        const std::uint32_t u = 1, i = 2, j = 4;
        TripleGrad<double> g = bpr_grad(m, u, i, j, reg);

        auto check_component = [&](double* slot, double analytic) {
          const double save = *slot;
          *slot = save + h;
          const double up = bpr_loss(m, u, i, j, reg);
          *slot = save - h;
          const double down = bpr_loss(m, u, i, j, reg);
          *slot = save;
          const double numeric = (up - down) / (2 * h);
          const double scale = std::max({1.0, std::abs(numeric), std::abs(analytic)});
          CHECK(std::abs(numeric - analytic) / scale < tol);
        };

        for (std::uint32_t k = 0; k < m.f; ++k) {
          check_component(&m.P[u * m.f + k], g.g_pu[k]);
          check_component(&m.Q[i * m.f + k], g.g_qi[k]);
          check_component(&m.Q[j * m.f + k], g.g_qj[k]);
        }
        if (bias) {
          check_component(&m.b[i], g.g_bi);
          check_component(&m.b[j], g.g_bj);
        }
        ++instances;
      }
    }
  }
  CHECK(instances == 800);
}

TEST_CASE("bpr_grad_into reuses buffers without stale state") {
  std::mt19937_64 rng(1);
  ModelParams<double> m = random_model(4, true, rng);
  TripleGrad<double> g;
  bpr_grad_into(m, 0, 1, 2, RegScheme::shared(0.05), g);
  TripleGrad<double> fresh = bpr_grad(m, 2, 3, 0, RegScheme::none());
  bpr_grad_into(m, 2, 3, 0, RegScheme::none(), g);
  CHECK(g.g_pu == fresh.g_pu);
  CHECK(g.g_qi == fresh.g_qi);
  CHECK(g.g_qj == fresh.g_qj);
  CHECK(g.g_bi == fresh.g_bi);
  CHECK(g.loss_value == fresh.loss_value);
}

TEST_CASE("adding a constant to every bias leaves the unregularized loss unchanged") {
  std::mt19937_64 rng(6);
  ModelParams<double> m = random_model(6, true, rng);
  const double before = bpr_loss(m, 0, 1, 3, RegScheme::none());
  for (double& x : m.b) x += 5.0;
  CHECK(bpr_loss(m, 0, 1, 3, RegScheme::none()) == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("auc_pair_indicator returns 1, 0.5 or 0") {
  ModelParams<double> m = tiny_model(1.0, 2.0, 0.0);
  CHECK(auc_pair_indicator(m, 0, 0, 1) == 1.0);
  CHECK(auc_pair_indicator(m, 0, 1, 0) == 0.0);
  ModelParams<double> tie = tiny_model(1.0, 0.7, 0.7);
  CHECK(auc_pair_indicator(tie, 0, 0, 1) == 0.5);
}

TEST_CASE("float32 loss and gradients track the double versions") {
  std::mt19937_64 rng(17);
  ModelParams<double> m64 = random_model(8, true, rng);
  ModelParams<float> m32;
  m32.user_count = m64.user_count;
  m32.item_count = m64.item_count;
  m32.f = m64.f;
  m32.P.assign(m64.P.begin(), m64.P.end());
  m32.Q.assign(m64.Q.begin(), m64.Q.end());
  m32.b.assign(m64.b.begin(), m64.b.end());

  RegScheme reg = RegScheme::shared(0.02);
  CHECK(static_cast<double>(bpr_loss(m32, 1, 0, 4, reg)) ==
        doctest::Approx(bpr_loss(m64, 1, 0, 4, reg)).epsilon(1e-5));
  TripleGrad<float> g32 = bpr_grad(m32, 1, 0, 4, reg);
  TripleGrad<double> g64 = bpr_grad(m64, 1, 0, 4, reg);
  for (std::uint32_t k = 0; k < 8; ++k) {
    CHECK(static_cast<double>(g32.g_pu[k]) == doctest::Approx(g64.g_pu[k]).epsilon(1e-4));
  }
}
