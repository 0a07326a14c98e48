#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "bpr/errors.hpp"
#include "bpr/model.hpp"
#include "test_util.hpp"

using namespace bpr;

TEST_CASE("init_model is deterministic per seed and fills P before Q") {
  InitSpec spec = InitSpec::normal(0.0, 0.01, 123);
  auto a = init_model<double>(20, 30, 8, spec, false);
  auto b = init_model<double>(20, 30, 8, spec, false);
  CHECK(a.P == b.P);
  CHECK(a.Q == b.Q);
  CHECK(a.b.empty());

  auto c = init_model<double>(20, 30, 8, InitSpec::normal(0.0, 0.01, 124), false);
  CHECK(a.P != c.P);

  // P consumes the stream first: a model with fewer users shares its P prefix.
  auto d = init_model<double>(10, 30, 8, spec, false);
  CHECK(std::equal(d.P.begin(), d.P.end(), a.P.begin()));
}

TEST_CASE("init_model draws match the seeded distribution") {
  InitSpec spec = InitSpec::normal(0.5, 0.02, 7);
  auto m = init_model<double>(200, 200, 16, spec, false);
  const double n = static_cast<double>(m.P.size());
  const double mean = std::accumulate(m.P.begin(), m.P.end(), 0.0) / n;
  double var = 0;
  for (double x : m.P) var += (x - mean) * (x - mean);
  var /= n;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::sqrt(var) == doctest::Approx(0.02).epsilon(0.05));

  InitSpec uni = InitSpec::uniform(-0.1, 0.3, 7);
  auto u = init_model<double>(100, 100, 8, uni, false);
  for (double x : u.P) {
    CHECK(x >= -0.1);
    CHECK(x < 0.3);
  }
}

TEST_CASE("init_model validates its configuration") {
  CHECK_THROWS_AS(init_model<double>(5, 5, 0, InitSpec::normal(0, 0.01, 1), false), ConfigError);
  CHECK_THROWS_AS(init_model<double>(5, 5, 4, InitSpec::normal(0, 0.0, 1), false), ConfigError);
  CHECK_THROWS_AS(init_model<double>(5, 5, 4, InitSpec::uniform(0.0, 0.0, 1), false), ConfigError);
  CHECK_THROWS_AS(init_model<double>(5, 5, 4, InitSpec::uniform(0.2, 0.1, 1), false), ConfigError);
}

TEST_CASE("bias vector exists exactly when requested") {
  InitSpec spec = InitSpec::normal(0.0, 0.01, 5);
  spec.bias_init = 0.25;
  auto with = init_model<double>(4, 6, 3, spec, true);
  REQUIRE(with.has_bias());
  REQUIRE(with.b.size() == 6);
  for (double x : with.b) CHECK(x == 0.25);

  auto without = init_model<double>(4, 6, 3, spec, false);
  CHECK_FALSE(without.has_bias());
}

TEST_CASE("score equals the dot product plus optional bias") {
  ModelParams<double> m;
  m.user_count = 2;
  m.item_count = 3;
  m.f = 3;
  m.P = {1.0, 2.0, 3.0, /* u1 */ -1.0, 0.5, 0.0};
  m.Q = {0.5, 0.5, 0.5, /* i1 */ 1.0, -1.0, 2.0, /* i2 */ 0.0, 0.0, 0.0};

  CHECK(score(m, 0, 0) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(score(m, 0, 1) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(score(m, 1, 1) == doctest::Approx(-1.5).epsilon(1e-15));
  CHECK(score(m, 0, 2) == 0.0);

  m.b = {0.1, -0.2, 0.3};
  CHECK(score(m, 0, 0) == doctest::Approx(3.1).epsilon(1e-15));
  CHECK(score(m, 1, 1) == doctest::Approx(-1.7).epsilon(1e-15));
}

TEST_CASE("score agrees with an independent accumulation on random models") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> dist(0.0, 1.0);
  auto m = init_model<double>(50, 80, 16, InitSpec::normal(0.0, 0.5, 321), true);
  for (double& x : m.b) x = dist(rng);

  std::uniform_int_distribution<std::uint32_t> pick_u(0, 49), pick_i(0, 79);
  for (int trial = 0; trial < 1000; ++trial) {
    std::uint32_t u = pick_u(rng), i = pick_i(rng);
    long double acc = 0;
    for (std::uint32_t k = 0; k < m.f; ++k) {
      acc += static_cast<long double>(m.P[u * m.f + k]) * m.Q[i * m.f + k];
    }
    acc += m.b[i];
    CHECK(score(m, u, i) == doctest::Approx(static_cast<double>(acc)).epsilon(1e-12));
  }
}

TEST_CASE("score is bilinear in the user row") {
  auto m = init_model<double>(3, 4, 5, InitSpec::normal(0.0, 0.3, 11), false);
  const double before = score(m, 1, 2);
  for (std::uint32_t k = 0; k < m.f; ++k) m.p(1)[k] *= 2.0;
  CHECK(score(m, 1, 2) == doctest::Approx(2.0 * before).epsilon(1e-12));
}

TEST_CASE("score bounds-checks its indices") {
  auto m = init_model<double>(3, 4, 2, InitSpec::normal(0.0, 0.1, 1), false);
  CHECK_THROWS_AS(score(m, 3, 0), IndexError);
  CHECK_THROWS_AS(score(m, 0, 4), IndexError);
  std::vector<double> out;
  CHECK_THROWS_AS(score_all_items(m, 3, out), IndexError);
}

TEST_CASE("score_all_items matches per-item scores in both overloads") {
  auto m = init_model<double>(6, 12, 4, InitSpec::normal(0.0, 0.2, 2), true);
  std::vector<double> out;
  score_all_items(m, 3, out);
  REQUIRE(out.size() == 12);
  for (std::uint32_t i = 0; i < 12; ++i) {
    CHECK(out[i] == score(m, 3, i));
  }
  CHECK(score_all_items(m, 3) == out);
}

TEST_CASE("checkpoints round-trip bit-exactly with a JSON twin") {
  testutil::TempDir dir;
  auto m = init_model<double>(7, 9, 5, InitSpec::normal(0.0, 0.1, 77), true);
  m.b[3] = -0.75;
  const auto path = dir / "model.ckpt";
  save_checkpoint(m, path);

  auto loaded = load_checkpoint(path);
  CHECK(loaded.user_count == 7);
  CHECK(loaded.item_count == 9);
  CHECK(loaded.f == 5);
  CHECK(loaded.P == m.P);
  CHECK(loaded.Q == m.Q);
  CHECK(loaded.b == m.b);

  REQUIRE(std::filesystem::exists(dir / "model.ckpt.json"));
  std::ifstream meta(dir / "model.ckpt.json");
  std::string twin((std::istreambuf_iterator<char>(meta)), std::istreambuf_iterator<char>());
  CHECK(twin.find("\"BPRCKPT\"") != std::string::npos);
  CHECK(twin.find("\"use_item_bias\": true") != std::string::npos);
  CHECK(twin.find("\"precision\": \"f64\"") != std::string::npos);
}

TEST_CASE("biasless checkpoints load without a bias vector") {
  testutil::TempDir dir;
  auto m = init_model<double>(3, 4, 2, InitSpec::normal(0.0, 0.1, 8), false);
  save_checkpoint(m, dir / "nb.ckpt");
  auto loaded = load_checkpoint(dir / "nb.ckpt");
  CHECK_FALSE(loaded.has_bias());
  CHECK(loaded.P == m.P);
}

TEST_CASE("load_checkpoint rejects foreign, truncated and non-finite files") {
  testutil::TempDir dir;

  testutil::write_file(dir / "not.ckpt", "definitely not binary");
  CHECK_THROWS_AS(load_checkpoint(dir / "not.ckpt"), DataError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), DataError);

  auto m = init_model<double>(4, 4, 3, InitSpec::normal(0.0, 0.1, 3), false);
  save_checkpoint(m, dir / "full.ckpt");
  const auto size = std::filesystem::file_size(dir / "full.ckpt");
  std::filesystem::copy_file(dir / "full.ckpt", dir / "cut.ckpt");
  std::filesystem::resize_file(dir / "cut.ckpt", size - 16);
  CHECK_THROWS_AS(load_checkpoint(dir / "cut.ckpt"), DataError);

  m.Q[2] = std::numeric_limits<double>::quiet_NaN();
  save_checkpoint(m, dir / "nan.ckpt");
  CHECK_THROWS_AS(load_checkpoint(dir / "nan.ckpt"), DataError);
}

TEST_CASE("to_double widens float parameters") {
  auto m32 = init_model<float>(5, 6, 4, InitSpec::normal(0.0, 0.05, 13), true);
  ModelParams<double> m64 = to_double(m32);
  CHECK(m64.user_count == m32.user_count);
  CHECK(m64.f == m32.f);
  REQUIRE(m64.P.size() == m32.P.size());
  for (std::size_t k = 0; k < m32.P.size(); ++k) {
    CHECK(m64.P[k] == static_cast<double>(m32.P[k]));
  }
  CHECK(m64.has_bias());
}

TEST_CASE("float32 models score consistently with their widened copy") {
  auto m32 = init_model<float>(8, 10, 6, InitSpec::normal(0.0, 0.1, 4), false);
  ModelParams<double> m64 = to_double(m32);
  for (std::uint32_t u = 0; u < 8; ++u) {
    for (std::uint32_t i = 0; i < 10; ++i) {
      CHECK(static_cast<double>(score(m32, u, i)) ==
            doctest::Approx(score(m64, u, i)).epsilon(1e-6));
    }
  }
}
