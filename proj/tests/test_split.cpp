#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <set>
#include <vector>

#include "bpr/errors.hpp"
#include "bpr/split.hpp"
#include "test_util.hpp"

using namespace bpr;

namespace {

std::vector<std::uint32_t> train_items_of(const InteractionLog& train, std::uint32_t user) {
  std::vector<std::uint32_t> items;
  for (const Event& e : train.events_of(user)) items.push_back(e.item);
  std::sort(items.begin(), items.end());
  return items;
}

bool disjoint_sorted(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  std::vector<std::uint32_t> inter;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
  return inter.empty();
}

}  // namespace

TEST_CASE("user-based split carves fold-in and targets per held-out user") {
  // 30 users with 10 distinct items each; fold fraction 0.8 keeps 8 events
  // visible and holds 2 out as targets.
  InteractionLog log = testutil::make_grid_log(30, 60, 10);
  SplitBundle bundle = split_user_based(log, 5, 0.8, 42);

  CHECK(bundle.protocol == SplitProtocol::user_based);
  CHECK_FALSE(bundle.boundaries.has_value());
  REQUIRE(bundle.validation.users.size() == 5);
  REQUIRE(bundle.test.users.size() == 5);

  std::set<std::uint32_t> heldout;
  for (const auto& eu : bundle.validation.users) heldout.insert(eu.user);
  for (const auto& eu : bundle.test.users) heldout.insert(eu.user);
  CHECK(heldout.size() == 10);  // validation and test users are disjoint

  CHECK(std::is_sorted(bundle.validation.users.begin(), bundle.validation.users.end(),
                       [](const EvalUser& a, const EvalUser& b) { return a.user < b.user; }));

  for (const auto& split : {bundle.validation, bundle.test}) {
    for (const EvalUser& eu : split.users) {
      CHECK(eu.fold_in.size() == 8);
      CHECK(eu.targets.size() == 2);
      CHECK(std::is_sorted(eu.fold_in.begin(), eu.fold_in.end()));
      CHECK(std::is_sorted(eu.targets.begin(), eu.targets.end()));
      CHECK(disjoint_sorted(eu.fold_in, eu.targets));
      // Fold-in events stay in train so the user keeps an embedding row;
      // targets never leak there.
      CHECK(train_items_of(bundle.train, eu.user) == eu.fold_in);
    }
  }

  // Untouched users keep all 10 events; totals add up.
  std::size_t expected_train = 20ull * 10 + 10ull * 8;
  CHECK(bundle.train.events.size() == expected_train);
  CHECK(bundle.validation_events.size() == 10);
  CHECK(bundle.test_events.size() == 10);
  CHECK(bundle.train.user_count == 30);
  CHECK(bundle.train.item_count == 60);

  // Raw partition events carry the original timestamps and exactly the
  // target items.
  for (const Event& e : bundle.validation_events) {
    auto original = log.events_of(e.user);
    CHECK(std::find(original.begin(), original.end(), e) != original.end());
  }
}

TEST_CASE("user-based split is seed-deterministic") {
  InteractionLog log = testutil::make_grid_log(30, 60, 10);
  SplitBundle a = split_user_based(log, 5, 0.8, 7);
  SplitBundle b = split_user_based(log, 5, 0.8, 7);
  CHECK(a == b);

  SplitBundle c = split_user_based(log, 5, 0.8, 8);
  std::set<std::uint32_t> users_a, users_c;
  for (const auto& eu : a.validation.users) users_a.insert(eu.user);
  for (const auto& eu : c.validation.users) users_c.insert(eu.user);
  CHECK(users_a != users_c);
}

TEST_CASE("fold-in rounding keeps exact fractions exact") {
  // floor(0.8 * 10 + eps) must be 8, not 7, despite floating point.
  InteractionLog log = testutil::make_grid_log(10, 30, 10);
  SplitBundle bundle = split_user_based(log, 2, 0.8, 1);
  for (const auto& eu : bundle.validation.users) CHECK(eu.fold_in.size() == 8);

  // Degree 3 at fraction 0.5 -> fold 1, target 2.
  InteractionLog tiny = testutil::make_grid_log(12, 20, 3);
  SplitBundle half = split_user_based(tiny, 2, 0.5, 1);
  for (const auto& eu : half.validation.users) {
    CHECK(eu.fold_in.size() == 1);
    CHECK(eu.targets.size() == 2);
  }
}

TEST_CASE("users whose division would be degenerate are ineligible") {
  // Degree 1 gives fold_count 0; such users must never be held out.
  std::vector<std::tuple<std::string, std::string, std::int64_t>> rows;
  for (int u = 0; u < 6; ++u) {
    for (int k = 0; k < 6; ++k) {
      rows.emplace_back("big" + std::to_string(u), "i" + std::to_string((u + k) % 12), k);
    }
  }
  for (int u = 0; u < 6; ++u) {
    rows.emplace_back("small" + std::to_string(u), "i" + std::to_string(u), 0);
  }
  InteractionLog log = testutil::make_log(rows);
  SplitBundle bundle = split_user_based(log, 2, 0.8, 3);
  for (const auto& split : {bundle.validation, bundle.test}) {
    for (const EvalUser& eu : split.users) {
      CHECK(log.users.raw(eu.user).rfind("big", 0) == 0);
    }
  }
}

TEST_CASE("user-based split rejects impossible parameters") {
  InteractionLog log = testutil::make_grid_log(10, 30, 10);
  CHECK_THROWS_AS(split_user_based(log, 0, 0.8, 1), SplitError);
  CHECK_THROWS_AS(split_user_based(log, 5, 0.8, 1), SplitError);   // 2n == usercount
  CHECK_THROWS_AS(split_user_based(log, 6, 0.8, 1), SplitError);   // 2n > usercount
  CHECK_THROWS_AS(split_user_based(log, 2, 0.0, 1), SplitError);
  CHECK_THROWS_AS(split_user_based(log, 2, 1.0, 1), SplitError);

  // Enough users overall but not enough eligible ones.
  std::vector<std::tuple<std::string, std::string, std::int64_t>> rows;
  rows.emplace_back("rich", "a", 0);
  rows.emplace_back("rich", "b", 1);
  rows.emplace_back("rich", "c", 2);
  for (int u = 0; u < 9; ++u) rows.emplace_back("poor" + std::to_string(u), "a", 0);
  InteractionLog sparse = testutil::make_log(rows);
  CHECK_THROWS_AS(split_user_based(sparse, 2, 0.8, 1), SplitError);
}

TEST_CASE("temporal split partitions by wall clock with ties to the later side") {
  // Timeline 0..100: train < 60, validation 60..69, test >= 70.
  InteractionLog log = testutil::make_log({
      {"uA", "i0", 10}, {"uA", "i1", 20}, {"uA", "i2", 30},
      {"uA", "i3", 60},                    // boundary tie -> validation
      {"uA", "i4", 75},
      {"uB", "i5", 80},                    // no history at all -> dropped from test
      {"uC", "i0", 15}, {"uC", "i6", 70},  // boundary tie -> test
      {"uD", "i1", 62},                    // validation-only user -> dropped
      {"uE", "i2", 0},  {"uE", "i3", 100},
  });
  SplitBundle bundle = split_temporal(log, 30, 10);

  REQUIRE(bundle.boundaries.has_value());
  CHECK(bundle.boundaries->first == 60);
  CHECK(bundle.boundaries->second == 70);

  const std::uint32_t uA = log.users.dense("uA");
  const std::uint32_t uC = log.users.dense("uC");
  const std::uint32_t uE = log.users.dense("uE");

  // Validation keeps only uA (uD has no training history).
  REQUIRE(bundle.validation.users.size() == 1);
  const EvalUser& val_a = bundle.validation.users[0];
  CHECK(val_a.user == uA);
  CHECK(val_a.fold_in == std::vector<std::uint32_t>{log.items.dense("i0"), log.items.dense("i1"),
                                                    log.items.dense("i2")});
  CHECK(val_a.targets == std::vector<std::uint32_t>{log.items.dense("i3")});

  // Test keeps uA (fold-in = train + validation items), uC, uE; uB is gone.
  REQUIRE(bundle.test.users.size() == 3);
  std::set<std::uint32_t> test_users;
  for (const auto& eu : bundle.test.users) test_users.insert(eu.user);
  CHECK(test_users == std::set<std::uint32_t>{uA, uC, uE});

  for (const auto& eu : bundle.test.users) {
    if (eu.user == uA) {
      CHECK(eu.fold_in.size() == 4);  // three train items plus the validation item
      CHECK(std::binary_search(eu.fold_in.begin(), eu.fold_in.end(), log.items.dense("i3")));
      CHECK(eu.targets == std::vector<std::uint32_t>{log.items.dense("i4")});
    }
    if (eu.user == uC) {
      CHECK(eu.fold_in == std::vector<std::uint32_t>{log.items.dense("i0")});
      CHECK(eu.targets == std::vector<std::uint32_t>{log.items.dense("i6")});
    }
  }

  // The dropped user's events still live in the raw test partition.
  const std::uint32_t uB = log.users.dense("uB");
  bool ub_present = false;
  for (const Event& e : bundle.test_events) ub_present = ub_present || e.user == uB;
  CHECK(ub_present);

  // Train holds exactly the five pre-boundary events.
  CHECK(bundle.train.events.size() == 5);
  for (const Event& e : bundle.train.events) CHECK(e.ts < 60);
}

TEST_CASE("temporal split rejects bad windows and empty partitions") {
  InteractionLog log = testutil::make_log({
      {"u1", "i1", 0}, {"u1", "i2", 50}, {"u2", "i1", 100},
  });
  CHECK_THROWS_AS(split_temporal(log, 0, 10), SplitError);
  CHECK_THROWS_AS(split_temporal(log, 10, 0), SplitError);
  CHECK_THROWS_AS(split_temporal(log, 60, 40), SplitError);   // span == tw + vw
  CHECK_THROWS_AS(split_temporal(log, 90, 20), SplitError);   // span < tw + vw

  // Validation window that catches no events at all.
  InteractionLog gappy = testutil::make_log({
      {"u1", "i1", 0}, {"u1", "i2", 1}, {"u2", "i1", 2}, {"u2", "i3", 100},
  });
  CHECK_THROWS_AS(split_temporal(gappy, 10, 10), SplitError);
}

TEST_CASE("write_split and read_split round-trip both protocols") {
  testutil::TempDir dir;

  SUBCASE("user-based") {
    InteractionLog log = testutil::make_grid_log(30, 60, 10);
    SplitBundle bundle = split_user_based(log, 5, 0.8, 42);
    write_split(bundle, dir / "ub");
    SplitBundle loaded = read_split(dir / "ub");
    CHECK(loaded == bundle);
    CHECK(loaded.spec.n_heldout_users == 5);
    CHECK(loaded.spec.fold_in_fraction == doctest::Approx(0.8));
    CHECK(loaded.spec.seed == 42);
  }

  SUBCASE("temporal, including dropped-user partition events") {
    InteractionLog log = testutil::make_log({
        {"uA", "i0", 10}, {"uA", "i1", 20}, {"uA", "i2", 30},
        {"uA", "i3", 60}, {"uA", "i4", 75},
        {"uB", "i5", 80},
        {"uC", "i0", 15}, {"uC", "i6", 70},
        {"uD", "i1", 62},
        {"uE", "i2", 0},  {"uE", "i3", 100},
    });
    SplitBundle bundle = split_temporal(log, 30, 10);
    write_split(bundle, dir / "tmp");
    SplitBundle loaded = read_split(dir / "tmp");
    CHECK(loaded == bundle);
    CHECK(loaded.spec.test_window == 30);
    CHECK(loaded.spec.val_window == 10);
  }

  SUBCASE("expected files exist") {
    InteractionLog log = testutil::make_grid_log(20, 40, 8);
    write_split(split_user_based(log, 3, 0.75, 9), dir / "files");
    for (const char* name :
         {"train.tsv", "validation.tsv", "test.tsv", "users.tsv", "items.tsv", "split.json"}) {
      CHECK(std::filesystem::exists(dir / "files" / name));
    }
  }
}

TEST_CASE("read_split rejects missing or corrupt directories") {
  testutil::TempDir dir;
  CHECK_THROWS_AS(read_split(dir / "nope"), DataError);

  InteractionLog log = testutil::make_grid_log(20, 40, 8);
  write_split(split_user_based(log, 3, 0.75, 9), dir / "bad");
  testutil::write_file(dir / "bad" / "users.tsv", "0\tu0\n5\tu9\n");
  CHECK_THROWS_AS(read_split(dir / "bad"), ParseError);
}

TEST_CASE("split protocol names round-trip") {
  CHECK(to_string(SplitProtocol::user_based) == "user-based");
  CHECK(to_string(SplitProtocol::temporal) == "temporal");
  CHECK(parse_split_protocol("user-based") == SplitProtocol::user_based);
  CHECK(parse_split_protocol("user_based") == SplitProtocol::user_based);
  CHECK(parse_split_protocol("temporal") == SplitProtocol::temporal);
  CHECK_THROWS_AS(parse_split_protocol("bogus"), ConfigError);
}
