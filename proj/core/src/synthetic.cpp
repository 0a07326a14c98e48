#include "bpr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "bpr/errors.hpp"
#include "bpr/rng.hpp"

namespace bpr {

namespace {

// Weighted draw from weights[lo, hi) by a cumulative scan over the range.
std::uint32_t draw_in_range(const std::vector<double>& cumulative, std::uint32_t lo,
                            std::uint32_t hi, Rng& rng) {
  const double base = lo ? cumulative[lo - 1] : 0.0;
  const double mass = cumulative[hi - 1] - base;
  std::uniform_real_distribution<double> unit(0.0, mass);
  const double cut = base + unit(rng);
  const auto it = std::upper_bound(cumulative.begin() + lo, cumulative.begin() + hi, cut);
  return std::min<std::uint32_t>(static_cast<std::uint32_t>(it - cumulative.begin()), hi - 1);
}

}  // namespace

InteractionLog synthesize_log(const SyntheticSpec& spec) {
  if (spec.users == 0 || spec.items == 0) throw ConfigError("synthetic log needs users and items");
  if (spec.groups == 0 || spec.groups > spec.items) {
    throw ConfigError("synthetic groups must be in [1, items]");
  }
  if (spec.min_degree == 0 || spec.min_degree > spec.max_degree) {
    throw ConfigError("synthetic degree range is empty");
  }
  if (!(spec.within_group >= 0.0 && spec.within_group <= 1.0)) {
    throw ConfigError("within_group must be in [0, 1]");
  }

  Rng rng(spec.seed);

  // Popularity ranks are a random permutation so popularity and group
  // membership stay independent.
  std::vector<std::uint32_t> rank(spec.items);
  std::iota(rank.begin(), rank.end(), 0u);
  std::shuffle(rank.begin(), rank.end(), rng);
  std::vector<double> cumulative(spec.items);
  double running = 0;
  for (std::uint32_t i = 0; i < spec.items; ++i) {
    running += 1.0 / std::pow(double(rank[i]) + 1.0, spec.zipf_exponent);
    cumulative[i] = running;
  }

  auto group_bounds = [&](std::uint32_t g) {
    const std::uint32_t lo =
        static_cast<std::uint32_t>(std::uint64_t(g) * spec.items / spec.groups);
    const std::uint32_t hi =
        static_cast<std::uint32_t>(std::uint64_t(g + 1) * spec.items / spec.groups);
    return std::pair{lo, std::max(hi, lo + 1)};
  };

  InteractionLog log;
  std::uniform_int_distribution<std::uint32_t> degree_dist(spec.min_degree, spec.max_degree);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::int64_t> ts_dist(0, spec.max_timestamp);

  std::unordered_set<std::uint64_t> seen;
  for (std::uint32_t u = 0; u < spec.users; ++u) {
    const std::uint32_t dense_u = log.users.intern("u" + std::to_string(u));
    const auto [glo, ghi] = group_bounds(u % spec.groups);
    const std::uint32_t degree = degree_dist(rng);

    std::uint32_t made = 0;
    std::uint64_t attempts = 0;
    const std::uint64_t attempt_cap = std::uint64_t(degree) * 200 + 1000;
    while (made < degree && attempts < attempt_cap) {
      ++attempts;
      const bool inside = unit(rng) < spec.within_group;
      const std::uint32_t item = inside ? draw_in_range(cumulative, glo, ghi, rng)
                                        : draw_in_range(cumulative, 0, spec.items, rng);
      const std::uint64_t key = (std::uint64_t(dense_u) << 32) | item;
      if (!seen.insert(key).second) continue;
      const std::uint32_t dense_i = log.items.intern("i" + std::to_string(item));
      log.events.push_back({dense_u, dense_i, ts_dist(rng)});
      ++made;
    }
  }

  // Dense ids were interned in first-appearance order; intern the remainder
  // so item_count matches the spec even when some items were never drawn.
  for (std::uint32_t i = 0; i < spec.items; ++i) log.items.intern("i" + std::to_string(i));
  log.user_count = log.users.size();
  log.item_count = log.items.size();
  canonicalize_events(log.events);
  return log;
}

}  // namespace bpr
