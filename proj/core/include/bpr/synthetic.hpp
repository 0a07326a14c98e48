#pragma once

#include <cstdint>

#include "bpr/interaction_log.hpp"

namespace bpr {

// Implicit-feedback log with planted structure: items carry a Zipf popularity
// skew (so ItemPop is a meaningful baseline) and users mostly interact inside
// one of `groups` item blocks (so a factor model has signal to learn).
struct SyntheticSpec {
  std::uint32_t users = 943;
  std::uint32_t items = 1682;
  std::uint32_t min_degree = 20;
  std::uint32_t max_degree = 190;
  std::uint32_t groups = 8;
  double within_group = 0.8;
  double zipf_exponent = 1.0;
  std::int64_t max_timestamp = 1000000;
  std::uint64_t seed = 1;
};

InteractionLog synthesize_log(const SyntheticSpec& spec);

}  // namespace bpr
