#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bpr/interaction_log.hpp"

namespace bpr {

// One evaluation user: the items visible at prediction time (fold-in) and
// the held-out items the ranking is scored against. Both sorted, disjoint.
struct EvalUser {
  std::uint32_t user = 0;
  std::vector<std::uint32_t> fold_in;
  std::vector<std::uint32_t> targets;

  friend bool operator==(const EvalUser&, const EvalUser&) = default;
};

struct EvalSplit {
  std::vector<EvalUser> users;  // sorted by user id

  friend bool operator==(const EvalSplit&, const EvalSplit&) = default;
};

enum class SplitProtocol { user_based, temporal };

std::string to_string(SplitProtocol p);
SplitProtocol parse_split_protocol(const std::string& name);

// Recipe that produced a bundle; kept so an inner search split can re-apply
// "the same process" to the training portion.
struct SplitSpec {
  SplitProtocol protocol = SplitProtocol::user_based;
  // user_based
  std::uint32_t n_heldout_users = 0;
  double fold_in_fraction = 0.8;
  std::uint64_t seed = 0;
  // temporal (seconds)
  std::int64_t test_window = 0;
  std::int64_t val_window = 0;
};

struct SplitBundle {
  InteractionLog train;
  EvalSplit validation;
  EvalSplit test;
  // Raw events behind the eval splits, in canonical order: held-out target
  // events under the user-based protocol, the full window partitions under
  // temporal. The EvalSplits are a pure function of these plus train.
  std::vector<Event> validation_events;
  std::vector<Event> test_events;
  SplitProtocol protocol = SplitProtocol::user_based;
  std::optional<std::pair<std::int64_t, std::int64_t>> boundaries;  // (val_start, test_start)
  SplitSpec spec;
};

// Holds out 2*n users (n validation, n test). A seeded fold_in_fraction of
// each held-out user's events goes to fold-in and is also kept in train so
// the model learns an embedding for the user; the rest become targets.
// Users whose fold-in or target side would round to empty are resampled.
SplitBundle split_user_based(const InteractionLog& log, std::uint32_t n_heldout_users,
                             double fold_in_fraction, std::uint64_t seed);

// Partitions events by wall clock: test_start = max_ts - test_window,
// val_start = test_start - val_window; a timestamp on a boundary belongs to
// the later partition. Validation users absent from train are dropped, test
// users absent from train+validation likewise. An eval user's fold-in is
// everything they did in earlier partitions.
SplitBundle split_temporal(const InteractionLog& log, std::int64_t test_window,
                           std::int64_t val_window);

// On-disk layout: train.tsv / validation.tsv / test.tsv hold the raw event
// partitions (dense ids), users.tsv / items.tsv the id maps, split.json the
// protocol, parameters, boundaries and counts. Eval-side retention and
// fold-in sets are a pure function of the partitions and are recomputed on
// read, so read(write(b)) == b.
void write_split(const SplitBundle& bundle, const std::filesystem::path& dir);
SplitBundle read_split(const std::filesystem::path& dir);

bool operator==(const SplitBundle& a, const SplitBundle& b);

}  // namespace bpr
