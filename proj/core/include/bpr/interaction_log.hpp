#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace bpr {

struct Event {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  std::int64_t ts = 0;  // seconds since epoch

  friend bool operator==(const Event&, const Event&) = default;
};

// Bijection raw id <-> dense index. Dense ids are assigned in order of first
// appearance, so ingestion is deterministic for a given file.
class IdMap {
public:
  std::uint32_t intern(const std::string& raw);
  const std::string& raw(std::uint32_t dense) const { return to_raw_[dense]; }
  std::uint32_t dense(const std::string& raw) const;  // throws IndexError if unknown
  bool contains(const std::string& raw) const { return to_dense_.count(raw) != 0; }
  std::uint32_t size() const { return static_cast<std::uint32_t>(to_raw_.size()); }

  friend bool operator==(const IdMap& a, const IdMap& b) { return a.to_raw_ == b.to_raw_; }

private:
  std::vector<std::string> to_raw_;
  std::unordered_map<std::string, std::uint32_t> to_dense_;
};

// Implicit-feedback event log after dense re-indexing. Each (user, item)
// pair appears at most once; events are kept sorted by (user, ts, item).
struct InteractionLog {
  std::vector<Event> events;
  std::uint32_t user_count = 0;
  std::uint32_t item_count = 0;
  IdMap users;
  IdMap items;

  // Slice of this user's events (events are user-contiguous).
  std::span<const Event> events_of(std::uint32_t user) const;
};

void canonicalize_events(std::vector<Event>& events);

enum class ColumnLayout {
  detect,  // by column count: 2 -> ui, 3 -> uit, 4 -> uirt
  ui,
  uir,
  uit,
  uirt,
};

struct LogFormat {
  char delimiter = '\t';
  ColumnLayout columns = ColumnLayout::detect;
  // When true, the first line is always skipped. When false, a first line
  // whose numeric fields do not parse is still treated as a header.
  bool skip_header = false;
};

ColumnLayout parse_column_layout(const std::string& name);

// Reads a delimiter-separated event log (gzip-transparent). Any rating
// column is discarded: the presence of a row is the positive signal.
// Duplicate (user, item) pairs collapse to the earliest timestamp. Rows
// without a timestamp column get their 0-based row index as timestamp.
InteractionLog ingest(const std::filesystem::path& path, const LogFormat& format = {});

// Keeps only users with >= min_user events and items with >= min_item
// events, iterated to a fixed point, then re-densifies indices.
InteractionLog filter_min_interactions(const InteractionLog& log, std::uint32_t min_user,
                                       std::uint32_t min_item);

struct StatsRecord {
  std::uint64_t users = 0;
  std::uint64_t items = 0;
  std::uint64_t actions = 0;
  double sparsity = 0;
  double median_user_actions = 0;
  double median_item_actions = 0;
};

StatsRecord dataset_stats(const InteractionLog& log);

// Keeps randomly chosen users until the running event count reaches
// target_events, then re-densifies. Used to cut a dataset down to a
// comparable interaction volume.
InteractionLog subsample_users_to_events(const InteractionLog& log, std::uint64_t target_events,
                                         std::uint64_t seed);

// CSR view of per-user item sets I+(u), plus per-item counts.
struct UserHistoryIndex {
  std::vector<std::uint32_t> offsets;      // user_count + 1
  std::vector<std::uint32_t> items;        // sorted within each user slice
  std::vector<std::uint32_t> item_counts;  // item_count entries
  std::uint32_t user_count = 0;
  std::uint32_t item_count = 0;
  std::uint64_t event_count = 0;

  static UserHistoryIndex build(const InteractionLog& log);

  std::span<const std::uint32_t> items_of(std::uint32_t user) const {
    return {items.data() + offsets[user], items.data() + offsets[user + 1]};
  }
  std::uint32_t degree(std::uint32_t user) const { return offsets[user + 1] - offsets[user]; }
  bool contains(std::uint32_t user, std::uint32_t item) const;
};

}  // namespace bpr
