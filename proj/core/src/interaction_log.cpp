#include "bpr/interaction_log.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <random>

#include "bpr/errors.hpp"
#include "bpr/rng.hpp"

namespace bpr {

std::uint32_t IdMap::intern(const std::string& raw) {
  auto it = to_dense_.find(raw);
  if (it != to_dense_.end()) return it->second;
  auto id = static_cast<std::uint32_t>(to_raw_.size());
  to_raw_.push_back(raw);
  to_dense_.emplace(raw, id);
  return id;
}

std::uint32_t IdMap::dense(const std::string& raw) const {
  auto it = to_dense_.find(raw);
  if (it == to_dense_.end()) throw IndexError("unknown raw id: " + raw);
  return it->second;
}

std::span<const Event> InteractionLog::events_of(std::uint32_t user) const {
  auto lo = std::lower_bound(events.begin(), events.end(), user,
                             [](const Event& e, std::uint32_t u) { return e.user < u; });
  auto hi = std::upper_bound(events.begin(), events.end(), user,
                             [](std::uint32_t u, const Event& e) { return u < e.user; });
  return {events.data() + (lo - events.begin()), events.data() + (hi - events.begin())};
}

void canonicalize_events(std::vector<Event>& events) {
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.user != b.user) return a.user < b.user;
    if (a.ts != b.ts) return a.ts < b.ts;
    return a.item < b.item;
  });
}

namespace {

// Line reader over zlib's gzFile, which passes uncompressed files through.
class GzLineReader {
public:
  explicit GzLineReader(const std::filesystem::path& path) {
    file_ = gzopen(path.string().c_str(), "rb");
    if (file_ == nullptr) throw DataError("cannot open " + path.string());
  }
  ~GzLineReader() {
    if (file_ != nullptr) gzclose(file_);
  }
  GzLineReader(const GzLineReader&) = delete;
  GzLineReader& operator=(const GzLineReader&) = delete;

  bool next(std::string& line) {
    line.clear();
    char buf[1 << 14];
    while (true) {
      if (gzgets(file_, buf, sizeof(buf)) == nullptr) return !line.empty();
      line += buf;
      if (!line.empty() && line.back() == '\n') {
        line.pop_back();
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
      }
    }
  }

private:
  gzFile file_ = nullptr;
};

struct RawRow {
  std::string user;
  std::string item;
  std::int64_t ts = 0;
  bool has_ts = false;
};

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

bool parse_i64(std::string_view s, std::int64_t& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_f64(std::string_view s, double& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

ColumnLayout layout_for(std::size_t n_cols, const std::filesystem::path& path, std::size_t line_no) {
  switch (n_cols) {
    case 2: return ColumnLayout::ui;
    case 3: return ColumnLayout::uit;
    case 4: return ColumnLayout::uirt;
    default:
      throw ParseError(path.string(), line_no,
                       "cannot infer column layout from " + std::to_string(n_cols) + " columns");
  }
}

// Returns false when the row does not match the layout (reason filled in).
bool parse_row(const std::vector<std::string_view>& fields, ColumnLayout layout, RawRow& row,
               std::string& reason) {
  std::size_t expected = 0;
  switch (layout) {
    case ColumnLayout::ui: expected = 2; break;
    case ColumnLayout::uir:
    case ColumnLayout::uit: expected = 3; break;
    case ColumnLayout::uirt: expected = 4; break;
    case ColumnLayout::detect: expected = fields.size(); break;
  }
  if (fields.size() != expected) {
    reason = "expected " + std::to_string(expected) + " columns, got " +
             std::to_string(fields.size());
    return false;
  }
  if (fields[0].empty() || fields[1].empty()) {
    reason = "empty user or item id";
    return false;
  }
  row.user = std::string(fields[0]);
  row.item = std::string(fields[1]);
  row.has_ts = false;
  double rating = 0;
  std::int64_t ts = 0;
  switch (layout) {
    case ColumnLayout::ui:
      break;
    case ColumnLayout::uir:
      if (!parse_f64(fields[2], rating)) {
        reason = "rating field does not parse: '" + std::string(fields[2]) + "'";
        return false;
      }
      break;
    case ColumnLayout::uit:
      if (!parse_i64(fields[2], ts)) {
        reason = "timestamp field does not parse: '" + std::string(fields[2]) + "'";
        return false;
      }
      row.ts = ts;
      row.has_ts = true;
      break;
    case ColumnLayout::uirt:
      if (!parse_f64(fields[2], rating)) {
        reason = "rating field does not parse: '" + std::string(fields[2]) + "'";
        return false;
      }
      if (!parse_i64(fields[3], ts)) {
        reason = "timestamp field does not parse: '" + std::string(fields[3]) + "'";
        return false;
      }
      row.ts = ts;
      row.has_ts = true;
      break;
    case ColumnLayout::detect:
      reason = "layout not resolved";
      return false;
  }
  return true;
}

}  // namespace

ColumnLayout parse_column_layout(const std::string& name) {
  if (name == "detect" || name == "auto" || name.empty()) return ColumnLayout::detect;
  if (name == "ui") return ColumnLayout::ui;
  if (name == "uir") return ColumnLayout::uir;
  if (name == "uit") return ColumnLayout::uit;
  if (name == "uirt") return ColumnLayout::uirt;
  throw ConfigError("unknown column layout '" + name + "' (expected auto|ui|uir|uit|uirt)");
}

InteractionLog ingest(const std::filesystem::path& path, const LogFormat& format) {
  GzLineReader reader(path);
  InteractionLog log;
  ColumnLayout layout = format.columns;

  // (user, item) -> position in log.events, for duplicate collapsing.
  std::unordered_map<std::uint64_t, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  std::int64_t row_index = 0;  // timestamp stand-in when the file has none
  while (reader.next(line)) {
    ++line_no;
    if (line.empty()) continue;
    if (format.skip_header && line_no == 1) continue;
    auto fields = split_fields(line, format.delimiter);
    if (layout == ColumnLayout::detect) layout = layout_for(fields.size(), path, line_no);

    RawRow row;
    std::string reason;
    if (!parse_row(fields, layout, row, reason)) {
      // A malformed first line is taken as a header; anything later is an error.
      if (line_no == 1 && !format.skip_header) continue;
      throw ParseError(path.string(), line_no, reason);
    }
    std::uint32_t u = log.users.intern(row.user);
    std::uint32_t i = log.items.intern(row.item);
    std::int64_t ts = row.has_ts ? row.ts : row_index;
    ++row_index;

    std::uint64_t key = (static_cast<std::uint64_t>(u) << 32) | i;
    auto [it, inserted] = seen.emplace(key, log.events.size());
    if (inserted) {
      log.events.push_back({u, i, ts});
    } else if (ts < log.events[it->second].ts) {
      log.events[it->second].ts = ts;
    }
  }
  if (log.events.empty()) throw EmptyDatasetError("no events in " + path.string());
  log.user_count = log.users.size();
  log.item_count = log.items.size();
  canonicalize_events(log.events);
  return log;
}

InteractionLog filter_min_interactions(const InteractionLog& log, std::uint32_t min_user,
                                       std::uint32_t min_item) {
  if (min_user < 1 || min_item < 1) throw ConfigError("min interaction thresholds must be >= 1");

  std::vector<Event> kept = log.events;
  while (true) {
    std::vector<std::uint32_t> user_deg(log.user_count, 0), item_deg(log.item_count, 0);
    for (const Event& e : kept) {
      ++user_deg[e.user];
      ++item_deg[e.item];
    }
    auto violates = [&](const Event& e) {
      return user_deg[e.user] < min_user || item_deg[e.item] < min_item;
    };
    if (std::none_of(kept.begin(), kept.end(), violates)) break;
    std::erase_if(kept, violates);
    if (kept.empty()) throw EmptyDatasetError("min-interaction filter removed every event");
  }

  // Re-densify in the surviving events' order.
  InteractionLog out;
  out.events.reserve(kept.size());
  for (const Event& e : kept) {
    std::uint32_t u = out.users.intern(log.users.raw(e.user));
    std::uint32_t i = out.items.intern(log.items.raw(e.item));
    out.events.push_back({u, i, e.ts});
  }
  out.user_count = out.users.size();
  out.item_count = out.items.size();
  canonicalize_events(out.events);
  return out;
}

namespace {

double median_of_counts(std::vector<std::uint32_t> counts) {
  std::erase(counts, 0u);
  if (counts.empty()) return 0;
  std::sort(counts.begin(), counts.end());
  std::size_t n = counts.size();
  if (n % 2 == 1) return counts[n / 2];
  return (static_cast<double>(counts[n / 2 - 1]) + counts[n / 2]) / 2.0;
}

}  // namespace

StatsRecord dataset_stats(const InteractionLog& log) {
  if (log.events.empty()) throw EmptyDatasetError("stats over empty log");
  std::vector<std::uint32_t> user_deg(log.user_count, 0), item_deg(log.item_count, 0);
  for (const Event& e : log.events) {
    ++user_deg[e.user];
    ++item_deg[e.item];
  }
  StatsRecord s;
  s.users = std::count_if(user_deg.begin(), user_deg.end(), [](auto d) { return d > 0; });
  s.items = std::count_if(item_deg.begin(), item_deg.end(), [](auto d) { return d > 0; });
  s.actions = log.events.size();
  s.sparsity = 1.0 - static_cast<double>(s.actions) / (static_cast<double>(s.users) * s.items);
  s.median_user_actions = median_of_counts(user_deg);
  s.median_item_actions = median_of_counts(item_deg);
  return s;
}

InteractionLog subsample_users_to_events(const InteractionLog& log, std::uint64_t target_events,
                                         std::uint64_t seed) {
  if (target_events == 0) throw ConfigError("target_events must be positive");
  std::vector<std::uint32_t> order(log.user_count);
  for (std::uint32_t u = 0; u < log.user_count; ++u) order[u] = u;
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<bool> keep(log.user_count, false);
  std::uint64_t total = 0;
  for (std::uint32_t u : order) {
    if (total >= target_events) break;
    keep[u] = true;
    total += log.events_of(u).size();
  }

  InteractionLog out;
  for (const Event& e : log.events) {
    if (!keep[e.user]) continue;
    std::uint32_t u = out.users.intern(log.users.raw(e.user));
    std::uint32_t i = out.items.intern(log.items.raw(e.item));
    out.events.push_back({u, i, e.ts});
  }
  if (out.events.empty()) throw EmptyDatasetError("subsample produced no events");
  out.user_count = out.users.size();
  out.item_count = out.items.size();
  canonicalize_events(out.events);
  return out;
}

UserHistoryIndex UserHistoryIndex::build(const InteractionLog& log) {
  UserHistoryIndex idx;
  idx.user_count = log.user_count;
  idx.item_count = log.item_count;
  idx.event_count = log.events.size();
  idx.offsets.assign(log.user_count + 1, 0);
  idx.item_counts.assign(log.item_count, 0);
  for (const Event& e : log.events) {
    ++idx.offsets[e.user + 1];
    ++idx.item_counts[e.item];
  }
  for (std::uint32_t u = 0; u < log.user_count; ++u) idx.offsets[u + 1] += idx.offsets[u];
  idx.items.resize(log.events.size());
  std::vector<std::uint32_t> cursor(idx.offsets.begin(), idx.offsets.end() - 1);
  for (const Event& e : log.events) idx.items[cursor[e.user]++] = e.item;
  for (std::uint32_t u = 0; u < log.user_count; ++u) {
    std::sort(idx.items.begin() + idx.offsets[u], idx.items.begin() + idx.offsets[u + 1]);
  }
  return idx;
}

bool UserHistoryIndex::contains(std::uint32_t user, std::uint32_t item) const {
  auto s = items_of(user);
  return std::binary_search(s.begin(), s.end(), item);
}

}  // namespace bpr
