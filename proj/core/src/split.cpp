#include "bpr/split.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "bpr/errors.hpp"
#include "bpr/rng.hpp"

namespace bpr {

using nlohmann::json;

std::string to_string(SplitProtocol p) {
  return p == SplitProtocol::user_based ? "user-based" : "temporal";
}

SplitProtocol parse_split_protocol(const std::string& name) {
  if (name == "user-based" || name == "user_based" || name == "user") {
    return SplitProtocol::user_based;
  }
  if (name == "temporal" || name == "time") return SplitProtocol::temporal;
  throw ConfigError("unknown split protocol '" + name + "' (expected user-based|temporal)");
}

namespace {

std::vector<std::uint32_t> sorted_items(const std::vector<Event>& events) {
  std::vector<std::uint32_t> out;
  out.reserve(events.size());
  for (const Event& e : events) out.push_back(e.item);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

SplitBundle split_user_based(const InteractionLog& log, std::uint32_t n_heldout_users,
                             double fold_in_fraction, std::uint64_t seed) {
  if (n_heldout_users == 0) throw SplitError("n_heldout_users must be positive");
  if (2ull * n_heldout_users >= log.user_count) {
    throw SplitError("cannot hold out 2*" + std::to_string(n_heldout_users) + " of " +
                     std::to_string(log.user_count) + " users");
  }
  if (!(fold_in_fraction > 0.0 && fold_in_fraction < 1.0)) {
    throw SplitError("fold_in_fraction must be in (0, 1)");
  }

  auto fold_count = [&](std::size_t degree) {
    return static_cast<std::size_t>(std::floor(fold_in_fraction * degree + 1e-9));
  };
  auto eligible = [&](std::uint32_t u) {
    std::size_t d = log.events_of(u).size();
    std::size_t k = fold_count(d);
    return k >= 1 && k < d;  // nonempty fold-in and nonempty targets
  };

  Rng rng(seed);
  std::vector<std::uint32_t> order(log.user_count);
  for (std::uint32_t u = 0; u < log.user_count; ++u) order[u] = u;
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::uint32_t> heldout;
  heldout.reserve(2ull * n_heldout_users);
  for (std::uint32_t u : order) {
    if (heldout.size() == 2ull * n_heldout_users) break;
    if (eligible(u)) heldout.push_back(u);
  }
  if (heldout.size() < 2ull * n_heldout_users) {
    throw SplitError("not enough users with a non-degenerate fold-in/target division");
  }

  std::vector<bool> is_heldout(log.user_count, false);
  for (std::uint32_t u : heldout) is_heldout[u] = true;

  SplitBundle bundle;
  bundle.protocol = SplitProtocol::user_based;
  bundle.spec = {SplitProtocol::user_based, n_heldout_users, fold_in_fraction, seed, 0, 0};
  bundle.train.users = log.users;
  bundle.train.items = log.items;
  bundle.train.user_count = log.user_count;
  bundle.train.item_count = log.item_count;

  for (const Event& e : log.events) {
    if (!is_heldout[e.user]) bundle.train.events.push_back(e);
  }

  auto carve = [&](std::uint32_t u, std::vector<Event>& partition) {
    auto span = log.events_of(u);
    std::vector<Event> ev(span.begin(), span.end());
    std::shuffle(ev.begin(), ev.end(), rng);
    std::size_t k = fold_count(ev.size());
    EvalUser eu;
    eu.user = u;
    for (std::size_t n = 0; n < ev.size(); ++n) {
      if (n < k) {
        eu.fold_in.push_back(ev[n].item);
        bundle.train.events.push_back(ev[n]);  // fold-in is visible to training
      } else {
        eu.targets.push_back(ev[n].item);
        partition.push_back(ev[n]);
      }
    }
    std::sort(eu.fold_in.begin(), eu.fold_in.end());
    std::sort(eu.targets.begin(), eu.targets.end());
    return eu;
  };

  for (std::size_t n = 0; n < heldout.size(); ++n) {
    const bool to_val = n < n_heldout_users;
    EvalUser eu = carve(heldout[n], to_val ? bundle.validation_events : bundle.test_events);
    (to_val ? bundle.validation : bundle.test).users.push_back(std::move(eu));
  }
  auto by_user = [](const EvalUser& a, const EvalUser& b) { return a.user < b.user; };
  std::sort(bundle.validation.users.begin(), bundle.validation.users.end(), by_user);
  std::sort(bundle.test.users.begin(), bundle.test.users.end(), by_user);
  canonicalize_events(bundle.train.events);
  canonicalize_events(bundle.validation_events);
  canonicalize_events(bundle.test_events);
  return bundle;
}

SplitBundle split_temporal(const InteractionLog& log, std::int64_t test_window,
                           std::int64_t val_window) {
  if (test_window <= 0 || val_window <= 0) throw SplitError("split windows must be positive");
  std::int64_t min_ts = std::numeric_limits<std::int64_t>::max();
  std::int64_t max_ts = std::numeric_limits<std::int64_t>::min();
  for (const Event& e : log.events) {
    min_ts = std::min(min_ts, e.ts);
    max_ts = std::max(max_ts, e.ts);
  }
  if (max_ts - min_ts <= test_window + val_window) {
    throw SplitError("timestamp span does not exceed test_window + val_window");
  }
  const std::int64_t test_start = max_ts - test_window;
  const std::int64_t val_start = test_start - val_window;

  SplitBundle bundle;
  bundle.protocol = SplitProtocol::temporal;
  bundle.boundaries = {{val_start, test_start}};
  bundle.spec = {SplitProtocol::temporal, 0, 0.0, 0, test_window, val_window};
  bundle.train.users = log.users;
  bundle.train.items = log.items;
  bundle.train.user_count = log.user_count;
  bundle.train.item_count = log.item_count;

  std::vector<std::vector<Event>> val_part(log.user_count), test_part(log.user_count);
  for (const Event& e : log.events) {
    if (e.ts < val_start) {
      bundle.train.events.push_back(e);
    } else if (e.ts < test_start) {
      val_part[e.user].push_back(e);
      bundle.validation_events.push_back(e);
    } else {
      test_part[e.user].push_back(e);
      bundle.test_events.push_back(e);
    }
  }
  if (bundle.train.events.empty()) throw SplitError("temporal split left the training part empty");

  std::vector<std::vector<std::uint32_t>> train_items(log.user_count);
  for (const Event& e : bundle.train.events) train_items[e.user].push_back(e.item);
  for (auto& v : train_items) std::sort(v.begin(), v.end());

  bool any_val_event = false, any_test_event = false;
  for (std::uint32_t u = 0; u < log.user_count; ++u) {
    any_val_event = any_val_event || !val_part[u].empty();
    any_test_event = any_test_event || !test_part[u].empty();

    if (!val_part[u].empty() && !train_items[u].empty()) {
      EvalUser eu;
      eu.user = u;
      eu.fold_in = train_items[u];
      eu.targets = sorted_items(val_part[u]);
      bundle.validation.users.push_back(std::move(eu));
    }
    if (!test_part[u].empty() && (!train_items[u].empty() || !val_part[u].empty())) {
      EvalUser eu;
      eu.user = u;
      eu.fold_in = train_items[u];
      for (const Event& e : val_part[u]) eu.fold_in.push_back(e.item);
      std::sort(eu.fold_in.begin(), eu.fold_in.end());
      eu.targets = sorted_items(test_part[u]);
      bundle.test.users.push_back(std::move(eu));
    }
  }
  if (!any_val_event || !any_test_event) {
    throw SplitError("temporal split produced an empty evaluation partition");
  }
  if (bundle.validation.users.empty() || bundle.test.users.empty()) {
    throw SplitError("no evaluation users survive the training-presence filter");
  }
  canonicalize_events(bundle.train.events);
  canonicalize_events(bundle.validation_events);
  canonicalize_events(bundle.test_events);
  return bundle;
}

namespace {

void write_events(const std::filesystem::path& path, const std::vector<Event>& events) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const Event& e : events) out << e.user << '\t' << e.item << '\t' << e.ts << '\n';
}

std::vector<Event> read_events(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<Event> events;
  Event e;
  while (in >> e.user >> e.item >> e.ts) events.push_back(e);
  return events;
}

void write_id_map(const std::filesystem::path& path, const IdMap& map) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::uint32_t d = 0; d < map.size(); ++d) out << d << '\t' << map.raw(d) << '\n';
}

IdMap read_id_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  IdMap map;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path.string(), line_no, "expected dense\\traw");
    std::uint32_t dense = map.intern(line.substr(tab + 1));
    if (dense != std::stoul(line.substr(0, tab))) {
      throw ParseError(path.string(), line_no, "id map is not in dense order");
    }
  }
  return map;
}

// Eval events grouped per user, in user order.
std::vector<std::pair<std::uint32_t, std::vector<Event>>> group_by_user(std::vector<Event> events) {
  canonicalize_events(events);
  std::vector<std::pair<std::uint32_t, std::vector<Event>>> out;
  for (const Event& e : events) {
    if (out.empty() || out.back().first != e.user) out.push_back({e.user, {}});
    out.back().second.push_back(e);
  }
  return out;
}

}  // namespace

void write_split(const SplitBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_events(dir / "train.tsv", bundle.train.events);
  write_events(dir / "validation.tsv", bundle.validation_events);
  write_events(dir / "test.tsv", bundle.test_events);

  json sidecar;
  sidecar["format_version"] = 1;
  sidecar["protocol"] = to_string(bundle.protocol);
  sidecar["user_count"] = bundle.train.user_count;
  sidecar["item_count"] = bundle.train.item_count;
  sidecar["counts"] = {{"train", bundle.train.events.size()},
                       {"validation_users", bundle.validation.users.size()},
                       {"test_users", bundle.test.users.size()}};
  if (bundle.boundaries) {
    sidecar["boundaries"] = {{"val_start", bundle.boundaries->first},
                             {"test_start", bundle.boundaries->second}};
  }
  if (bundle.protocol == SplitProtocol::user_based) {
    sidecar["params"] = {{"n_heldout_users", bundle.spec.n_heldout_users},
                         {"fold_in_fraction", bundle.spec.fold_in_fraction},
                         {"seed", bundle.spec.seed}};
  } else {
    sidecar["params"] = {{"test_window", bundle.spec.test_window},
                         {"val_window", bundle.spec.val_window}};
  }

  std::ofstream out(dir / "split.json");
  out << sidecar.dump(2) << '\n';
  write_id_map(dir / "users.tsv", bundle.train.users);
  write_id_map(dir / "items.tsv", bundle.train.items);
}

SplitBundle read_split(const std::filesystem::path& dir) {
  std::ifstream in(dir / "split.json");
  if (!in) throw DataError("cannot read " + (dir / "split.json").string());
  json sidecar = json::parse(in);

  SplitBundle bundle;
  bundle.protocol = parse_split_protocol(sidecar.at("protocol").get<std::string>());
  bundle.train.user_count = sidecar.at("user_count").get<std::uint32_t>();
  bundle.train.item_count = sidecar.at("item_count").get<std::uint32_t>();
  bundle.train.users = read_id_map(dir / "users.tsv");
  bundle.train.items = read_id_map(dir / "items.tsv");
  bundle.train.events = read_events(dir / "train.tsv");
  canonicalize_events(bundle.train.events);

  bundle.spec.protocol = bundle.protocol;
  if (bundle.protocol == SplitProtocol::user_based) {
    const auto& p = sidecar.at("params");
    bundle.spec.n_heldout_users = p.at("n_heldout_users").get<std::uint32_t>();
    bundle.spec.fold_in_fraction = p.at("fold_in_fraction").get<double>();
    bundle.spec.seed = p.at("seed").get<std::uint64_t>();
  } else {
    const auto& p = sidecar.at("params");
    bundle.spec.test_window = p.at("test_window").get<std::int64_t>();
    bundle.spec.val_window = p.at("val_window").get<std::int64_t>();
    bundle.boundaries = {{sidecar.at("boundaries").at("val_start").get<std::int64_t>(),
                          sidecar.at("boundaries").at("test_start").get<std::int64_t>()}};
  }

  std::vector<std::vector<std::uint32_t>> train_items(bundle.train.user_count);
  for (const Event& e : bundle.train.events) train_items[e.user].push_back(e.item);
  for (auto& v : train_items) std::sort(v.begin(), v.end());

  bundle.validation_events = read_events(dir / "validation.tsv");
  bundle.test_events = read_events(dir / "test.tsv");
  canonicalize_events(bundle.validation_events);
  canonicalize_events(bundle.test_events);
  auto val_groups = group_by_user(bundle.validation_events);
  auto test_groups = group_by_user(bundle.test_events);

  if (bundle.protocol == SplitProtocol::user_based) {
    auto rebuild = [&](const auto& groups, EvalSplit& split) {
      for (const auto& [user, events] : groups) {
        EvalUser eu;
        eu.user = user;
        eu.fold_in = train_items[user];
        eu.targets = sorted_items(events);
        split.users.push_back(std::move(eu));
      }
    };
    rebuild(val_groups, bundle.validation);
    rebuild(test_groups, bundle.test);
  } else {
    std::vector<std::vector<std::uint32_t>> val_items(bundle.train.user_count);
    for (const auto& [user, events] : val_groups) val_items[user] = sorted_items(events);
    for (const auto& [user, events] : val_groups) {
      if (train_items[user].empty()) continue;
      EvalUser eu;
      eu.user = user;
      eu.fold_in = train_items[user];
      eu.targets = sorted_items(events);
      bundle.validation.users.push_back(std::move(eu));
    }
    for (const auto& [user, events] : test_groups) {
      if (train_items[user].empty() && val_items[user].empty()) continue;
      EvalUser eu;
      eu.user = user;
      eu.fold_in = train_items[user];
      eu.fold_in.insert(eu.fold_in.end(), val_items[user].begin(), val_items[user].end());
      std::sort(eu.fold_in.begin(), eu.fold_in.end());
      eu.targets = sorted_items(events);
      bundle.test.users.push_back(std::move(eu));
    }
  }
  return bundle;
}

bool operator==(const SplitBundle& a, const SplitBundle& b) {
  return a.train.events == b.train.events && a.train.users == b.train.users &&
         a.train.items == b.train.items && a.train.user_count == b.train.user_count &&
         a.train.item_count == b.train.item_count && a.validation == b.validation &&
         a.test == b.test && a.validation_events == b.validation_events &&
         a.test_events == b.test_events && a.protocol == b.protocol &&
         a.boundaries == b.boundaries;
}

}  // namespace bpr
