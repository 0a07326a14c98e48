#include "bpr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "bpr/errors.hpp"

namespace bpr {

namespace {

bool sorted_contains(const std::vector<std::uint32_t>& sorted, std::uint32_t x) {
  return std::binary_search(sorted.begin(), sorted.end(), x);
}

}  // namespace

std::vector<std::uint32_t> rank_topn(const std::vector<double>& scores,
                                     const std::vector<std::uint32_t>& exclude_sorted,
                                     std::size_t n) {
  if (n == 0) throw ConfigError("rank_topn needs n >= 1");
  std::vector<std::uint32_t> candidates;
  candidates.reserve(scores.size());
  for (std::uint32_t i = 0; i < scores.size(); ++i) {
    if (!sorted_contains(exclude_sorted, i)) candidates.push_back(i);
  }
  const std::size_t top = std::min(n, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + top, candidates.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
                    });
  candidates.resize(top);
  return candidates;
}

double ndcg_at_k(const std::vector<std::uint32_t>& ranked,
                 const std::vector<std::uint32_t>& targets_sorted, std::size_t k) {
  double dcg = 0;
  const std::size_t depth = std::min(k, ranked.size());
  for (std::size_t pos = 0; pos < depth; ++pos) {
    if (sorted_contains(targets_sorted, ranked[pos])) {
      dcg += 1.0 / std::log2(double(pos) + 2.0);
    }
  }
  double idcg = 0;
  const std::size_t ideal = std::min(k, targets_sorted.size());
  for (std::size_t pos = 0; pos < ideal; ++pos) idcg += 1.0 / std::log2(double(pos) + 2.0);
  return idcg > 0 ? dcg / idcg : 0.0;
}

double recall_at_k(const std::vector<std::uint32_t>& ranked,
                   const std::vector<std::uint32_t>& targets_sorted, std::size_t k) {
  std::size_t hits = 0;
  const std::size_t depth = std::min(k, ranked.size());
  for (std::size_t pos = 0; pos < depth; ++pos) {
    if (sorted_contains(targets_sorted, ranked[pos])) ++hits;
  }
  const std::size_t denom = std::min(k, targets_sorted.size());
  return denom ? double(hits) / double(denom) : 0.0;
}

double auc_from_scores(const std::vector<double>& scores,
                       const std::vector<std::uint32_t>& targets_sorted,
                       const std::vector<std::uint32_t>& excluded_sorted) {
  std::vector<double> negative_scores;
  negative_scores.reserve(scores.size());
  for (std::uint32_t i = 0; i < scores.size(); ++i) {
    if (!sorted_contains(targets_sorted, i) && !sorted_contains(excluded_sorted, i)) {
      negative_scores.push_back(scores[i]);
    }
  }
  if (negative_scores.empty() || targets_sorted.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  std::sort(negative_scores.begin(), negative_scores.end());

  double won = 0;
  for (std::uint32_t t : targets_sorted) {
    const double s = scores[t];
    const auto lo = std::lower_bound(negative_scores.begin(), negative_scores.end(), s);
    const auto hi = std::upper_bound(lo, negative_scores.end(), s);
    won += double(lo - negative_scores.begin()) + 0.5 * double(hi - lo);
  }
  return won / (double(targets_sorted.size()) * double(negative_scores.size()));
}

ItemPopModel fit_itempop(const InteractionLog& train) {
  if (train.events.empty()) throw DataError("cannot fit ItemPop on an empty log");
  ItemPopModel model;
  model.popularity.assign(train.item_count, 0.0);
  for (const Event& e : train.events) model.popularity[e.item] += 1.0;
  return model;
}

void EaseModel::score_user(const EvalUser& user, std::vector<double>& out) const {
  out.assign(items, 0.0);
  for (std::uint32_t i : user.fold_in) {
    const double* row = B.data() + static_cast<std::size_t>(i) * items;
    for (std::uint32_t j = 0; j < items; ++j) out[j] += row[j];
  }
}

double mean_ignoring_nan(const std::vector<double>& values) {
  double sum = 0;
  std::size_t n = 0;
  for (double v : values) {
    if (!std::isnan(v)) {
      sum += v;
      ++n;
    }
  }
  return n ? sum / double(n) : std::numeric_limits<double>::quiet_NaN();
}

MetricsReport evaluate_split(const Scorer& scorer, const EvalSplit& split, const EvalConfig& cfg) {
  MetricsReport report;
  report.k_list = cfg.k_list;
  report.users.reserve(split.users.size());
  for (const EvalUser& eu : split.users) report.users.push_back(eu.user);

  std::vector<std::string> metric_names;
  for (std::size_t k : cfg.k_list) {
    metric_names.push_back("ndcg@" + std::to_string(k));
    metric_names.push_back("recall@" + std::to_string(k));
  }
  if (cfg.with_auc) metric_names.push_back("auc");
  for (const std::string& name : metric_names) {
    report.per_user[name].assign(split.users.size(), 0.0);
  }

  std::size_t max_k = 1;
  for (std::size_t k : cfg.k_list) max_k = std::max(max_k, k);

  std::vector<double*> ndcg_out, recall_out;
  for (std::size_t k : cfg.k_list) {
    ndcg_out.push_back(report.per_user["ndcg@" + std::to_string(k)].data());
    recall_out.push_back(report.per_user["recall@" + std::to_string(k)].data());
  }
  double* auc_out = cfg.with_auc ? report.per_user["auc"].data() : nullptr;

  auto eval_range = [&](std::size_t begin, std::size_t end) {
    std::vector<double> scores;
    for (std::size_t idx = begin; idx < end; ++idx) {
      const EvalUser& eu = split.users[idx];
      scorer.score_user(eu, scores);
      const auto ranked = rank_topn(scores, eu.fold_in, max_k);
      for (std::size_t n = 0; n < cfg.k_list.size(); ++n) {
        ndcg_out[n][idx] = ndcg_at_k(ranked, eu.targets, cfg.k_list[n]);
        recall_out[n][idx] = recall_at_k(ranked, eu.targets, cfg.k_list[n]);
      }
      if (auc_out) auc_out[idx] = auc_from_scores(scores, eu.targets, eu.fold_in);
    }
  };

  const unsigned threads = std::max(1u, cfg.threads);
  if (threads == 1 || split.users.size() < 2 * threads) {
    eval_range(0, split.users.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (split.users.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t begin = std::min(std::size_t(t) * chunk, split.users.size());
      const std::size_t end = std::min(begin + chunk, split.users.size());
      if (begin < end) pool.emplace_back(eval_range, begin, end);
    }
    for (std::thread& th : pool) th.join();
  }

  for (const std::string& name : metric_names) {
    report.aggregates[name] = mean_ignoring_nan(report.per_user[name]);
  }
  return report;
}

void write_metrics_report(const MetricsReport& report, const std::filesystem::path& json_path) {
  if (json_path.has_parent_path()) std::filesystem::create_directories(json_path.parent_path());
  nlohmann::json doc;
  doc["user_count"] = report.users.size();
  doc["k_list"] = report.k_list;
  for (const auto& [name, value] : report.aggregates) {
    doc["aggregates"][name] = std::isnan(value) ? nlohmann::json() : nlohmann::json(value);
  }
  std::ofstream out(json_path);
  if (!out) throw DataError("cannot write " + json_path.string());
  out << doc.dump(2) << '\n';
}

void write_per_user_csv(const MetricsReport& report, const std::filesystem::path& csv_path) {
  if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
  std::ofstream out(csv_path);
  if (!out) throw DataError("cannot write " + csv_path.string());
  out.precision(17);
  out << "user";
  for (const auto& [name, _] : report.per_user) out << ',' << name;
  out << '\n';
  for (std::size_t idx = 0; idx < report.users.size(); ++idx) {
    out << report.users[idx];
    for (const auto& [_, values] : report.per_user) {
      out << ',';
      if (std::isnan(values[idx])) {
        out << "nan";
      } else {
        out << values[idx];
      }
    }
    out << '\n';
  }
}

MetricsReport read_per_user_csv(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw DataError("cannot read " + csv_path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(csv_path.string(), 1, "missing header");

  std::vector<std::string> names;
  {
    std::stringstream header(line);
    std::string field;
    while (std::getline(header, field, ',')) names.push_back(field);
  }
  if (names.empty() || names[0] != "user") {
    throw ParseError(csv_path.string(), 1, "first column must be 'user'");
  }

  MetricsReport report;
  for (std::size_t c = 1; c < names.size(); ++c) report.per_user[names[c]] = {};

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string field;
    std::size_t col = 0;
    while (std::getline(row, field, ',')) {
      if (col == 0) {
        report.users.push_back(static_cast<std::uint32_t>(std::stoul(field)));
      } else if (col < names.size()) {
        report.per_user[names[col]].push_back(
            field == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(field));
      }
      ++col;
    }
    if (col != names.size()) {
      throw ParseError(csv_path.string(), line_no, "expected " + std::to_string(names.size()) +
                                                       " fields, found " + std::to_string(col));
    }
  }
  for (const auto& [name, values] : report.per_user) {
    report.aggregates[name] = mean_ignoring_nan(values);
  }
  return report;
}

}  // namespace bpr
