#include "bpr/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <deque>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bpr/errors.hpp"
#include "bpr/rng.hpp"
#include "bpr/significance.hpp"

namespace bpr {

using nlohmann::json;

namespace {

constexpr double kSecondsPerYear = 365.25 * 86400.0;

char resolve_delimiter(const std::string& text) {
  if (text == "\\t" || text == "tab" || text == "\t") return '\t';
  if (text == "space") return ' ';
  if (text.size() == 1) return text[0];
  throw ConfigError("data.delimiter must be a single character, 'tab' or 'space'");
}

std::vector<std::string> split_csv_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream stream(text);
  std::string field;
  while (std::getline(stream, field, ',')) {
    if (!field.empty()) out.push_back(field);
  }
  return out;
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buffer[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buffer;
}

json stats_to_json(const StatsRecord& stats) {
  return json{{"users", stats.users},
              {"items", stats.items},
              {"actions", stats.actions},
              {"sparsity", stats.sparsity},
              {"med_user", stats.median_user_actions},
              {"med_item", stats.median_item_actions}};
}

InteractionLog load_and_filter(const ExperimentConfig& cfg, StatsRecord* raw_stats = nullptr) {
  if (cfg.data.path.empty()) throw ConfigError("data.path is required");
  LogFormat format;
  format.delimiter = resolve_delimiter(cfg.data.delimiter);
  format.columns = parse_column_layout(cfg.data.layout);
  format.skip_header = cfg.data.skip_header;

  InteractionLog log = ingest(cfg.data.path, format);
  if (raw_stats) *raw_stats = dataset_stats(log);
  if (cfg.data.min_user_interactions > 0 || cfg.data.min_item_interactions > 0) {
    log = filter_min_interactions(log, cfg.data.min_user_interactions,
                                  cfg.data.min_item_interactions);
  }
  if (cfg.data.subsample_events > 0) {
    log = subsample_users_to_events(log, cfg.data.subsample_events,
                                    substream_seed(cfg.seed, "subsample"));
  }
  return log;
}

SplitBundle make_split(const ExperimentConfig& cfg, const InteractionLog& log) {
  const SplitProtocol protocol = parse_split_protocol(cfg.split.protocol);
  if (protocol == SplitProtocol::user_based) {
    return split_user_based(log, cfg.split.n_heldout_users, cfg.split.fold_in_fraction,
                            substream_seed(cfg.seed, "split"));
  }
  const auto test_window = static_cast<std::int64_t>(cfg.split.test_window_years * kSecondsPerYear);
  const auto val_window = static_cast<std::int64_t>(cfg.split.val_window_years * kSecondsPerYear);
  return split_temporal(log, test_window, val_window);
}

std::string experiment_hash(const ExperimentConfig& cfg) {
  json doc;
  doc["data"] = {{"path", cfg.data.path},
                 {"layout", cfg.data.layout},
                 {"delimiter", cfg.data.delimiter},
                 {"skip_header", cfg.data.skip_header},
                 {"min_user", cfg.data.min_user_interactions},
                 {"min_item", cfg.data.min_item_interactions},
                 {"subsample_events", cfg.data.subsample_events}};
  doc["split"] = {{"protocol", cfg.split.protocol},
                  {"n_heldout_users", cfg.split.n_heldout_users},
                  {"fold_in_fraction", cfg.split.fold_in_fraction},
                  {"test_window_years", cfg.split.test_window_years},
                  {"val_window_years", cfg.split.val_window_years}};
  doc["train"] = config_signature(cfg.resolve_train());
  doc["seed"] = cfg.seed;
  std::ostringstream hex;
  hex << std::hex << fnv1a64(doc.dump());
  return hex.str();
}

}  // namespace

TrainConfig ExperimentConfig::resolve_train() const {
  TrainConfig tc;
  tc.f = train.f;
  tc.use_item_bias = train.use_item_bias;
  switch (parse_reg_variant(train.reg)) {
    case RegVariant::none: tc.reg = RegScheme::none(); break;
    case RegVariant::shared: tc.reg = RegScheme::shared(train.lambda); break;
    case RegVariant::user_item:
      tc.reg = RegScheme::user_item(train.lambda_u, train.lambda_i);
      break;
    case RegVariant::separate:
      tc.reg = RegScheme::separate(train.lambda_u, train.lambda_i, train.lambda_j, train.lambda_b);
      break;
  }
  tc.optimizer.kind = parse_optimizer_kind(train.optimizer);
  tc.optimizer.learning_rate = train.learning_rate;
  tc.optimizer.beta = train.beta;
  tc.optimizer.rho = train.rho;
  tc.optimizer.beta1 = train.beta1;
  tc.optimizer.beta2 = train.beta2;
  tc.optimizer.eps = train.eps;
  tc.sampler.kind = parse_sampler_kind(train.sampler);
  tc.sampler.rank_temperature = train.rank_temperature;
  tc.sampler.refresh_interval = train.refresh_interval;
  tc.max_epochs = train.max_epochs;
  tc.patience = train.patience;
  tc.eval_every = train.eval_every;
  tc.monitor = MonitorSpec::parse(train.monitor);
  tc.seed = seed;
  tc.init_std = train.init_std;
  tc.bias_init = train.bias_init;
  tc.float32 = train.float32;
  tc.validate();
  return tc;
}

EvalConfig ExperimentConfig::resolve_eval() const {
  if (eval.k_list.empty()) throw ConfigError("eval.k_list must not be empty");
  for (std::size_t k : eval.k_list) {
    if (k == 0) throw ConfigError("eval.k_list entries must be at least 1");
  }
  EvalConfig ec;
  ec.k_list = eval.k_list;
  ec.with_auc = eval.with_auc;
  ec.threads = std::max(1u, eval.threads);
  return ec;
}

SearchSpace ExperimentConfig::resolve_search() const {
  SearchSpace space;
  space.budget = search.budget;
  space.stage1_epochs = search.stage1_epochs;
  space.stage2_epochs = search.stage2_epochs;
  space.learning_rate = {search.lr_lo, search.lr_hi};
  space.lambda = {search.lambda_lo, search.lambda_hi};
  space.beta1_range = {search.beta1_lo, search.beta1_hi};
  space.reg_choices.clear();
  for (const std::string& name : split_csv_list(search.regs)) {
    space.reg_choices.push_back(parse_reg_variant(name));
  }
  space.optimizer_choices.clear();
  for (const std::string& name : split_csv_list(search.optimizers)) {
    space.optimizer_choices.push_back(parse_optimizer_kind(name));
  }
  space.sampler_choices.clear();
  for (const std::string& name : split_csv_list(search.samplers)) {
    space.sampler_choices.push_back(parse_sampler_kind(name));
  }
  space.bias_choices.clear();
  for (const std::string& name : split_csv_list(search.biases)) {
    if (name == "on" || name == "true" || name == "1") {
      space.bias_choices.push_back(true);
    } else if (name == "off" || name == "false" || name == "0") {
      space.bias_choices.push_back(false);
    } else {
      throw ConfigError("search.biases entries must be on|off, got '" + name + "'");
    }
  }
  space.validate();
  return space;
}

void ExperimentConfig::validate() const {
  const TrainConfig tc = resolve_train();
  const EvalConfig ec = resolve_eval();
  if (tc.monitor.kind == MonitorSpec::Kind::auc && !ec.with_auc) {
    throw ConfigError("monitor metric 'auc' requires eval.with_auc = true");
  }
  if (tc.monitor.kind == MonitorSpec::Kind::ndcg &&
      std::find(ec.k_list.begin(), ec.k_list.end(), tc.monitor.k) == ec.k_list.end()) {
    throw ConfigError("monitor metric '" + tc.monitor.name() +
                      "' requires " + std::to_string(tc.monitor.k) + " in eval.k_list");
  }
  if (run_name.empty()) throw ConfigError("run name must not be empty");
}

std::string file_content_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string() + " for hashing");
  std::uint64_t hash = 14695981039346656037ull;
  char buffer[1 << 16];
  while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize n = 0; n < got; ++n) {
      hash ^= static_cast<unsigned char>(buffer[n]);
      hash *= 1099511628211ull;
    }
    if (got < static_cast<std::streamsize>(sizeof(buffer))) break;
  }
  std::ostringstream hex;
  hex << std::hex << hash;
  return hex.str();
}

void write_manifest(const std::filesystem::path& path, const std::string& config_hash,
                    const std::vector<std::pair<std::string, std::string>>& input_hashes,
                    const std::vector<std::string>& artifacts, const std::string& status) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  json doc;
  doc["config_hash"] = config_hash;
  for (const auto& [name, hash] : input_hashes) doc["inputs"][name] = hash;
  doc["artifacts"] = artifacts;
  doc["status"] = status;
  doc["created_at"] = iso_timestamp();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

int cmd_preprocess(const ExperimentConfig& cfg) {
  cfg.validate();
  StatsRecord raw_stats;
  const InteractionLog log = load_and_filter(cfg, &raw_stats);
  const SplitBundle bundle = make_split(cfg, log);

  const auto split_dir = cfg.run_dir() / "split";
  write_split(bundle, split_dir);

  const StatsRecord stats = dataset_stats(log);
  json stats_doc;
  stats_doc["raw"] = stats_to_json(raw_stats);
  stats_doc["filtered"] = stats_to_json(stats);
  const auto stats_path = cfg.run_dir() / "stats.json";
  {
    std::ofstream out(stats_path);
    if (!out) throw DataError("cannot write " + stats_path.string());
    out << stats_doc.dump(2) << '\n';
  }

  write_manifest(cfg.run_dir() / "manifest.json", experiment_hash(cfg),
                 {{cfg.data.path, file_content_hash(cfg.data.path)}},
                 {split_dir.string(), stats_path.string()}, "complete");

  std::cout << stats_doc.dump(2) << '\n';
  std::cout << "split: " << bundle.train.events.size() << " train events, "
            << bundle.validation.users.size() << " validation users, "
            << bundle.test.users.size() << " test users\n";
  return 0;
}

int cmd_stats(const ExperimentConfig& cfg) {
  StatsRecord raw_stats;
  const InteractionLog log = load_and_filter(cfg, &raw_stats);
  json doc;
  doc["raw"] = stats_to_json(raw_stats);
  doc["filtered"] = stats_to_json(dataset_stats(log));
  std::cout << doc.dump(2) << '\n';
  return 0;
}

int cmd_train(const ExperimentConfig& cfg) {
  cfg.validate();
  const SplitBundle bundle = read_split(cfg.resolved_split_dir());
  const TrainConfig tc = cfg.resolve_train();
  const EvalConfig ec = cfg.resolve_eval();

  TrainResult result = train(bundle, tc);

  const auto checkpoint_path = cfg.run_dir() / "checkpoints" / "model.ckpt";
  save_checkpoint(result.params, checkpoint_path);
  result.record.checkpoint_path = checkpoint_path.string();

  if (!result.telemetry.window_mean_abs_m.empty()) {
    const auto telemetry_path = cfg.run_dir() / "telemetry" / "train.csv";
    write_telemetry_csv(result.telemetry, telemetry_path);
    result.record.telemetry_path = telemetry_path.string();
  }

  const ModelScorer scorer(result.params);
  result.record.test_metrics = evaluate_split(scorer, bundle.test, ec).aggregates;
  result.record.name = "train";
  result.record.signature = config_signature(tc);

  const auto records_path = cfg.run_dir() / "records.jsonl";
  append_run_record(result.record, records_path);
  write_manifest(cfg.run_dir() / "manifest.json", experiment_hash(cfg), {},
                 {checkpoint_path.string(), records_path.string()}, "complete");

  std::cout << "best epoch " << result.record.best_epoch << ", validation "
            << tc.monitor.name() << " " << result.record.best_value << '\n';
  for (const auto& [metric, value] : result.record.test_metrics) {
    std::cout << "test " << metric << " " << value << '\n';
  }
  return 0;
}

int cmd_ablate(const ExperimentConfig& cfg) {
  cfg.validate();
  const SplitBundle bundle = read_split(cfg.resolved_split_dir());
  const TrainConfig base = cfg.resolve_train();
  const EvalConfig ec = cfg.resolve_eval();

  const auto records_path = cfg.run_dir() / "ablation" / "records.jsonl";
  std::vector<RunRecord> completed;
  if (std::filesystem::exists(records_path)) completed = read_run_records(records_path);
  std::filesystem::create_directories(records_path.parent_path());
  std::ofstream(records_path, std::ios::trunc).close();

  const auto on_record = [&](const RunRecord& record) {
    append_run_record(record, records_path);
    std::cout << record.name << ": " << record.status;
    if (record.status == "complete") {
      std::cout << ", validation " << base.monitor.name() << " " << record.best_value;
    }
    std::cout << '\n';
  };

  const std::vector<RunRecord> records =
      run_ablation_grid(bundle, base, AblationAxes{}, ec, on_record, completed);

  json manifest_cells = json::array();
  for (const RunRecord& record : records) {
    manifest_cells.push_back({{"name", record.name},
                              {"signature", record.signature},
                              {"status", record.status}});
  }
  const auto grid_manifest_path = cfg.run_dir() / "ablation" / "grid-manifest.json";
  {
    json doc;
    doc["cells"] = manifest_cells;
    doc["emitted"] = records.size();
    doc["created_at"] = iso_timestamp();
    std::ofstream out(grid_manifest_path);
    if (!out) throw DataError("cannot write " + grid_manifest_path.string());
    out << doc.dump(2) << '\n';
  }
  write_manifest(cfg.run_dir() / "manifest.json", experiment_hash(cfg), {},
                 {records_path.string(), grid_manifest_path.string()}, "complete");
  std::cout << records.size() << " records emitted\n";
  return 0;
}

int cmd_search(const ExperimentConfig& cfg) {
  cfg.validate();
  const SplitBundle bundle = read_split(cfg.resolved_split_dir());
  const TrainConfig base = cfg.resolve_train();
  const EvalConfig ec = cfg.resolve_eval();
  const SearchSpace space = cfg.resolve_search();

  const SearchResult result = hyperparameter_search(bundle, space, base, cfg.seed, ec);

  const auto trials_path = cfg.run_dir() / "search" / "trials.jsonl";
  std::filesystem::create_directories(trials_path.parent_path());
  std::ofstream(trials_path, std::ios::trunc).close();
  for (const RunRecord& trial : result.trials) append_run_record(trial, trials_path);
  append_run_record(result.final_record, trials_path);

  const auto checkpoint_path = cfg.run_dir() / "search" / "best.ckpt";
  save_checkpoint(result.params, checkpoint_path);

  write_manifest(cfg.run_dir() / "manifest.json", experiment_hash(cfg), {},
                 {trials_path.string(), checkpoint_path.string()}, "complete");

  std::cout << "best config signature " << result.final_record.signature << '\n';
  std::cout << "validation " << base.monitor.name() << " " << result.final_record.best_value
            << '\n';
  for (const auto& [metric, value] : result.final_record.test_metrics) {
    std::cout << "test " << metric << " " << value << '\n';
  }
  return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, const EvaluateArgs& args) {
  const SplitBundle bundle = read_split(cfg.resolved_split_dir());
  const EvalConfig ec = cfg.resolve_eval();
  const EvalSplit* target = nullptr;
  if (args.target == "test") {
    target = &bundle.test;
  } else if (args.target == "validation") {
    target = &bundle.validation;
  } else {
    throw ConfigError("evaluate target must be test|validation, got '" + args.target + "'");
  }

  std::deque<ModelParams<double>> loaded;
  std::deque<ItemPopModel> itempop;
  std::deque<EaseModel> ease;
  std::vector<std::pair<std::string, const Scorer*>> models;
  std::deque<ModelScorer> model_scorers;

  for (const auto& path : args.checkpoints) {
    loaded.push_back(load_checkpoint(path));
    model_scorers.emplace_back(loaded.back());
    models.emplace_back(path.stem().string(), &model_scorers.back());
  }
  if (args.with_itempop) {
    itempop.push_back(fit_itempop(bundle.train));
    models.emplace_back("itempop", &itempop.back());
  }
  if (args.with_ease) {
    ease.push_back(fit_ease(bundle.train, args.ease_l2, args.ease_item_cap, &std::cerr));
    models.emplace_back("ease", &ease.back());
  }
  if (models.empty()) {
    throw ConfigError("evaluate needs at least one checkpoint or baseline");
  }
  if (models.size() > 1 && args.comparisons == 0) {
    throw ConfigError("evaluating several models needs an explicit --comparisons count");
  }

  const auto eval_dir = cfg.run_dir() / "eval";
  std::vector<MetricsReport> reports;
  for (const auto& [label, scorer] : models) {
    reports.push_back(evaluate_split(*scorer, *target, ec));
    write_metrics_report(reports.back(), eval_dir / (label + ".json"));
    write_per_user_csv(reports.back(), eval_dir / (label + ".csv"));
    std::cout << label << ':';
    for (const auto& [metric, value] : reports.back().aggregates) {
      std::cout << ' ' << metric << '=' << value;
    }
    std::cout << '\n';
  }

  if (models.size() > 1) {
    json matrix = json::array();
    for (std::size_t a = 0; a < models.size(); ++a) {
      for (std::size_t b = a + 1; b < models.size(); ++b) {
        const auto results = paired_significance(reports[a], reports[b], args.comparisons);
        const auto pair_path =
            eval_dir / ("significance-" + models[a].first + "-vs-" + models[b].first + ".json");
        write_significance_json(results, models[a].first, models[b].first, args.comparisons,
                                pair_path);
        for (const SignificanceResult& r : results) {
          matrix.push_back({{"a", models[a].first},
                            {"b", models[b].first},
                            {"metric", r.metric},
                            {"p_adjusted", r.p_adjusted},
                            {"significant", r.significant}});
        }
      }
    }
    std::ofstream out(eval_dir / "significance.json");
    if (!out) throw DataError("cannot write significance matrix");
    out << matrix.dump(2) << '\n';
  }
  return 0;
}

int cmd_significance(const SignificanceArgs& args) {
  const MetricsReport a = read_per_user_csv(args.csv_a);
  const MetricsReport b = read_per_user_csv(args.csv_b);
  if (a.users != b.users) {
    throw AlignmentError("per-user reports cover different user sets");
  }
  const auto results = paired_significance(a, b, args.comparisons);

  json doc = json::array();
  for (const SignificanceResult& r : results) {
    doc.push_back({{"metric", r.metric},
                   {"pairs", r.pairs},
                   {"mean_diff", r.mean_diff},
                   {"t", std::isfinite(r.t) ? json(r.t) : json(r.t > 0 ? "inf" : "-inf")},
                   {"df", r.df},
                   {"p_raw", r.p_raw},
                   {"p_adjusted", r.p_adjusted},
                   {"significant", r.significant},
                   {"degenerate", r.degenerate}});
  }
  std::cout << doc.dump(2) << '\n';
  if (!args.output.empty()) {
    write_significance_json(results, args.csv_a.stem().string(), args.csv_b.stem().string(),
                            args.comparisons, args.output);
  }
  return 0;
}

}  // namespace bpr
