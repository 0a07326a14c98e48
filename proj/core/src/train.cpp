#include "bpr/train.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace bpr {

using nlohmann::json;

TrainResult train(const SplitBundle& bundle, const TrainConfig& cfg) {
  return cfg.float32 ? train_impl<float>(bundle, cfg) : train_impl<double>(bundle, cfg);
}

namespace {

json config_to_json(const TrainConfig& cfg) {
  json doc;
  doc["f"] = cfg.f;
  doc["use_item_bias"] = cfg.use_item_bias;
  doc["reg"] = {{"variant", to_string(cfg.reg.variant)},
                {"lambda_u", cfg.reg.lambda_u},
                {"lambda_i", cfg.reg.lambda_i},
                {"lambda_j", cfg.reg.lambda_j},
                {"lambda_b", cfg.reg.lambda_b}};
  doc["optimizer"] = {{"kind", to_string(cfg.optimizer.kind)},
                      {"learning_rate", cfg.optimizer.learning_rate},
                      {"beta", cfg.optimizer.beta},
                      {"rho", cfg.optimizer.rho},
                      {"beta1", cfg.optimizer.beta1},
                      {"beta2", cfg.optimizer.beta2},
                      {"eps", cfg.optimizer.eps}};
  doc["sampler"] = {{"kind", to_string(cfg.sampler.kind)},
                    {"rank_temperature", cfg.sampler.rank_temperature},
                    {"refresh_interval", cfg.sampler.refresh_interval}};
  doc["max_epochs"] = cfg.max_epochs;
  doc["patience"] = cfg.patience;
  doc["eval_every"] = cfg.eval_every;
  doc["monitor"] = cfg.monitor.name();
  doc["seed"] = cfg.seed;
  doc["init_std"] = cfg.init_std;
  doc["bias_init"] = cfg.bias_init;
  doc["float32"] = cfg.float32;
  return doc;
}

TrainConfig config_from_json(const json& doc) {
  TrainConfig cfg;
  cfg.f = doc.at("f").get<std::uint32_t>();
  cfg.use_item_bias = doc.at("use_item_bias").get<bool>();
  const json& reg = doc.at("reg");
  cfg.reg.variant = parse_reg_variant(reg.at("variant").get<std::string>());
  cfg.reg.lambda_u = reg.at("lambda_u").get<double>();
  cfg.reg.lambda_i = reg.at("lambda_i").get<double>();
  cfg.reg.lambda_j = reg.at("lambda_j").get<double>();
  cfg.reg.lambda_b = reg.at("lambda_b").get<double>();
  const json& opt = doc.at("optimizer");
  cfg.optimizer.kind = parse_optimizer_kind(opt.at("kind").get<std::string>());
  cfg.optimizer.learning_rate = opt.at("learning_rate").get<double>();
  cfg.optimizer.beta = opt.at("beta").get<double>();
  cfg.optimizer.rho = opt.at("rho").get<double>();
  cfg.optimizer.beta1 = opt.at("beta1").get<double>();
  cfg.optimizer.beta2 = opt.at("beta2").get<double>();
  cfg.optimizer.eps = opt.at("eps").get<double>();
  const json& sampler = doc.at("sampler");
  cfg.sampler.kind = parse_sampler_kind(sampler.at("kind").get<std::string>());
  cfg.sampler.rank_temperature = sampler.at("rank_temperature").get<double>();
  cfg.sampler.refresh_interval = sampler.at("refresh_interval").get<std::uint64_t>();
  cfg.max_epochs = doc.at("max_epochs").get<std::uint32_t>();
  cfg.patience = doc.at("patience").get<std::uint32_t>();
  cfg.eval_every = doc.at("eval_every").get<std::uint32_t>();
  cfg.monitor = MonitorSpec::parse(doc.at("monitor").get<std::string>());
  cfg.seed = doc.at("seed").get<std::uint64_t>();
  cfg.init_std = doc.at("init_std").get<double>();
  cfg.bias_init = doc.at("bias_init").get<double>();
  cfg.float32 = doc.at("float32").get<bool>();
  return cfg;
}

json record_to_json(const RunRecord& r) {
  json doc;
  doc["name"] = r.name;
  doc["config"] = config_to_json(r.config);
  doc["signature"] = r.signature;
  doc["initial_value"] = r.initial_value;
  json trace = json::array();
  for (const auto& [epoch, value] : r.validation_trace) trace.push_back({epoch, value});
  doc["validation_trace"] = trace;
  doc["best_epoch"] = r.best_epoch;
  doc["best_value"] = r.best_value;
  doc["test_metrics"] = r.test_metrics;
  doc["wall_clock_seconds"] = r.wall_clock_seconds;
  doc["telemetry_path"] = r.telemetry_path;
  doc["checkpoint_path"] = r.checkpoint_path;
  doc["status"] = r.status;
  doc["flags"] = r.flags;
  return doc;
}

RunRecord record_from_json(const json& doc) {
  RunRecord r;
  r.name = doc.at("name").get<std::string>();
  r.config = config_from_json(doc.at("config"));
  r.signature = doc.at("signature").get<std::string>();
  r.initial_value = doc.at("initial_value").get<double>();
  for (const auto& pair : doc.at("validation_trace")) {
    r.validation_trace.emplace_back(pair.at(0).get<std::uint32_t>(), pair.at(1).get<double>());
  }
  r.best_epoch = doc.at("best_epoch").get<std::uint32_t>();
  r.best_value = doc.at("best_value").get<double>();
  r.test_metrics = doc.at("test_metrics").get<std::map<std::string, double>>();
  r.wall_clock_seconds = doc.at("wall_clock_seconds").get<double>();
  r.telemetry_path = doc.at("telemetry_path").get<std::string>();
  r.checkpoint_path = doc.at("checkpoint_path").get<std::string>();
  r.status = doc.at("status").get<std::string>();
  r.flags = doc.at("flags").get<std::vector<std::string>>();
  return r;
}

}  // namespace

std::string config_signature(const TrainConfig& cfg) {
  const std::string canonical = config_to_json(cfg).dump();
  std::ostringstream hex;
  hex << std::hex << fnv1a64(canonical);
  return hex.str();
}

void append_run_record(const RunRecord& record, const std::filesystem::path& jsonl_path) {
  if (jsonl_path.has_parent_path()) std::filesystem::create_directories(jsonl_path.parent_path());
  std::ofstream out(jsonl_path, std::ios::app);
  if (!out) throw DataError("cannot write " + jsonl_path.string());
  out << record_to_json(record).dump() << '\n';
}

std::vector<RunRecord> read_run_records(const std::filesystem::path& jsonl_path) {
  std::ifstream in(jsonl_path);
  if (!in) throw DataError("cannot read " + jsonl_path.string());
  std::vector<RunRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(jsonl_path.string(), line_no, e.what());
    }
  }
  return records;
}

namespace {

RegScheme resolve_reg(RegVariant variant, const RegScheme& base) {
  switch (variant) {
    case RegVariant::none: return RegScheme::none();
    case RegVariant::shared: return RegScheme::shared(base.lambda_i);
    case RegVariant::user_item: return RegScheme::user_item(base.lambda_u, base.lambda_i);
    case RegVariant::separate:
      return RegScheme::separate(base.lambda_u, base.lambda_i, base.lambda_j, base.lambda_b);
  }
  return RegScheme::none();
}

struct GridRunner {
  const SplitBundle& bundle;
  const EvalConfig& eval_cfg;
  const std::function<void(const RunRecord&)>& on_record;
  std::vector<RunRecord> records;
  std::map<std::string, RunRecord> bank;  // signature -> first result

  // Trains the cell unless an identical config already ran; always emits a
  // record. Returns the record index.
  std::size_t run_cell(const std::string& name, const TrainConfig& cfg) {
    const std::string signature = config_signature(cfg);
    if (const auto it = bank.find(signature); it != bank.end()) {
      RunRecord reused = it->second;
      if (reused.name != name) reused.flags.push_back("reused:" + reused.name);
      reused.name = name;
      records.push_back(std::move(reused));
      if (on_record) on_record(records.back());
      return records.size() - 1;
    }

    RunRecord record;
    try {
      TrainResult result = train(bundle, cfg);
      record = std::move(result.record);
      const ModelScorer scorer(result.params);
      const MetricsReport test = evaluate_split(scorer, bundle.test, eval_cfg);
      record.test_metrics = test.aggregates;
    } catch (const Error& e) {
      record.config = cfg;
      record.status = std::string("failed: ") + e.what();
    }
    record.name = name;
    record.signature = signature;
    bank.emplace(signature, record);
    records.push_back(std::move(record));
    if (on_record) on_record(records.back());
    return records.size() - 1;
  }

  // Best completed cell among `indices` by validation monitor.
  std::size_t winner(const std::vector<std::size_t>& indices, const std::string& phase) const {
    std::size_t best = records.size();
    for (std::size_t idx : indices) {
      if (records[idx].status != "complete") continue;
      if (best == records.size() || records[idx].best_value > records[best].best_value) {
        best = idx;
      }
    }
    if (best == records.size()) throw Error("every cell of the " + phase + " phase failed");
    return best;
  }
};

}  // namespace

std::vector<RunRecord> run_ablation_grid(const SplitBundle& bundle, const TrainConfig& base,
                                         const AblationAxes& axes, const EvalConfig& eval_cfg,
                                         const std::function<void(const RunRecord&)>& on_record,
                                         const std::vector<RunRecord>& completed) {
  if (axes.bias_values.empty() || axes.reg_variants.empty() || axes.optimizer_kinds.empty() ||
      axes.sampler_kinds.empty()) {
    throw ConfigError("ablation axes must be non-empty");
  }

  GridRunner runner{bundle, eval_cfg, on_record, {}, {}};
  for (const RunRecord& record : completed) {
    if (record.status == "complete") runner.bank.emplace(record.signature, record);
  }

  TrainConfig phase1 = base;
  phase1.optimizer.kind = OptimizerKind::sgd;
  phase1.sampler.kind = SamplerKind::uniform;

  std::vector<std::size_t> phase1_cells;
  for (bool bias : axes.bias_values) {
    for (RegVariant variant : axes.reg_variants) {
      TrainConfig cfg = phase1;
      cfg.use_item_bias = bias;
      cfg.reg = resolve_reg(variant, base.reg);
      const std::string name = std::string("phase1/bias=") + (bias ? "on" : "off") +
                               ",reg=" + to_string(variant);
      phase1_cells.push_back(runner.run_cell(name, cfg));
    }
  }
  TrainConfig carry = runner.records[runner.winner(phase1_cells, "bias-reg")].config;

  std::vector<std::size_t> phase2_cells;
  for (OptimizerKind kind : axes.optimizer_kinds) {
    TrainConfig cfg = carry;
    cfg.optimizer.kind = kind;
    phase2_cells.push_back(runner.run_cell("phase2/opt=" + to_string(kind), cfg));
  }
  carry = runner.records[runner.winner(phase2_cells, "optimizer")].config;

  std::vector<std::size_t> phase3_cells;
  for (SamplerKind kind : axes.sampler_kinds) {
    TrainConfig cfg = carry;
    cfg.sampler.kind = kind;
    phase3_cells.push_back(runner.run_cell("phase3/sampler=" + to_string(kind), cfg));
  }
  runner.winner(phase3_cells, "sampler");

  return std::move(runner.records);
}

void SearchSpace::validate() const {
  auto check_log = [](const LogUniform& range, const char* what) {
    if (!(range.lo > 0) || !(range.lo < range.hi)) {
      throw ConfigError(std::string(what) + " range must satisfy 0 < lo < hi");
    }
  };
  check_log(learning_rate, "learning_rate");
  check_log(lambda, "lambda");
  if (!(beta1_range.first <= beta1_range.second) || beta1_range.first < 0 ||
      beta1_range.second >= 1) {
    throw ConfigError("beta1 range must lie in [0, 1)");
  }
  if (budget == 0) throw ConfigError("search budget must be at least 1");
  if (stage1_epochs == 0 || stage2_epochs == 0) {
    throw ConfigError("search stage epochs must be at least 1");
  }
  if (bias_choices.empty() || reg_choices.empty() || optimizer_choices.empty() ||
      sampler_choices.empty()) {
    throw ConfigError("search space categorical axes must be non-empty");
  }
}

namespace {

double sample_log_uniform(const LogUniform& range, Rng& rng) {
  std::uniform_real_distribution<double> unit(std::log(range.lo), std::log(range.hi));
  return std::exp(unit(rng));
}

template <typename T>
T sample_choice(const std::vector<T>& values, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  return values[pick(rng)];
}

TrainConfig sample_trial_config(const SearchSpace& space, const TrainConfig& base, Rng& rng) {
  TrainConfig cfg = base;
  cfg.optimizer.learning_rate = sample_log_uniform(space.learning_rate, rng);
  const double lu = sample_log_uniform(space.lambda, rng);
  const double li = sample_log_uniform(space.lambda, rng);
  const double lj = sample_log_uniform(space.lambda, rng);
  const double lb = sample_log_uniform(space.lambda, rng);
  switch (sample_choice(space.reg_choices, rng)) {
    case RegVariant::none: cfg.reg = RegScheme::none(); break;
    case RegVariant::shared: cfg.reg = RegScheme::shared(lu); break;
    case RegVariant::user_item: cfg.reg = RegScheme::user_item(lu, li); break;
    case RegVariant::separate: cfg.reg = RegScheme::separate(lu, li, lj, lb); break;
  }
  cfg.use_item_bias = sample_choice(space.bias_choices, rng);
  cfg.optimizer.kind = sample_choice(space.optimizer_choices, rng);
  if (cfg.optimizer.kind == OptimizerKind::adam) {
    std::uniform_real_distribution<double> beta1(space.beta1_range.first,
                                                 space.beta1_range.second);
    cfg.optimizer.beta1 = beta1(rng);
  }
  cfg.sampler.kind = sample_choice(space.sampler_choices, rng);
  return cfg;
}

SplitBundle make_inner_bundle(const SplitBundle& outer, std::uint64_t seed) {
  try {
    const SplitSpec& spec = outer.spec;
    if (spec.protocol == SplitProtocol::user_based) {
      return split_user_based(outer.train, spec.n_heldout_users, spec.fold_in_fraction,
                              substream_seed(seed, "search"));
    }
    return split_temporal(outer.train, spec.test_window, spec.val_window);
  } catch (const SplitError& e) {
    throw SearchError(std::string("inner split infeasible: ") + e.what());
  }
}

}  // namespace

SearchResult hyperparameter_search(const SplitBundle& bundle, const SearchSpace& space,
                                   const TrainConfig& base, std::uint64_t seed,
                                   const EvalConfig& eval_cfg) {
  space.validate();
  const SplitBundle inner = make_inner_bundle(bundle, seed);

  Rng rng = make_rng(seed, "search");
  SearchResult result;
  std::size_t best_trial = 0;
  for (std::uint32_t t = 0; t < space.budget; ++t) {
    TrainConfig cfg = sample_trial_config(space, base, rng);
    cfg.max_epochs = space.stage1_epochs;
    cfg.seed = substream_seed(seed, "trial-" + std::to_string(t));

    RunRecord record;
    try {
      record = train(inner, cfg).record;
    } catch (const Error& e) {
      record.config = cfg;
      record.status = std::string("failed: ") + e.what();
    }
    record.name = "trial-" + std::to_string(t);
    record.signature = config_signature(cfg);
    result.trials.push_back(std::move(record));

    const RunRecord& current = result.trials.back();
    const RunRecord& incumbent = result.trials[best_trial];
    if (current.status == "complete" &&
        (incumbent.status != "complete" || current.best_value > incumbent.best_value)) {
      best_trial = t;
    }
  }
  if (result.trials[best_trial].status != "complete") {
    throw SearchError("every search trial failed");
  }

  result.best_config = result.trials[best_trial].config;
  result.best_config.max_epochs = space.stage2_epochs;
  result.best_config.seed = substream_seed(seed, "retrain");

  TrainResult retrained = train(bundle, result.best_config);
  result.final_record = std::move(retrained.record);
  result.final_record.name = "final";
  result.final_record.signature = config_signature(result.best_config);
  result.params = std::move(retrained.params);

  const ModelScorer scorer(result.params);
  result.final_record.test_metrics = evaluate_split(scorer, bundle.test, eval_cfg).aggregates;
  return result;
}

}  // namespace bpr
