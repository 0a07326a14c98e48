#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bpr/errors.hpp"
#include "bpr/eval.hpp"
#include "bpr/model.hpp"
#include "bpr/objective.hpp"
#include "bpr/optim.hpp"
#include "bpr/rng.hpp"
#include "bpr/sampling.hpp"
#include "bpr/split.hpp"

namespace bpr {

struct MonitorSpec {
  enum class Kind { ndcg, auc };
  Kind kind = Kind::ndcg;
  std::size_t k = 10;

  std::string name() const { return kind == Kind::auc ? "auc" : "ndcg@" + std::to_string(k); }
  static MonitorSpec parse(const std::string& text);
};

inline MonitorSpec MonitorSpec::parse(const std::string& text) {
  MonitorSpec spec;
  if (text == "auc") {
    spec.kind = Kind::auc;
    return spec;
  }
  if (text.rfind("ndcg@", 0) == 0) {
    spec.kind = Kind::ndcg;
    try {
      spec.k = std::stoul(text.substr(5));
    } catch (const std::exception&) {
      throw ConfigError("bad monitor metric '" + text + "'");
    }
    if (spec.k == 0) throw ConfigError("monitor cutoff must be at least 1");
    return spec;
  }
  throw ConfigError("unknown monitor metric '" + text + "' (expected ndcg@K|auc)");
}

struct TrainConfig {
  std::uint32_t f = 64;
  bool use_item_bias = false;
  RegScheme reg;
  OptimizerConfig optimizer;
  SamplerConfig sampler;
  std::uint32_t max_epochs = 100;
  std::uint32_t patience = 13;
  std::uint32_t eval_every = 1;
  MonitorSpec monitor;
  std::uint64_t seed = 42;
  double init_std = 0.01;
  double bias_init = 0.0;
  bool float32 = false;

  void validate() const {
    if (f == 0) throw ConfigError("embedding dimension must be at least 1");
    if (max_epochs == 0) throw ConfigError("max_epochs must be at least 1");
    if (patience == 0) throw ConfigError("patience must be at least 1");
    if (eval_every == 0) throw ConfigError("eval_every must be at least 1");
    if (!(init_std > 0)) throw ConfigError("init_std must be positive");
    optimizer.validate();
  }
};

// Strict-improvement early stopping: stop after `patience` consecutive
// non-improving observations.
class EarlyStopper {
public:
  explicit EarlyStopper(std::uint32_t patience) : patience_(patience) {
    if (patience_ == 0) throw ConfigError("patience must be at least 1");
  }

  // Returns true when `value` is a new best.
  bool observe(double value) {
    ++count_;
    if (count_ == 1 || value > best_) {
      best_ = value;
      best_count_ = count_;
      streak_ = 0;
      return true;
    }
    ++streak_;
    return false;
  }

  bool should_stop() const { return streak_ >= patience_; }
  std::size_t evaluations() const { return count_; }
  std::size_t best_evaluation() const { return best_count_; }  // 1-based
  double best_value() const { return best_; }

private:
  std::uint32_t patience_;
  std::size_t count_ = 0;
  std::size_t best_count_ = 0;
  std::size_t streak_ = 0;
  double best_ = 0;
};

struct RunRecord {
  std::string name;
  TrainConfig config;
  std::string signature;       // canonical config hash, used for grid reuse
  double initial_value = 0;    // monitor on the untrained model
  std::vector<std::pair<std::uint32_t, double>> validation_trace;
  std::uint32_t best_epoch = 0;
  double best_value = 0;
  std::map<std::string, double> test_metrics;
  double wall_clock_seconds = 0;
  std::string telemetry_path;
  std::string checkpoint_path;
  std::string status = "complete";
  std::vector<std::string> flags;
};

struct TrainResult {
  ModelParams<double> params;
  RunRecord record;
  MomentumTelemetry telemetry;
};

// Monitor metric over a validation split, single-threaded and deterministic.
template <typename Real>
double evaluate_monitor(const ModelParams<Real>& params, const EvalSplit& split,
                        const MonitorSpec& monitor) {
  std::vector<Real> raw;
  std::vector<double> scores;
  std::vector<double> per_user;
  per_user.reserve(split.users.size());
  for (const EvalUser& eu : split.users) {
    score_all_items(params, eu.user, raw);
    scores.assign(raw.begin(), raw.end());
    if (monitor.kind == MonitorSpec::Kind::ndcg) {
      const auto ranked = rank_topn(scores, eu.fold_in, monitor.k);
      per_user.push_back(ndcg_at_k(ranked, eu.targets, monitor.k));
    } else {
      per_user.push_back(auc_from_scores(scores, eu.targets, eu.fold_in));
    }
  }
  return mean_ignoring_nan(per_user);
}

template <typename Real>
TrainResult train_impl(const SplitBundle& bundle, const TrainConfig& cfg) {
  cfg.validate();
  if (bundle.train.events.empty()) throw DataError("training split has no events");
  if (bundle.validation.users.empty()) throw ConfigError("validation split is empty");

  const auto started = std::chrono::steady_clock::now();
  const UserHistoryIndex history = UserHistoryIndex::build(bundle.train);

  InitSpec init = InitSpec::normal(0.0, cfg.init_std, substream_seed(cfg.seed, "init"));
  init.bias_init = cfg.bias_init;
  ModelParams<Real> params = init_model<Real>(bundle.train.user_count, bundle.train.item_count,
                                              cfg.f, init, cfg.use_item_bias);

  Rng sampler_rng = make_rng(cfg.seed, "sampler");
  const std::uint64_t epoch_triples = history.event_count;
  TripleSampler<Real> sampler(cfg.sampler, params.item_count, cfg.f, epoch_triples);
  OptimizerState<Real> state_p(params.user_count, cfg.f, cfg.optimizer.kind);
  OptimizerState<Real> state_q(params.item_count, cfg.f, cfg.optimizer.kind);
  OptimizerState<Real> state_b(params.item_count, 1, cfg.optimizer.kind);
  const bool track_momentum = state_p.has_first_moment();

  RunRecord record;
  record.config = cfg;
  record.initial_value = evaluate_monitor(params, bundle.validation, cfg.monitor);
  if (cfg.sampler.kind == SamplerKind::adaptive && cfg.use_item_bias) {
    record.flags.push_back("adaptive-sampling-with-item-bias");
  }
  if (cfg.float32) record.flags.push_back("float32");

  MomentumTelemetry telemetry;
  EarlyStopper stopper(cfg.patience);
  ModelParams<Real> best_params = params;
  std::uint32_t best_epoch = 0;
  TripleGrad<Real> grad;
  std::uint64_t step = 0;

  std::uint32_t epoch = 1;
  for (; epoch <= cfg.max_epochs; ++epoch) {
    for (std::uint64_t n = 0; n < epoch_triples; ++n) {
      sampler.maybe_refresh(params, step);
      const Triple t = sampler.sample(params, history, sampler_rng);
      try {
        bpr_grad_into(params, t.u, t.i, t.j, cfg.reg, grad);
        state_p.apply_update(t.u, params.p(t.u), grad.g_pu.data(), cfg.optimizer, step);
        state_q.apply_update(t.i, params.q(t.i), grad.g_qi.data(), cfg.optimizer, step);
        state_q.apply_update(t.j, params.q(t.j), grad.g_qj.data(), cfg.optimizer, step);
        if (params.has_bias()) {
          state_b.apply_update(t.i, &params.b[t.i], &grad.g_bi, cfg.optimizer, step);
          state_b.apply_update(t.j, &params.b[t.j], &grad.g_bj, cfg.optimizer, step);
        }
      } catch (const NumericsError& e) {
        throw NumericsError(std::string(e.what()) + " at epoch " + std::to_string(epoch));
      }
      ++step;
      if (track_momentum && step % 1000 == 0) {
        record_momentum<Real>({&state_p, &state_q, &state_b}, telemetry, step);
      }
    }

    if (epoch % cfg.eval_every == 0) {
      const double value = evaluate_monitor(params, bundle.validation, cfg.monitor);
      record.validation_trace.emplace_back(epoch, value);
      if (stopper.observe(value)) {
        best_params = params;
        best_epoch = epoch;
      }
      if (stopper.should_stop()) break;
    }
  }

  if (record.validation_trace.empty()) {
    const double value = evaluate_monitor(params, bundle.validation, cfg.monitor);
    record.validation_trace.emplace_back(cfg.max_epochs, value);
    stopper.observe(value);
    best_params = params;
    best_epoch = cfg.max_epochs;
  }

  record.best_epoch = best_epoch;
  record.best_value = stopper.best_value();
  record.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  TrainResult result;
  result.params = to_double(best_params);
  result.record = std::move(record);
  result.telemetry = std::move(telemetry);
  return result;
}

// Dispatches on the precision flag; checkpoint-facing params are always f64.
TrainResult train(const SplitBundle& bundle, const TrainConfig& cfg);

std::string config_signature(const TrainConfig& cfg);

// Table-2-style feature axes for the sequential ablation protocol.
struct AblationAxes {
  std::vector<bool> bias_values = {false, true};
  std::vector<RegVariant> reg_variants = {RegVariant::none, RegVariant::shared,
                                          RegVariant::user_item, RegVariant::separate};
  std::vector<OptimizerKind> optimizer_kinds = {OptimizerKind::sgd, OptimizerKind::momentum_sgd,
                                                OptimizerKind::rmsprop, OptimizerKind::adam};
  std::vector<SamplerKind> sampler_kinds = {SamplerKind::uniform, SamplerKind::adaptive};
};

// Phase 1 crosses bias × regularization with the base optimizer and uniform
// sampling; the winner (by best validation monitor) carries into the
// optimizer phase, and that winner into the sampler phase. Every cell emits
// a record; a cell whose resolved config duplicates an earlier one (or an
// entry of `completed`, for crash resume) reuses that result instead of
// retraining. Failed cells are recorded and skipped for winner selection.
std::vector<RunRecord> run_ablation_grid(
    const SplitBundle& bundle, const TrainConfig& base, const AblationAxes& axes,
    const EvalConfig& eval_cfg,
    const std::function<void(const RunRecord&)>& on_record = nullptr,
    const std::vector<RunRecord>& completed = {});

struct LogUniform {
  double lo = 0;
  double hi = 0;
};

struct SearchSpace {
  LogUniform learning_rate{1e-3, 0.5};
  LogUniform lambda{1e-6, 0.1};
  std::pair<double, double> beta1_range{0.0, 0.9};  // linear; spans both decay regimes
  std::vector<bool> bias_choices = {false, true};
  std::vector<RegVariant> reg_choices = {RegVariant::none, RegVariant::shared,
                                         RegVariant::user_item, RegVariant::separate};
  std::vector<OptimizerKind> optimizer_choices = {OptimizerKind::sgd, OptimizerKind::momentum_sgd,
                                                  OptimizerKind::rmsprop, OptimizerKind::adam};
  std::vector<SamplerKind> sampler_choices = {SamplerKind::uniform, SamplerKind::adaptive};
  std::uint32_t budget = 16;
  std::uint32_t stage1_epochs = 70;
  std::uint32_t stage2_epochs = 1000;

  void validate() const;
};

struct SearchResult {
  std::vector<RunRecord> trials;  // no test metrics; trials never see test
  RunRecord final_record;
  TrainConfig best_config;
  ModelParams<double> params;
};

// Two-stage seeded random search: trials run on an inner split carved out of
// bundle.train with the bundle's own split recipe, the winning config is
// retrained on the full training split at stage-2 epochs, and only that
// final model touches the test split.
SearchResult hyperparameter_search(const SplitBundle& bundle, const SearchSpace& space,
                                   const TrainConfig& base, std::uint64_t seed,
                                   const EvalConfig& eval_cfg);

void append_run_record(const RunRecord& record, const std::filesystem::path& jsonl_path);
std::vector<RunRecord> read_run_records(const std::filesystem::path& jsonl_path);

}  // namespace bpr
