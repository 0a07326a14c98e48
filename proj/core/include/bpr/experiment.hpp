#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bpr/eval.hpp"
#include "bpr/split.hpp"
#include "bpr/train.hpp"

namespace bpr {

struct DataOptions {
  std::string path;
  std::string layout = "detect";  // ui|uir|uit|uirt|detect
  std::string delimiter = "\t";
  bool skip_header = false;
  std::uint32_t min_user_interactions = 3;
  std::uint32_t min_item_interactions = 3;
  std::uint64_t subsample_events = 0;  // 0 = keep everything
};

struct SplitOptions {
  std::string protocol = "user-based";
  std::uint32_t n_heldout_users = 100;
  double fold_in_fraction = 0.8;
  double test_window_years = 3.0;
  double val_window_years = 1.0;
};

// CLI-facing train section; resolve_train() turns it into a TrainConfig.
struct TrainOptions {
  std::uint32_t f = 64;
  bool use_item_bias = false;
  std::string reg = "shared";
  double lambda = 0.01;    // shared strength
  double lambda_u = 0.01;
  double lambda_i = 0.01;
  double lambda_j = 0.01;
  double lambda_b = 0.01;
  std::string optimizer = "sgd";
  double learning_rate = 0.05;
  double beta = 0.9;
  double rho = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::string sampler = "uniform";
  double rank_temperature = 0.0;
  std::uint64_t refresh_interval = 0;
  std::uint32_t max_epochs = 100;
  std::uint32_t patience = 13;
  std::uint32_t eval_every = 1;
  std::string monitor = "ndcg@10";
  double init_std = 0.01;
  double bias_init = 0.0;
  bool float32 = false;
};

struct EvalOptions {
  std::vector<std::size_t> k_list = {5, 10, 100};
  bool with_auc = true;
  unsigned threads = 1;
};

struct SearchOptions {
  std::uint32_t budget = 16;
  std::uint32_t stage1_epochs = 70;
  std::uint32_t stage2_epochs = 1000;
  double lr_lo = 1e-3;
  double lr_hi = 0.5;
  double lambda_lo = 1e-6;
  double lambda_hi = 0.1;
  double beta1_lo = 0.0;
  double beta1_hi = 0.9;
  std::string regs = "none,shared,user_item,separate";
  std::string optimizers = "sgd,momentum_sgd,rmsprop,adam";
  std::string samplers = "uniform,adaptive";
  std::string biases = "off,on";
};

struct ExperimentConfig {
  DataOptions data;
  SplitOptions split;
  TrainOptions train;
  EvalOptions eval;
  SearchOptions search;
  std::filesystem::path output_root = "runs";
  std::string run_name = "run";
  std::uint64_t seed = 42;
  std::filesystem::path split_dir;  // defaults to <run_dir>/split

  std::filesystem::path run_dir() const { return output_root / run_name; }
  std::filesystem::path resolved_split_dir() const {
    return split_dir.empty() ? run_dir() / "split" : split_dir;
  }

  TrainConfig resolve_train() const;
  EvalConfig resolve_eval() const;
  SearchSpace resolve_search() const;

  // Cross-section consistency (monitor metric must be derivable from the
  // eval section); throws ConfigError with a field-specific message.
  void validate() const;
};

struct EvaluateArgs {
  std::vector<std::filesystem::path> checkpoints;
  bool with_itempop = false;
  bool with_ease = false;
  double ease_l2 = 100.0;
  std::uint32_t ease_item_cap = 40000;
  std::size_t comparisons = 0;  // required when more than one model is scored
  std::string target = "test";  // test|validation
};

struct SignificanceArgs {
  std::filesystem::path csv_a;
  std::filesystem::path csv_b;
  std::size_t comparisons = 1;
  std::filesystem::path output;  // optional; stdout always gets the JSON
};

int cmd_preprocess(const ExperimentConfig& cfg);
int cmd_stats(const ExperimentConfig& cfg);
int cmd_train(const ExperimentConfig& cfg);
int cmd_ablate(const ExperimentConfig& cfg);
int cmd_search(const ExperimentConfig& cfg);
int cmd_evaluate(const ExperimentConfig& cfg, const EvaluateArgs& args);
int cmd_significance(const SignificanceArgs& args);

// fnv1a64 over the file's bytes, hex-encoded; used for manifest input hashes.
std::string file_content_hash(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& path, const std::string& config_hash,
                    const std::vector<std::pair<std::string, std::string>>& input_hashes,
                    const std::vector<std::string>& artifacts, const std::string& status);

}  // namespace bpr
