#include <algorithm>
#include <array>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bpr/errors.hpp"
#include "bpr/experiment.hpp"

namespace {

// CLI11 resolves config sections against subcommands, but our option groups
// (data, split, train, eval, search) live on the root app as dotted names.
// Flatten those sections back into dotted keys so [data]\npath=... finds
// --data.path.
class GroupedIniConfig : public CLI::ConfigINI {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    static constexpr std::array<std::string_view, 5> kGroups = {"data", "split", "train", "eval",
                                                                "search"};
    std::vector<CLI::ConfigItem> items = CLI::ConfigINI::from_config(input);
    std::vector<CLI::ConfigItem> out;
    out.reserve(items.size());
    for (CLI::ConfigItem& item : items) {
      if (item.parents.size() == 1 &&
          std::find(kGroups.begin(), kGroups.end(), item.parents.front()) != kGroups.end()) {
        if (item.name == "++" || item.name == "--") continue;
        item.name = item.parents.front() + "." + item.name;
        item.parents.clear();
      }
      out.push_back(std::move(item));
    }
    return out;
  }
};

void add_experiment_options(CLI::App& app, bpr::ExperimentConfig& cfg, std::string& output_root,
                            std::string& split_dir) {
  app.add_option("--output-root", output_root, "Directory that receives run outputs")
      ->envname("BPR_OUTPUT_ROOT")
      ->capture_default_str();
  app.add_option("--run-name", cfg.run_name, "Subdirectory name for this run")
      ->capture_default_str();
  app.add_option("--seed", cfg.seed, "Root RNG seed; every component derives a named substream")
      ->capture_default_str();
  app.add_option("--split-dir", split_dir,
                 "Existing split directory (defaults to <run-dir>/split)");

  app.add_option("--data.path", cfg.data.path, "Event log (TSV/CSV, optionally .gz)");
  app.add_option("--data.layout", cfg.data.layout, "Column layout: ui|uir|uit|uirt|detect")
      ->capture_default_str();
  app.add_option("--data.delimiter", cfg.data.delimiter, "Field delimiter (char, 'tab', 'space')")
      ->capture_default_str();
  app.add_flag("--data.skip-header", cfg.data.skip_header, "Always skip the first line");
  app.add_option("--data.min-user", cfg.data.min_user_interactions,
                 "Drop users with fewer interactions")
      ->capture_default_str();
  app.add_option("--data.min-item", cfg.data.min_item_interactions,
                 "Drop items with fewer interactions")
      ->capture_default_str();
  app.add_option("--data.subsample-events", cfg.data.subsample_events,
                 "Keep random users until this many events (0 = off)")
      ->capture_default_str();

  app.add_option("--split.protocol", cfg.split.protocol, "user-based|temporal")
      ->capture_default_str();
  app.add_option("--split.heldout-users", cfg.split.n_heldout_users,
                 "Held-out users per eval split (user-based)")
      ->capture_default_str();
  app.add_option("--split.fold-in-fraction", cfg.split.fold_in_fraction,
                 "Fraction of a held-out user's events revealed at prediction time")
      ->capture_default_str();
  app.add_option("--split.test-window-years", cfg.split.test_window_years,
                 "Trailing test window (temporal)")
      ->capture_default_str();
  app.add_option("--split.val-window-years", cfg.split.val_window_years,
                 "Validation window before the test window (temporal)")
      ->capture_default_str();

  app.add_option("--train.f", cfg.train.f, "Embedding dimension")->capture_default_str();
  app.add_flag("--train.item-bias", cfg.train.use_item_bias, "Add per-item bias terms");
  app.add_option("--train.reg", cfg.train.reg, "none|shared|user_item|separate")
      ->capture_default_str();
  app.add_option("--train.lambda", cfg.train.lambda, "Shared regularization strength")
      ->capture_default_str();
  app.add_option("--train.lambda-u", cfg.train.lambda_u, "User-factor regularization")
      ->capture_default_str();
  app.add_option("--train.lambda-i", cfg.train.lambda_i, "Positive-item regularization")
      ->capture_default_str();
  app.add_option("--train.lambda-j", cfg.train.lambda_j, "Negative-item regularization")
      ->capture_default_str();
  app.add_option("--train.lambda-b", cfg.train.lambda_b, "Item-bias regularization")
      ->capture_default_str();
  app.add_option("--train.optimizer", cfg.train.optimizer, "sgd|momentum_sgd|rmsprop|adam")
      ->capture_default_str();
  app.add_option("--train.lr", cfg.train.learning_rate, "Learning rate")->capture_default_str();
  app.add_option("--train.beta", cfg.train.beta, "Momentum decay")->capture_default_str();
  app.add_option("--train.rho", cfg.train.rho, "RMSProp decay")->capture_default_str();
  app.add_option("--train.beta1", cfg.train.beta1, "Adam first-moment decay")
      ->capture_default_str();
  app.add_option("--train.beta2", cfg.train.beta2, "Adam second-moment decay")
      ->capture_default_str();
  app.add_option("--train.eps", cfg.train.eps, "Adam/RMSProp epsilon")->capture_default_str();
  app.add_option("--train.sampler", cfg.train.sampler, "uniform|adaptive")->capture_default_str();
  app.add_option("--train.rank-temperature", cfg.train.rank_temperature,
                 "Adaptive rank temperature (0 = item_count/100)")
      ->capture_default_str();
  app.add_option("--train.refresh-interval", cfg.train.refresh_interval,
                 "Adaptive refresh interval in triples (0 = one epoch)")
      ->capture_default_str();
  app.add_option("--train.max-epochs", cfg.train.max_epochs, "Epoch budget")
      ->capture_default_str();
  app.add_option("--train.patience", cfg.train.patience,
                 "Consecutive non-improving evaluations before stopping")
      ->capture_default_str();
  app.add_option("--train.eval-every", cfg.train.eval_every, "Epochs between evaluations")
      ->capture_default_str();
  app.add_option("--train.monitor", cfg.train.monitor, "ndcg@K or auc")->capture_default_str();
  app.add_option("--train.init-std", cfg.train.init_std, "Init normal stddev")
      ->capture_default_str();
  app.add_option("--train.bias-init", cfg.train.bias_init, "Initial bias value")
      ->capture_default_str();
  app.add_flag("--train.float32", cfg.train.float32, "Train in 32-bit precision");

  app.add_option("--eval.k", cfg.eval.k_list, "Ranking cutoffs")
      ->delimiter(',')
      ->capture_default_str();
  app.add_flag("!--eval.no-auc", cfg.eval.with_auc, "Skip AUC");
  app.add_option("--eval.threads", cfg.eval.threads, "Evaluation worker threads")
      ->capture_default_str();

  app.add_option("--search.budget", cfg.search.budget, "Random-search trials")
      ->capture_default_str();
  app.add_option("--search.stage1-epochs", cfg.search.stage1_epochs, "Trial epoch budget")
      ->capture_default_str();
  app.add_option("--search.stage2-epochs", cfg.search.stage2_epochs, "Retrain epoch budget")
      ->capture_default_str();
  app.add_option("--search.lr-lo", cfg.search.lr_lo, "Learning-rate range low end")
      ->capture_default_str();
  app.add_option("--search.lr-hi", cfg.search.lr_hi, "Learning-rate range high end")
      ->capture_default_str();
  app.add_option("--search.lambda-lo", cfg.search.lambda_lo, "Regularization range low end")
      ->capture_default_str();
  app.add_option("--search.lambda-hi", cfg.search.lambda_hi, "Regularization range high end")
      ->capture_default_str();
  app.add_option("--search.beta1-lo", cfg.search.beta1_lo, "Adam beta1 range low end")
      ->capture_default_str();
  app.add_option("--search.beta1-hi", cfg.search.beta1_hi, "Adam beta1 range high end")
      ->capture_default_str();
  app.add_option("--search.regs", cfg.search.regs, "Regularization schemes to draw from")
      ->capture_default_str();
  app.add_option("--search.optimizers", cfg.search.optimizers, "Optimizers to draw from")
      ->capture_default_str();
  app.add_option("--search.samplers", cfg.search.samplers, "Samplers to draw from")
      ->capture_default_str();
  app.add_option("--search.biases", cfg.search.biases, "Bias switch values to draw from")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Matrix-factorization recommender with the BPR pairwise criterion"};
  app.set_config("--config", "", "INI config file; sections map to dotted option groups");
  app.config_formatter(std::make_shared<GroupedIniConfig>());
  app.require_subcommand(0, 1);

  bpr::ExperimentConfig cfg;
  std::string output_root = "runs";
  std::string split_dir;
  add_experiment_options(app, cfg, output_root, split_dir);

  CLI::App* preprocess = app.add_subcommand("preprocess", "Ingest, filter and split a dataset");
  CLI::App* train = app.add_subcommand("train", "Train one configuration");
  CLI::App* ablate = app.add_subcommand("ablate", "Run the sequential feature-ablation grid");
  CLI::App* search = app.add_subcommand("search", "Two-stage random hyperparameter search");
  CLI::App* stats = app.add_subcommand("stats", "Print dataset statistics");
  CLI::App* evaluate = app.add_subcommand("evaluate", "Score checkpoints and baselines");
  CLI::App* significance = app.add_subcommand("significance", "Paired t-test on per-user CSVs");
  for (CLI::App* sub : {preprocess, train, ablate, search, stats, evaluate, significance}) {
    sub->fallthrough();
  }

  bpr::EvaluateArgs eval_args;
  std::vector<std::string> checkpoint_args;
  evaluate->add_option("--checkpoint", checkpoint_args, "Checkpoint file (repeatable)");
  evaluate->add_flag("--itempop", eval_args.with_itempop, "Include the popularity baseline");
  evaluate->add_flag("--ease", eval_args.with_ease, "Include the EASE baseline");
  evaluate->add_option("--ease-l2", eval_args.ease_l2, "EASE ridge strength")
      ->capture_default_str();
  evaluate->add_option("--ease-cap", eval_args.ease_item_cap, "EASE item-count cap")
      ->capture_default_str();
  evaluate->add_option("--comparisons", eval_args.comparisons,
                       "Bonferroni comparison count (required for 2+ models)");
  evaluate->add_option("--target", eval_args.target, "test|validation")->capture_default_str();

  bpr::SignificanceArgs sig_args;
  std::string sig_a, sig_b, sig_out;
  significance->add_option("--a", sig_a, "Per-user CSV of the first model")->required();
  significance->add_option("--b", sig_b, "Per-user CSV of the second model")->required();
  significance->add_option("--comparisons", sig_args.comparisons,
                           "Bonferroni comparison count")
      ->required();
  significance->add_option("--out", sig_out, "Also write the JSON result here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  cfg.output_root = output_root;
  cfg.split_dir = split_dir;

  try {
    if (app.got_subcommand(preprocess)) return bpr::cmd_preprocess(cfg);
    if (app.got_subcommand(train)) return bpr::cmd_train(cfg);
    if (app.got_subcommand(ablate)) return bpr::cmd_ablate(cfg);
    if (app.got_subcommand(search)) return bpr::cmd_search(cfg);
    if (app.got_subcommand(stats)) return bpr::cmd_stats(cfg);
    if (app.got_subcommand(evaluate)) {
      for (const std::string& path : checkpoint_args) eval_args.checkpoints.emplace_back(path);
      return bpr::cmd_evaluate(cfg, eval_args);
    }
    if (app.got_subcommand(significance)) {
      sig_args.csv_a = sig_a;
      sig_args.csv_b = sig_b;
      sig_args.output = sig_out;
      return bpr::cmd_significance(sig_args);
    }
    std::cerr << app.help() << '\n';
    return 2;
  } catch (const bpr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const bpr::NumericsError& e) {
    std::cerr << "numerics error: " << e.what() << '\n';
    return 4;
  } catch (const bpr::AlignmentError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const bpr::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const bpr::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return 1;
  }
}
