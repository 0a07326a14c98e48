#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "bpr/train.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string output;
};

// Runs the installed binary with BPR_OUTPUT_ROOT scrubbed unless the caller
// provides an explicit environment prefix.
CliResult run_cli(const std::string& args, const fs::path& scratch,
                  const std::string& env = "") {
  const fs::path out_file = scratch / "cli-output.txt";
  std::string command = "env -u BPR_OUTPUT_ROOT ";
  if (!env.empty()) command += env + " ";
  command += std::string(BPR_CLI_PATH) + " " + args + " > " + out_file.string() + " 2>&1";

  const int status = std::system(command.c_str());
  CliResult result;
  if (WIFEXITED(status)) result.code = WEXITSTATUS(status);
  std::ifstream in(out_file);
  std::stringstream buffer;
  buffer << in.rdbuf();
  result.output = buffer.str();
  return result;
}

// 24 users with 6 events each over 12 items, dense after default filtering.
fs::path write_events(const fs::path& dir) {
  const fs::path path = dir / "events.tsv";
  std::ofstream out(path);
  for (int u = 0; u < 24; ++u) {
    for (int k = 0; k < 6; ++k) {
      out << "u" << u << "\ti" << ((u + k) % 12) << "\t" << (100 + k) << "\n";
    }
  }
  return path;
}

}  // namespace

TEST_CASE("help and usage errors use the documented exit codes") {
  testutil::TempDir dir;
  CliResult help = run_cli("--help", dir.path());
  CHECK(help.code == 0);
  CHECK(help.output.find("preprocess") != std::string::npos);
  CHECK(help.output.find("significance") != std::string::npos);

  CliResult bare = run_cli("", dir.path());
  CHECK(bare.code == 2);
  CHECK(bare.output.find("preprocess") != std::string::npos);

  CliResult unknown = run_cli("train --no-such-flag", dir.path());
  CHECK(unknown.code == 2);

  CliResult badsub = run_cli("frobnicate", dir.path());
  CHECK(badsub.code == 2);
}

TEST_CASE("preprocess writes stats and a six-file split, deterministically") {
  testutil::TempDir dir;
  const fs::path events = write_events(dir.path());
  const fs::path root = dir / "out";

  const std::string args = "preprocess --data.path " + events.string() +
                           " --data.layout uit --split.heldout-users 2 --output-root " +
                           root.string() + " --run-name prep --seed 9";
  CliResult first = run_cli(args, dir.path());
  CHECK(first.code == 0);

  const fs::path run = root / "prep";
  CHECK(fs::exists(run / "stats.json"));
  CHECK(fs::exists(run / "manifest.json"));
  for (const char* name :
       {"train.tsv", "validation.tsv", "test.tsv", "users.tsv", "items.tsv", "split.json"}) {
    CHECK(fs::exists(run / "split" / name));
  }

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string train_once = slurp(run / "split" / "train.tsv");

  CliResult second = run_cli(args, dir.path());
  CHECK(second.code == 0);
  CHECK(slurp(run / "split" / "train.tsv") == train_once);
}

TEST_CASE("config and data problems map to exit codes 2 and 3") {
  testutil::TempDir dir;
  const fs::path events = write_events(dir.path());

  CliResult bad_protocol =
      run_cli("preprocess --data.path " + events.string() +
                  " --data.layout uit --split.protocol sideways --output-root " +
                  (dir / "x").string(),
              dir.path());
  CHECK(bad_protocol.code == 2);

  CliResult missing = run_cli("preprocess --data.path " + (dir / "absent.tsv").string() +
                                  " --output-root " + (dir / "y").string(),
                              dir.path());
  CHECK(missing.code == 3);
  CHECK(missing.output.find("data error") != std::string::npos);
}

TEST_CASE("the full train, evaluate, significance pipeline runs end to end") {
  testutil::TempDir dir;
  const fs::path events = write_events(dir.path());
  const fs::path root = dir / "out";

  REQUIRE(run_cli("preprocess --data.path " + events.string() +
                      " --data.layout uit --split.heldout-users 2 --output-root " + root.string() +
                      " --run-name prep --seed 9",
                  dir.path())
              .code == 0);
  const std::string split_dir = (root / "prep" / "split").string();

  CliResult trained = run_cli("train --split-dir " + split_dir + " --output-root " +
                                  root.string() +
                                  " --run-name tr --train.f 8 --train.max-epochs 3 "
                                  "--train.lr 0.1 --train.monitor ndcg@5 --eval.k 5,10 --seed 7",
                              dir.path());
  CHECK(trained.code == 0);
  CHECK(trained.output.find("best epoch") != std::string::npos);

  const fs::path ckpt = root / "tr" / "checkpoints" / "model.ckpt";
  REQUIRE(fs::exists(ckpt));
  CHECK(fs::exists(ckpt.string() + ".json"));

  auto records = bpr::read_run_records(root / "tr" / "records.jsonl");
  REQUIRE(records.size() == 1);
  CHECK(records[0].status == "complete");
  CHECK(records[0].name == "train");
  CHECK(records[0].test_metrics.count("ndcg@5") == 1);

  CliResult evaluated = run_cli("evaluate --split-dir " + split_dir + " --output-root " +
                                    root.string() + " --run-name ev --checkpoint " +
                                    ckpt.string() + " --itempop --comparisons 3 --eval.k 5,10",
                                dir.path());
  CHECK(evaluated.code == 0);
  CHECK(evaluated.output.find("model:") != std::string::npos);
  CHECK(evaluated.output.find("itempop:") != std::string::npos);

  const fs::path eval_dir = root / "ev" / "eval";
  CHECK(fs::exists(eval_dir / "model.csv"));
  CHECK(fs::exists(eval_dir / "itempop.csv"));
  CHECK(fs::exists(eval_dir / "significance-model-vs-itempop.json"));
  CHECK(fs::exists(eval_dir / "significance.json"));

  CliResult sig = run_cli("significance --a " + (eval_dir / "model.csv").string() + " --b " +
                              (eval_dir / "itempop.csv").string() + " --comparisons 3 --out " +
                              (dir / "sig.json").string(),
                          dir.path());
  CHECK(sig.code == 0);
  CHECK(sig.output.find("p_adjusted") != std::string::npos);
  CHECK(fs::exists(dir / "sig.json"));

  // A model against itself has identically zero differences.
  CliResult self = run_cli("significance --a " + (eval_dir / "model.csv").string() + " --b " +
                               (eval_dir / "model.csv").string() + " --comparisons 1",
                           dir.path());
  CHECK(self.code == 0);
  CHECK(self.output.find("\"p_raw\": 1.0") != std::string::npos);

  CliResult no_models = run_cli("evaluate --split-dir " + split_dir + " --output-root " +
                                    root.string() + " --run-name ev2",
                                dir.path());
  CHECK(no_models.code == 2);

  CliResult no_comparisons = run_cli("evaluate --split-dir " + split_dir + " --output-root " +
                                         root.string() +
                                         " --run-name ev3 --itempop --ease --ease-l2 5",
                                     dir.path());
  CHECK(no_comparisons.code == 2);

  CliResult gone = run_cli("evaluate --split-dir " + split_dir + " --output-root " +
                               root.string() + " --run-name ev4 --checkpoint " +
                               (dir / "nope.ckpt").string(),
                           dir.path());
  CHECK(gone.code == 3);
}

TEST_CASE("search writes trials plus a final record and the best checkpoint") {
  testutil::TempDir dir;
  const fs::path events = write_events(dir.path());
  const fs::path root = dir / "out";

  REQUIRE(run_cli("preprocess --data.path " + events.string() +
                      " --data.layout uit --split.heldout-users 2 --output-root " + root.string() +
                      " --run-name prep --seed 9",
                  dir.path())
              .code == 0);

  CliResult searched = run_cli(
      "search --split-dir " + (root / "prep" / "split").string() + " --output-root " +
          root.string() +
          " --run-name se --train.f 4 --search.budget 2 --search.stage1-epochs 2 "
          "--search.stage2-epochs 2 --search.optimizers sgd --search.samplers uniform "
          "--search.regs shared --search.biases off --seed 3",
      dir.path());
  CHECK(searched.code == 0);

  auto trials = bpr::read_run_records(root / "se" / "search" / "trials.jsonl");
  REQUIRE(trials.size() == 3);
  CHECK(trials[0].name == "trial-0");
  CHECK(trials[1].name == "trial-1");
  CHECK(trials[2].name == "final");
  CHECK(trials[0].test_metrics.empty());
  CHECK(trials[1].test_metrics.empty());
  CHECK_FALSE(trials[2].test_metrics.empty());
  CHECK(fs::exists(root / "se" / "search" / "best.ckpt"));
}

TEST_CASE("numerics failures exit with code 4") {
  testutil::TempDir dir;
  const fs::path events = write_events(dir.path());
  const fs::path root = dir / "out";

  REQUIRE(run_cli("preprocess --data.path " + events.string() +
                      " --data.layout uit --split.heldout-users 2 --output-root " + root.string() +
                      " --run-name prep --seed 9",
                  dir.path())
              .code == 0);

  CliResult blown = run_cli("train --split-dir " + (root / "prep" / "split").string() +
                                " --output-root " + root.string() +
                                " --run-name boom --train.lr 1e200 --train.reg none "
                                "--train.max-epochs 2 --train.f 8",
                            dir.path());
  CHECK(blown.code == 4);
  CHECK(blown.output.find("numerics error") != std::string::npos);
}

TEST_CASE("the output root falls back to the environment variable") {
  testutil::TempDir dir;
  const fs::path events = write_events(dir.path());
  const fs::path env_root = dir / "from-env";

  CliResult via_env = run_cli("preprocess --data.path " + events.string() +
                                  " --data.layout uit --split.heldout-users 2 --seed 9",
                              dir.path(), "BPR_OUTPUT_ROOT=" + env_root.string());
  CHECK(via_env.code == 0);
  CHECK(fs::exists(env_root / "run" / "stats.json"));

  // An explicit flag wins over the environment.
  const fs::path flag_root = dir / "from-flag";
  CliResult via_flag = run_cli("preprocess --data.path " + events.string() +
                                   " --data.layout uit --split.heldout-users 2 --seed 9 "
                                   "--output-root " +
                                   flag_root.string(),
                               dir.path(), "BPR_OUTPUT_ROOT=" + (dir / "ignored").string());
  CHECK(via_flag.code == 0);
  CHECK(fs::exists(flag_root / "run" / "stats.json"));
  CHECK_FALSE(fs::exists(dir / "ignored"));
}

TEST_CASE("INI config files feed options with flags taking precedence") {
  testutil::TempDir dir;
  const fs::path events = write_events(dir.path());
  const fs::path ini_root = dir / "from-ini";

  const fs::path ini = dir / "exp.ini";
  {
    std::ofstream out(ini);
    out << "output-root = " << ini_root.string() << "\n"
        << "run-name = cfg\n"
        << "seed = 9\n"
        << "[data]\n"
        << "path = " << events.string() << "\n"
        << "layout = uit\n"
        << "[split]\n"
        << "heldout-users = 2\n";
  }

  CliResult from_file = run_cli("preprocess --config " + ini.string(), dir.path());
  CHECK(from_file.code == 0);
  CHECK(fs::exists(ini_root / "cfg" / "stats.json"));

  const fs::path flag_root = dir / "flag-wins";
  CliResult overridden = run_cli(
      "preprocess --config " + ini.string() + " --output-root " + flag_root.string(), dir.path());
  CHECK(overridden.code == 0);
  CHECK(fs::exists(flag_root / "cfg" / "stats.json"));
}

TEST_CASE("stats prints raw and filtered dataset summaries") {
  testutil::TempDir dir;
  const fs::path events = write_events(dir.path());
  CliResult stats =
      run_cli("stats --data.path " + events.string() + " --data.layout uit", dir.path());
  CHECK(stats.code == 0);
  CHECK(stats.output.find("\"raw\"") != std::string::npos);
  CHECK(stats.output.find("\"filtered\"") != std::string::npos);
  CHECK(stats.output.find("\"actions\"") != std::string::npos);
}
