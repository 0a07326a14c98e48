#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "bpr/interaction_log.hpp"
#include "bpr/model.hpp"
#include "bpr/split.hpp"

namespace bpr {

// Items sorted by score descending, minus `exclude`, truncated to n. Ties
// break by ascending item index so rankings are deterministic.
std::vector<std::uint32_t> rank_topn(const std::vector<double>& scores,
                                     const std::vector<std::uint32_t>& exclude_sorted,
                                     std::size_t n);

// DCG/IDCG with binary relevance and log2(k+1) discounts.
double ndcg_at_k(const std::vector<std::uint32_t>& ranked,
                 const std::vector<std::uint32_t>& targets_sorted, std::size_t k);

// |top-K ∩ targets| / min(K, |targets|).
double recall_at_k(const std::vector<std::uint32_t>& ranked,
                   const std::vector<std::uint32_t>& targets_sorted, std::size_t k);

// Mean pair indicator over (i ∈ targets, j ∉ targets ∪ excluded); ties count
// 0.5. Returns NaN when no negative candidate exists (caller skips the user).
double auc_from_scores(const std::vector<double>& scores,
                       const std::vector<std::uint32_t>& targets_sorted,
                       const std::vector<std::uint32_t>& excluded_sorted);

// Anything that can score every item for an evaluation user. fold_in is the
// user's visible history; factor models ignore it and use the user row.
struct Scorer {
  virtual ~Scorer() = default;
  virtual std::uint32_t item_count() const = 0;
  virtual void score_user(const EvalUser& user, std::vector<double>& out) const = 0;
};

class ModelScorer final : public Scorer {
public:
  explicit ModelScorer(const ModelParams<double>& params) : params_(params) {}
  std::uint32_t item_count() const override { return params_.item_count; }
  void score_user(const EvalUser& user, std::vector<double>& out) const override {
    score_all_items(params_, user.user, out);
  }

private:
  const ModelParams<double>& params_;
};

// Non-personalized popularity baseline: score = training interaction count.
struct ItemPopModel final : Scorer {
  std::vector<double> popularity;

  std::uint32_t item_count() const override {
    return static_cast<std::uint32_t>(popularity.size());
  }
  void score_user(const EvalUser&, std::vector<double>& out) const override { out = popularity; }
};

ItemPopModel fit_itempop(const InteractionLog& train);

// Item-item weights with zero diagonal from the closed-form ridge solution
// B = I − P·diag(1/diag(P)), P = (XᵀX + λI)⁻¹. Scores are x_u·B over the
// fold-in history.
struct EaseModel final : Scorer {
  std::uint32_t items = 0;
  double l2 = 0;
  std::vector<double> B;  // items x items, row-major

  std::uint32_t item_count() const override { return items; }
  void score_user(const EvalUser& user, std::vector<double>& out) const override;
};

// item_cap bounds the dense item×item system; the estimated allocation is
// printed to diag before any allocation happens.
EaseModel fit_ease(const InteractionLog& train, double l2, std::uint32_t item_cap = 40000,
                   std::ostream* diag = nullptr);

struct EvalConfig {
  std::vector<std::size_t> k_list = {5, 10, 100};
  bool with_auc = true;
  unsigned threads = 1;
};

// Per-user metric table plus arithmetic-mean aggregates. `users` is the
// alignment key shared by paired reports; NaN marks a user skipped for that
// metric (AUC with no negative candidates) and is excluded from the mean.
struct MetricsReport {
  std::vector<std::uint32_t> users;
  std::map<std::string, std::vector<double>> per_user;
  std::map<std::string, double> aggregates;
  std::vector<std::size_t> k_list;
};

MetricsReport evaluate_split(const Scorer& scorer, const EvalSplit& split, const EvalConfig& cfg);

void write_metrics_report(const MetricsReport& report, const std::filesystem::path& json_path);
void write_per_user_csv(const MetricsReport& report, const std::filesystem::path& csv_path);
MetricsReport read_per_user_csv(const std::filesystem::path& csv_path);

double mean_ignoring_nan(const std::vector<double>& values);

}  // namespace bpr
