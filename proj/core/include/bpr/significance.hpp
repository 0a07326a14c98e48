#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "bpr/eval.hpp"

namespace bpr {

// Continued-fraction evaluation of I_x(a, b); |error| < ~1e-14 over the
// domain used here.
double regularized_incomplete_beta(double a, double b, double x);

// Two-sided P(|T_df| >= |t|) via I_{df/(df+t²)}(df/2, 1/2).
double student_t_two_sided_p(double t, double df);

struct SignificanceResult {
  std::string metric;
  std::size_t pairs = 0;     // users entering the test (NaN pairs dropped)
  double mean_diff = 0;
  double t = 0;
  double df = 0;
  double p_raw = 1;
  double p_adjusted = 1;
  bool significant = false;
  bool degenerate = false;   // zero-variance differences with nonzero mean
};

// Paired two-sided t-test per metric on per-user differences a - b, with
// Bonferroni adjustment p_adj = min(1, p_raw * comparisons). All zero diffs
// give p = 1; zero variance around a nonzero mean gives p = 0 and sets the
// degenerate flag. `comparisons` is always caller-supplied.
std::vector<SignificanceResult> paired_significance(const MetricsReport& a,
                                                    const MetricsReport& b,
                                                    std::size_t comparisons);

void write_significance_json(const std::vector<SignificanceResult>& results,
                             const std::string& label_a, const std::string& label_b,
                             std::size_t comparisons, const std::filesystem::path& path);

}  // namespace bpr
