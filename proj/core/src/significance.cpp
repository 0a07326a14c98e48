#include "bpr/significance.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "bpr/errors.hpp"

namespace bpr {

namespace {

// Lentz's algorithm for the continued fraction in I_x(a, b).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw NumericsError("incomplete beta continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0) || !(b > 0)) throw ConfigError("beta parameters must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0)) throw ConfigError("degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  return regularized_incomplete_beta(df / 2.0, 0.5, x);
}

std::vector<SignificanceResult> paired_significance(const MetricsReport& a,
                                                    const MetricsReport& b,
                                                    std::size_t comparisons) {
  if (a.users != b.users) {
    throw AlignmentError("metric reports cover different user sets and cannot be paired");
  }
  if (a.users.size() < 2) throw ConfigError("paired test needs at least 2 users");
  if (comparisons < 1) throw ConfigError("comparisons must be at least 1");

  std::vector<SignificanceResult> results;
  for (const auto& [metric, values_a] : a.per_user) {
    const auto it = b.per_user.find(metric);
    if (it == b.per_user.end()) continue;
    const auto& values_b = it->second;

    std::vector<double> diffs;
    diffs.reserve(values_a.size());
    for (std::size_t n = 0; n < values_a.size(); ++n) {
      const bool nan_a = std::isnan(values_a[n]);
      const bool nan_b = std::isnan(values_b[n]);
      if (nan_a != nan_b) {
        throw AlignmentError("metric '" + metric + "' skips different users in the two reports");
      }
      if (!nan_a) diffs.push_back(values_a[n] - values_b[n]);
    }

    SignificanceResult r;
    r.metric = metric;
    r.pairs = diffs.size();
    if (diffs.size() < 2) {
      r.degenerate = true;
      results.push_back(r);
      continue;
    }
    r.df = double(diffs.size() - 1);

    double mean = 0;
    for (double d : diffs) mean += d;
    mean /= double(diffs.size());
    double ss = 0;
    for (double d : diffs) ss += (d - mean) * (d - mean);
    const double sd = std::sqrt(ss / r.df);
    r.mean_diff = mean;

    if (sd == 0.0) {
      if (mean == 0.0) {
        r.t = 0.0;
        r.p_raw = 1.0;
      } else {
        r.t = mean > 0 ? std::numeric_limits<double>::infinity()
                       : -std::numeric_limits<double>::infinity();
        r.p_raw = 0.0;
        r.degenerate = true;
      }
    } else {
      r.t = mean / (sd / std::sqrt(double(diffs.size())));
      r.p_raw = student_t_two_sided_p(r.t, r.df);
    }
    r.p_adjusted = std::min(1.0, r.p_raw * double(comparisons));
    r.significant = r.p_adjusted < 0.05;
    results.push_back(r);
  }
  return results;
}

void write_significance_json(const std::vector<SignificanceResult>& results,
                             const std::string& label_a, const std::string& label_b,
                             std::size_t comparisons, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  nlohmann::json doc;
  doc["a"] = label_a;
  doc["b"] = label_b;
  doc["comparisons"] = comparisons;
  for (const SignificanceResult& r : results) {
    nlohmann::json row;
    row["metric"] = r.metric;
    row["pairs"] = r.pairs;
    row["mean_diff"] = r.mean_diff;
    row["t"] = std::isfinite(r.t) ? nlohmann::json(r.t) : nlohmann::json(r.t > 0 ? "inf" : "-inf");
    row["df"] = r.df;
    row["p_raw"] = r.p_raw;
    row["p_adjusted"] = r.p_adjusted;
    row["significant"] = r.significant;
    row["degenerate"] = r.degenerate;
    doc["results"].push_back(row);
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace bpr
