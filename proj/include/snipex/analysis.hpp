#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "snipex/corpus.hpp"
#include "snipex/resolver.hpp"

namespace snipex::analysis {

// Final status per (snippet, interpreter) plus snippet metadata for the
// grouped analyses.
struct ResultSet {
  std::map<std::string, std::map<std::string, classifier::StatusCode>>
      by_snippet;  // snippet_id -> interpreter_id -> final status
  std::map<std::string, corpus::Snippet> meta;  // optional, keyed by snippet_id

  static ResultSet from_outcomes(
      const std::vector<resolver::ExecutionOutcome>& outcomes,
      const std::vector<corpus::Snippet>& snippets = {});
};

struct TruthTable {
  int64_t both = 0;
  int64_t first_only = 0;
  int64_t second_only = 0;
  int64_t neither = 0;
  int64_t excluded = 0;  // snippets missing either side

  int64_t total() const { return both + first_only + second_only + neither; }
};

struct RateReport {
  double first_rate = 0;        // percent
  double second_rate = 0;
  double overall_rate = 0;      // either interpreter
  double both_rate = 0;
  double first_not_second = 0;  // of first successes, percent failing second
  double second_not_first = 0;
};

struct StatusRow {
  std::string status;
  int64_t count = 0;
  double percent = 0;
};

struct CurvePoint {
  int64_t line_count = 0;  // max_line + 1 labels the pooled remainder
  double percent = 0;
  int64_t population = 0;
};

struct TrendPoint {
  std::string label;
  double midpoint_years = 0;
  double percent = 0;
  int64_t population = 0;
};

struct TrendReport {
  std::vector<TrendPoint> series;
  double slope = 0;  // percentage points per year
  double intercept = 0;
};

struct BootstrapResult {
  double mean_diff = 0;  // percentage points
  double ci_low = 0;
  double ci_high = 0;
  int64_t iterations = 0;
  uint64_t seed = 0;
};

struct Selector {
  enum class Kind { overall, single, first_only, second_only };
  Kind kind = Kind::overall;
  std::string first;   // interpreter id (single / pair selectors)
  std::string second;  // pair selectors only

  static Selector overall() { return {Kind::overall, "", ""}; }
  static Selector single(std::string interp) {
    return {Kind::single, std::move(interp), ""};
  }
};

struct GroupComparison {
  double group_rate = 0;      // percent, group with the property
  double rest_rate = 0;
  int64_t group_size = 0;
  int64_t rest_size = 0;
  BootstrapResult bootstrap;
  double ranksum_p = 0;
};

TruthTable truth_table(const ResultSet& results,
                       const std::pair<std::string, std::string>& pair);

RateReport rates(const TruthTable& table);

std::vector<StatusRow> status_distribution(const ResultSet& results,
                                           const std::string& interp);
std::vector<StatusRow> distribution_from_counts(
    const std::vector<std::pair<std::string, int64_t>>& counts, int64_t total);

std::vector<CurvePoint> line_count_curve(const ResultSet& results,
                                         const std::string& interp,
                                         int64_t max_line);

enum class TrendBin { yearly, monthly };
TrendReport trend(const ResultSet& results, const Selector& selector,
                  TrendBin bin = TrendBin::yearly);

BootstrapResult bootstrap_diff(const std::vector<bool>& group_a,
                               const std::vector<bool>& group_b,
                               int64_t iterations = 10000, uint64_t seed = 0);

double ranksum(const std::vector<double>& group_a,
               const std::vector<double>& group_b);

// Large-sample path (tie + continuity corrected normal approximation);
// ranksum() switches to it above combined size 20.
double ranksum_normal(const std::vector<double>& group_a,
                      const std::vector<double>& group_b);

enum class Split { accepted_vs_not, github_ref_vs_not };
GroupComparison group_compare(const ResultSet& results, Split split,
                              const Selector& selector,
                              int64_t iterations = 10000, uint64_t seed = 0);

// Closed-form two-pass OLS, exposed for direct use on (x, y) series.
std::pair<double, double> ols_fit(const std::vector<double>& x,
                                  const std::vector<double>& y);

// Plain-text tables mirroring the published layout.
std::string render_status_table(const std::vector<StatusRow>& first,
                                const std::vector<StatusRow>& second,
                                const std::string& first_name,
                                const std::string& second_name);
std::string render_truth_table(const TruthTable& table, const RateReport& r);

double round2(double v);

}  // namespace snipex::analysis
