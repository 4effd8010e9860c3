#include "snipex/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace snipex::analysis {

double round2(double v) { return std::round(v * 100.0) / 100.0; }

ResultSet ResultSet::from_outcomes(
    const std::vector<resolver::ExecutionOutcome>& outcomes,
    const std::vector<corpus::Snippet>& snippets) {
  ResultSet rs;
  for (const auto& o : outcomes)
    rs.by_snippet[o.snippet_id][o.interpreter_id] = o.final_status;
  for (const auto& s : snippets) rs.meta[s.snippet_id] = s;
  return rs;
}

namespace {

bool is_success(const classifier::StatusCode& code) {
  return code.numeric_id == 0;
}

// success under the selector; nullopt when required outcomes are missing
std::optional<bool> executable(
    const std::map<std::string, classifier::StatusCode>& outcomes,
    const Selector& sel) {
  switch (sel.kind) {
    case Selector::Kind::overall: {
      if (outcomes.empty()) return std::nullopt;
      for (const auto& [id, code] : outcomes)
        if (is_success(code)) return true;
      return false;
    }
    case Selector::Kind::single: {
      auto it = outcomes.find(sel.first);
      if (it == outcomes.end()) return std::nullopt;
      return is_success(it->second);
    }
    case Selector::Kind::first_only:
    case Selector::Kind::second_only: {
      auto a = outcomes.find(sel.first);
      auto b = outcomes.find(sel.second);
      if (a == outcomes.end() || b == outcomes.end()) return std::nullopt;
      bool sa = is_success(a->second), sb = is_success(b->second);
      return sel.kind == Selector::Kind::first_only ? (sa && !sb)
                                                    : (!sa && sb);
    }
  }
  return std::nullopt;
}

}  // namespace

TruthTable truth_table(const ResultSet& results,
                       const std::pair<std::string, std::string>& pair) {
  TruthTable t;
  for (const auto& [snippet_id, outcomes] : results.by_snippet) {
    auto a = outcomes.find(pair.first);
    auto b = outcomes.find(pair.second);
    if (a == outcomes.end() || b == outcomes.end()) {
      ++t.excluded;
      continue;
    }
    bool sa = is_success(a->second), sb = is_success(b->second);
    if (sa && sb) ++t.both;
    else if (sa) ++t.first_only;
    else if (sb) ++t.second_only;
    else ++t.neither;
  }
  return t;
}

RateReport rates(const TruthTable& t) {
  if (t.total() == 0) throw std::invalid_argument("empty truth table");
  double total = static_cast<double>(t.total());
  RateReport r;
  r.first_rate = (t.both + t.first_only) / total * 100.0;
  r.second_rate = (t.both + t.second_only) / total * 100.0;
  r.overall_rate = (t.both + t.first_only + t.second_only) / total * 100.0;
  r.both_rate = t.both / total * 100.0;
  int64_t first_success = t.both + t.first_only;
  int64_t second_success = t.both + t.second_only;
  r.first_not_second =
      first_success ? t.first_only / double(first_success) * 100.0 : 0.0;
  r.second_not_first =
      second_success ? t.second_only / double(second_success) * 100.0 : 0.0;
  return r;
}

std::vector<StatusRow> distribution_from_counts(
    const std::vector<std::pair<std::string, int64_t>>& counts,
    int64_t total) {
  std::vector<StatusRow> rows;
  for (const auto& [name, count] : counts)
    rows.push_back({name, count, total ? count / double(total) * 100.0 : 0.0});
  std::stable_sort(rows.begin(), rows.end(), [](auto& a, auto& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.status < b.status;
  });
  return rows;
}

std::vector<StatusRow> status_distribution(const ResultSet& results,
                                           const std::string& interp) {
  std::map<std::string, int64_t> counts;
  int64_t total = 0;
  for (const auto& [snippet_id, outcomes] : results.by_snippet) {
    auto it = outcomes.find(interp);
    if (it == outcomes.end()) continue;
    ++counts[it->second.name];
    ++total;
  }
  if (total == 0)
    throw std::invalid_argument("no results for interpreter " + interp);
  return distribution_from_counts({counts.begin(), counts.end()}, total);
}

std::vector<CurvePoint> line_count_curve(const ResultSet& results,
                                         const std::string& interp,
                                         int64_t max_line) {
  std::map<int64_t, std::pair<int64_t, int64_t>> bins;  // bin -> (succ, pop)
  for (const auto& [snippet_id, outcomes] : results.by_snippet) {
    auto it = outcomes.find(interp);
    if (it == outcomes.end()) continue;
    auto meta = results.meta.find(snippet_id);
    if (meta == results.meta.end()) continue;
    int64_t lc = meta->second.line_count;
    int64_t bin = lc <= max_line ? lc : max_line + 1;  // pooled remainder
    auto& [succ, pop] = bins[bin];
    ++pop;
    if (is_success(it->second)) ++succ;
  }
  std::vector<CurvePoint> curve;
  for (const auto& [bin, sp] : bins) {
    if (sp.second == 0) continue;
    curve.push_back({bin, sp.first / double(sp.second) * 100.0, sp.second});
  }
  return curve;
}

std::pair<double, double> ols_fit(const std::vector<double>& x,
                                  const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("need >= 2 points");
  double n = static_cast<double>(x.size());
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0) throw std::invalid_argument("degenerate regressor");
  double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

TrendReport trend(const ResultSet& results, const Selector& selector,
                  TrendBin bin) {
  struct Bin {
    int64_t succ = 0, pop = 0;
    double midpoint = 0;
  };
  std::map<std::string, Bin> bins;
  for (const auto& [snippet_id, outcomes] : results.by_snippet) {
    auto e = executable(outcomes, selector);
    if (!e) continue;
    auto meta = results.meta.find(snippet_id);
    if (meta == results.meta.end()) continue;
    auto t = meta->second.created_at;
    int year = utc_year(t);
    std::string label;
    double midpoint;
    if (bin == TrendBin::yearly) {
      label = std::to_string(year);
      midpoint = year + 0.5;
    } else {
      double fy = to_fractional_years(t);
      int month = static_cast<int>((fy - year) * 12);
      if (month > 11) month = 11;
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%04d-%02d", year, month + 1);
      label = buf;
      midpoint = year + (month + 0.5) / 12.0;
    }
    auto& b = bins[label];
    b.midpoint = midpoint;
    ++b.pop;
    if (*e) ++b.succ;
  }
  if (bins.size() < 2)
    throw std::invalid_argument("trend undefined: fewer than 2 bins");
  TrendReport report;
  std::vector<double> x, y;
  for (const auto& [label, b] : bins) {
    double pct = b.succ / double(b.pop) * 100.0;
    report.series.push_back({label, b.midpoint, pct, b.pop});
    x.push_back(b.midpoint);
    y.push_back(pct);
  }
  std::tie(report.slope, report.intercept) = ols_fit(x, y);
  return report;
}

namespace {

double percentile_interpolated(const std::vector<double>& sorted, double q) {
  double h = (sorted.size() - 1) * q;
  size_t lo = static_cast<size_t>(h);
  double frac = h - lo;
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac;
}

double success_rate(const std::vector<bool>& v) {
  int64_t s = std::count(v.begin(), v.end(), true);
  return s / double(v.size()) * 100.0;
}

}  // namespace

BootstrapResult bootstrap_diff(const std::vector<bool>& group_a,
                               const std::vector<bool>& group_b,
                               int64_t iterations, uint64_t seed) {
  if (group_a.empty() || group_b.empty())
    throw std::invalid_argument("bootstrap groups must be non-empty");
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");

  std::mt19937_64 rng(seed);
  // modulo draw keeps resampling identical across standard libraries
  auto resample_rate = [&rng](const std::vector<bool>& v) {
    size_t n = v.size();
    int64_t succ = 0;
    for (size_t i = 0; i < n; ++i)
      if (v[rng() % n]) ++succ;
    return succ / double(n) * 100.0;
  };

  std::vector<double> diffs;
  diffs.reserve(iterations);
  for (int64_t i = 0; i < iterations; ++i)
    diffs.push_back(resample_rate(group_a) - resample_rate(group_b));

  BootstrapResult r;
  r.iterations = iterations;
  r.seed = seed;
  r.mean_diff = std::accumulate(diffs.begin(), diffs.end(), 0.0) / iterations;
  std::sort(diffs.begin(), diffs.end());
  r.ci_low = percentile_interpolated(diffs, 0.025);
  r.ci_high = percentile_interpolated(diffs, 0.975);
  return r;
}

namespace {

std::vector<double> midranks(const std::vector<double>& sorted_pool) {
  std::vector<double> ranks(sorted_pool.size());
  size_t i = 0;
  while (i < sorted_pool.size()) {
    size_t j = i;
    while (j + 1 < sorted_pool.size() && sorted_pool[j + 1] == sorted_pool[i])
      ++j;
    double rank = (i + j) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[k] = rank;
    i = j + 1;
  }
  return ranks;
}

// counts k-subsets of ranks whose sum deviates from the mean at least as
// much as the observed statistic
void count_extreme(const std::vector<double>& ranks, size_t pos, size_t left,
                   double sum, double expected, double observed_dev,
                   int64_t& extreme, int64_t& total) {
  if (left == 0) {
    ++total;
    if (std::abs(sum - expected) >= observed_dev - 1e-9) ++extreme;
    return;
  }
  if (ranks.size() - pos < left) return;
  count_extreme(ranks, pos + 1, left - 1, sum + ranks[pos], expected,
                observed_dev, extreme, total);
  count_extreme(ranks, pos + 1, left, sum, expected, observed_dev, extreme,
                total);
}

}  // namespace

namespace {

struct RankedPool {
  std::vector<double> values;  // sorted
  std::vector<double> ranks;   // midranks, aligned with values
  double w = 0;                // rank sum of group a
  double expected = 0;
  size_t n1 = 0, n2 = 0;
};

RankedPool rank_pool(const std::vector<double>& group_a,
                     const std::vector<double>& group_b) {
  if (group_a.empty() || group_b.empty())
    throw std::invalid_argument("ranksum groups must be non-empty");
  RankedPool rp;
  rp.n1 = group_a.size();
  rp.n2 = group_b.size();
  size_t n = rp.n1 + rp.n2;

  std::vector<std::pair<double, int>> pool;  // (value, group)
  for (double v : group_a) pool.push_back({v, 0});
  for (double v : group_b) pool.push_back({v, 1});
  std::sort(pool.begin(), pool.end(),
            [](auto& a, auto& b) { return a.first < b.first; });
  rp.values.resize(n);
  for (size_t i = 0; i < n; ++i) rp.values[i] = pool[i].first;
  rp.ranks = midranks(rp.values);
  for (size_t i = 0; i < n; ++i)
    if (pool[i].second == 0) rp.w += rp.ranks[i];
  rp.expected = rp.n1 * (n + 1) / 2.0;
  return rp;
}

}  // namespace

double ranksum_normal(const std::vector<double>& group_a,
                      const std::vector<double>& group_b) {
  auto rp = rank_pool(group_a, group_b);
  size_t n = rp.n1 + rp.n2;
  double tie_term = 0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && rp.values[j + 1] == rp.values[i]) ++j;
    double t = j - i + 1.0;
    tie_term += t * t * t - t;
    i = j + 1;
  }
  double var = (double(rp.n1) * rp.n2 / 12.0) *
               ((n + 1) - tie_term / (double(n) * (n - 1)));
  if (var <= 0) return 1.0;
  double z = (std::abs(rp.w - rp.expected) - 0.5) / std::sqrt(var);
  if (z < 0) z = 0;
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

double ranksum(const std::vector<double>& group_a,
               const std::vector<double>& group_b) {
  auto rp = rank_pool(group_a, group_b);
  size_t n = rp.n1 + rp.n2;
  if (n > 20) return ranksum_normal(group_a, group_b);

  int64_t extreme = 0, total = 0;
  count_extreme(rp.ranks, 0, rp.n1, 0.0, rp.expected,
                std::abs(rp.w - rp.expected), extreme, total);
  return extreme / double(total);
}

GroupComparison group_compare(const ResultSet& results, Split split,
                              const Selector& selector, int64_t iterations,
                              uint64_t seed) {
  std::vector<bool> group, rest;
  for (const auto& [snippet_id, outcomes] : results.by_snippet) {
    auto e = executable(outcomes, selector);
    if (!e) continue;
    auto meta = results.meta.find(snippet_id);
    if (meta == results.meta.end()) continue;
    bool member = split == Split::accepted_vs_not
                      ? meta->second.is_accepted
                      : meta->second.github_ref_count > 0;
    (member ? group : rest).push_back(*e);
  }
  if (group.empty() || rest.empty())
    throw std::invalid_argument("empty comparison group");

  GroupComparison c;
  c.group_size = static_cast<int64_t>(group.size());
  c.rest_size = static_cast<int64_t>(rest.size());
  c.group_rate = success_rate(group);
  c.rest_rate = success_rate(rest);
  c.bootstrap = bootstrap_diff(group, rest, iterations, seed);
  std::vector<double> ga(group.begin(), group.end()),
      gb(rest.begin(), rest.end());
  c.ranksum_p = ranksum(ga, gb);
  return c;
}

std::string render_status_table(const std::vector<StatusRow>& first,
                                const std::vector<StatusRow>& second,
                                const std::string& first_name,
                                const std::string& second_name) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-24s %12s %8s   %-24s %12s %8s\n",
                first_name.c_str(), "Count", "%", second_name.c_str(),
                "Count", "%");
  out << line;
  size_t rows = std::max(first.size(), second.size());
  for (size_t i = 0; i < rows; ++i) {
    std::string n1 = i < first.size() ? first[i].status : "";
    std::string n2 = i < second.size() ? second[i].status : "";
    if (i < first.size())
      std::snprintf(line, sizeof(line), "%-24s %12lld %8.2f   ", n1.c_str(),
                    static_cast<long long>(first[i].count), first[i].percent);
    else
      std::snprintf(line, sizeof(line), "%-24s %12s %8s   ", "", "", "");
    out << line;
    if (i < second.size())
      std::snprintf(line, sizeof(line), "%-24s %12lld %8.2f\n", n2.c_str(),
                    static_cast<long long>(second[i].count),
                    second[i].percent);
    else
      std::snprintf(line, sizeof(line), "\n");
    out << line;
  }
  return out.str();
}

std::string render_truth_table(const TruthTable& t, const RateReport& r) {
  std::ostringstream out;
  char line[128];
  out << "First  Second  Count\n";
  std::snprintf(line, sizeof(line), "Yes    Yes     %lld\n",
                static_cast<long long>(t.both));
  out << line;
  std::snprintf(line, sizeof(line), "Yes    No      %lld\n",
                static_cast<long long>(t.first_only));
  out << line;
  std::snprintf(line, sizeof(line), "No     Yes     %lld\n",
                static_cast<long long>(t.second_only));
  out << line;
  std::snprintf(line, sizeof(line), "No     No      %lld\n",
                static_cast<long long>(t.neither));
  out << line;
  std::snprintf(line, sizeof(line),
                "overall %.2f%%  both %.2f%%  first-not-second %.2f%%  "
                "second-not-first %.2f%%\n",
                round2(r.overall_rate), round2(r.both_rate),
                round2(r.first_not_second), round2(r.second_not_first));
  out << line;
  return out.str();
}

}  // namespace snipex::analysis
