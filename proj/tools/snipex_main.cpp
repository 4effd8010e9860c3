#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "snipex/analysis.hpp"
#include "snipex/coordinator.hpp"
#include "snipex/corpus.hpp"
#include "snipex/resolver.hpp"
#include "snipex/store.hpp"
#include "snipex/worker.hpp"

using nlohmann::json;
using namespace snipex;

namespace {

int cmd_ingest(const std::string& posts_path, const std::string& blocks_path,
               const std::string& refs_path, const std::string& tag,
               bool all_versions, const std::string& out_path) {
  std::vector<corpus::PostRecord> posts;
  auto post_stats =
      corpus::ingest_posts_file(posts_path, [&](corpus::PostRecord r) {
        posts.push_back(std::move(r));
      });
  std::vector<corpus::PostBlockRecord> blocks;
  auto block_stats =
      corpus::ingest_blocks_file(blocks_path, [&](corpus::PostBlockRecord r) {
        blocks.push_back(std::move(r));
      });

  auto [snippets, summary] = corpus::build_corpus(posts, blocks, tag);
  snippets = corpus::select_versions(
      std::move(snippets), all_versions
                               ? corpus::VersionMode::all_versions
                               : corpus::VersionMode::latest_per_root_block);
  json refs_info;
  if (!refs_path.empty()) {
    std::ifstream refs(refs_path, std::ios::binary);
    if (!refs) {
      std::cerr << "cannot open refs file: " << refs_path << "\n";
      return 1;
    }
    auto ref_stats = corpus::attach_github_refs(snippets, refs);
    refs_info = {{"rows", ref_stats.rows}, {"skipped", ref_stats.skipped}};
  }

  std::ofstream out(out_path, std::ios::binary);
  if (!out) {
    std::cerr << "cannot write " << out_path << "\n";
    return 1;
  }
  corpus::write_corpus(out, snippets);

  json report{{"snippets", snippets.size()},
              {"questions_matched", summary.questions_matched},
              {"answers_matched", summary.answers_matched},
              {"code_blocks_kept", summary.code_blocks_kept},
              {"text_blocks_dropped", summary.text_blocks_dropped},
              {"orphan_blocks", summary.orphan_blocks},
              {"posts_rows", post_stats.rows},
              {"posts_skipped", post_stats.skipped},
              {"blocks_rows", block_stats.rows},
              {"blocks_skipped", block_stats.skipped}};
  if (!refs_info.is_null()) report["refs"] = refs_info;
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_top_imports(const std::string& corpus_path, int n) {
  auto snippets = corpus::read_corpus_file(corpus_path);
  auto table = corpus::top_imports(snippets, n);
  json out = json::array();
  for (const auto& [name, count] : table.entries)
    out.push_back({{"module", name}, {"count", count}});
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_serve(const std::string& store_url, const std::string& host, int port,
              const std::string& corpus_path,
              const std::string& interpreters, int max_job_attempts) {
  auto shared = std::shared_ptr<store::JobStore>(
      store::open_store(store_url, max_job_attempts));
  if (!corpus_path.empty()) {
    std::vector<std::string> ids;
    std::stringstream ss(interpreters);
    std::string id;
    while (std::getline(ss, id, ','))
      if (!id.empty()) ids.push_back(id);
    if (ids.empty()) {
      std::cerr << "serve: --interpreters required when loading a corpus\n";
      return 1;
    }
    auto snippets = corpus::read_corpus_file(corpus_path);
    size_t loaded = shared->load_jobs(snippets, ids);
    std::cerr << "loaded " << loaded << " new jobs\n";
  }
  coordinator::Coordinator coord(shared);
  int bound = coord.start(host, port);
  std::cout << json{{"listening", host + ":" + std::to_string(bound)}}.dump()
            << std::endl;
  // serve until killed
  for (;;) std::this_thread::sleep_for(std::chrono::seconds(3600));
}

int cmd_work(const std::string& api, const std::string& worker_id,
             int parallelism, const std::string& configs_path,
             int lease_seconds, int max_installs, int idle_shutdown) {
  worker::WorkerOptions options;
  options.api_base = api;
  options.worker_id = worker_id;
  options.parallelism = parallelism;
  options.configs = sandbox::load_configs(configs_path);
  options.lease_seconds = lease_seconds;
  options.max_installs = max_installs;
  options.idle_shutdown_after_seconds = idle_shutdown;
  size_t submitted = worker::run_loop(options);
  std::cout << json{{"submitted", submitted}}.dump() << "\n";
  return 0;
}

int cmd_run_local(const std::string& corpus_path,
                  const std::string& configs_path, const std::string& out_path,
                  int parallelism, int max_installs) {
  auto snippets = corpus::read_corpus_file(corpus_path);
  auto configs = sandbox::load_configs(configs_path);
  std::vector<std::string> ids;
  for (const auto& c : configs) ids.push_back(c.id);

  store::MemoryStore jobs;
  jobs.load_jobs(snippets, ids);

  if (parallelism <= 0)
    parallelism = std::max(1u, std::thread::hardware_concurrency() / 2);

  std::vector<std::thread> threads;
  for (int i = 0; i < parallelism; ++i) {
    threads.emplace_back([&, i] {
      for (;;) {
        auto job = jobs.lease_next("local-" + std::to_string(i), 3600);
        if (!job) return;
        wire::EvaluationResult result;
        result.job_id = job->job_id;
        result.worker_id = "local-" + std::to_string(i);
        result.outcomes =
            resolver::evaluate_all(job->snippet, configs, max_installs);
        result.submitted_at =
            std::chrono::time_point_cast<std::chrono::seconds>(
                std::chrono::system_clock::now());
        jobs.submit_result(result);
      }
    });
  }
  for (auto& t : threads) t.join();

  auto outcomes = jobs.all_outcomes();
  std::sort(outcomes.begin(), outcomes.end(), [](auto& a, auto& b) {
    if (a.snippet_id != b.snippet_id) {
      // canonical numeric order when ids are numeric
      if (a.snippet_id.size() != b.snippet_id.size())
        return a.snippet_id.size() < b.snippet_id.size();
      return a.snippet_id < b.snippet_id;
    }
    return a.interpreter_id < b.interpreter_id;
  });
  std::ofstream out(out_path, std::ios::binary);
  if (!out) {
    std::cerr << "cannot write " << out_path << "\n";
    return 1;
  }
  wire::write_outcomes(out, outcomes);
  auto progress = jobs.progress();
  std::cout << json{{"outcomes", outcomes.size()},
                    {"done", progress.done},
                    {"dead", progress.dead}}
                   .dump(2)
            << "\n";
  return 0;
}

analysis::Selector parse_selector(const std::string& spec,
                                  const std::string& pair) {
  if (spec == "overall" || spec.empty()) return analysis::Selector::overall();
  if (spec.rfind("single:", 0) == 0)
    return analysis::Selector::single(spec.substr(7));
  auto comma = pair.find(',');
  if ((spec == "first_only" || spec == "second_only") &&
      comma != std::string::npos) {
    analysis::Selector sel;
    sel.kind = spec == "first_only"
                   ? analysis::Selector::Kind::first_only
                   : analysis::Selector::Kind::second_only;
    sel.first = pair.substr(0, comma);
    sel.second = pair.substr(comma + 1);
    return sel;
  }
  throw CLI::ValidationError("--selector",
                             "expected overall | single:<id> | first_only | "
                             "second_only (pair selectors need --pair)");
}

int cmd_analyze(const std::string& results_path, const std::string& corpus_path,
                const std::string& report, const std::string& pair_arg,
                const std::string& interp, const std::string& selector_arg,
                int64_t iterations, uint64_t seed, int64_t max_line) {
  auto outcomes = wire::read_outcomes_file(results_path);
  if (outcomes.empty()) {
    std::cerr << "analyze: no results in " << results_path
              << " (run evaluation first)\n";
    return 1;
  }
  std::vector<corpus::Snippet> snippets;
  if (!corpus_path.empty()) snippets = corpus::read_corpus_file(corpus_path);
  auto results = analysis::ResultSet::from_outcomes(outcomes, snippets);

  auto pair_of = [&]() -> std::pair<std::string, std::string> {
    auto comma = pair_arg.find(',');
    if (comma == std::string::npos)
      throw CLI::ValidationError("--pair", "expected two ids: a,b");
    return {pair_arg.substr(0, comma), pair_arg.substr(comma + 1)};
  };

  json out;
  if (report == "table1") {
    auto pair = pair_of();
    auto first = analysis::status_distribution(results, pair.first);
    auto second = analysis::status_distribution(results, pair.second);
    std::cerr << analysis::render_status_table(first, second, pair.first,
                                               pair.second);
    json j1 = json::array(), j2 = json::array();
    for (const auto& r : first)
      j1.push_back({{"status", r.status},
                    {"count", r.count},
                    {"percent", analysis::round2(r.percent)}});
    for (const auto& r : second)
      j2.push_back({{"status", r.status},
                    {"count", r.count},
                    {"percent", analysis::round2(r.percent)}});
    out = {{"report", "table1"}, {pair.first, j1}, {pair.second, j2}};
  } else if (report == "table2") {
    auto pair = pair_of();
    auto table = analysis::truth_table(results, pair);
    auto r = analysis::rates(table);
    std::cerr << analysis::render_truth_table(table, r);
    out = {{"report", "table2"},
           {"both", table.both},
           {"first_only", table.first_only},
           {"second_only", table.second_only},
           {"neither", table.neither},
           {"excluded", table.excluded},
           {"overall_rate", analysis::round2(r.overall_rate)},
           {"both_rate", analysis::round2(r.both_rate)},
           {"first_rate", analysis::round2(r.first_rate)},
           {"second_rate", analysis::round2(r.second_rate)},
           {"first_not_second", analysis::round2(r.first_not_second)},
           {"second_not_first", analysis::round2(r.second_not_first)}};
  } else if (report == "line-curve") {
    auto curve = analysis::line_count_curve(results, interp, max_line);
    json series = json::array();
    for (const auto& p : curve)
      series.push_back({{"line_count", p.line_count},
                        {"percent", p.percent},
                        {"population", p.population}});
    out = {{"report", "line-curve"}, {"interp", interp}, {"series", series}};
  } else if (report == "trend") {
    auto sel = parse_selector(selector_arg, pair_arg);
    auto t = analysis::trend(results, sel);
    json series = json::array();
    for (const auto& p : t.series)
      series.push_back({{"bin", p.label},
                        {"percent", p.percent},
                        {"population", p.population}});
    out = {{"report", "trend"},
           {"slope_pp_per_year", t.slope},
           {"intercept", t.intercept},
           {"series", series}};
  } else if (report == "group-accepted" || report == "group-github") {
    auto sel = parse_selector(selector_arg, pair_arg);
    auto split = report == "group-accepted"
                     ? analysis::Split::accepted_vs_not
                     : analysis::Split::github_ref_vs_not;
    auto c = analysis::group_compare(results, split, sel, iterations, seed);
    out = {{"report", report},
           {"group_rate", c.group_rate},
           {"rest_rate", c.rest_rate},
           {"group_size", c.group_size},
           {"rest_size", c.rest_size},
           {"bootstrap",
            {{"mean_diff", c.bootstrap.mean_diff},
             {"ci_low", c.bootstrap.ci_low},
             {"ci_high", c.bootstrap.ci_high},
             {"iterations", c.bootstrap.iterations},
             {"seed", c.bootstrap.seed}}},
           {"ranksum_p", c.ranksum_p}};
  } else {
    std::cerr << "unknown report: " << report << "\n";
    return 1;
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"snippet executability evaluation pipeline"};
  app.require_subcommand(1);

  // ingest
  std::string posts_path, blocks_path, refs_path, tag = "<python>", out_path;
  bool all_versions = false;
  auto* ingest = app.add_subcommand("ingest", "dump files -> corpus file");
  ingest->add_option("--posts", posts_path, "Posts CSV")->required();
  ingest->add_option("--blocks", blocks_path, "PostBlockVersion CSV")
      ->required();
  ingest->add_option("--refs", refs_path, "GitHub refs CSV");
  ingest->add_option("--tag", tag, "exact question tag string")
      ->envname("SNIPEX_TAG");
  ingest->add_flag("--all-versions", all_versions,
                   "keep every block version, not just the latest");
  ingest->add_option("--out", out_path, "corpus JSONL output")->required();

  // top-imports
  std::string ti_corpus;
  int ti_n = 40;
  auto* top = app.add_subcommand("top-imports", "corpus -> ranked modules");
  top->add_option("--corpus", ti_corpus)->required();
  top->add_option("-n,--top", ti_n, "number of modules")
      ->check(CLI::PositiveNumber);

  // serve
  std::string store_url = "snipex-jobs.jsonl", host = "0.0.0.0";
  std::string serve_corpus, interpreters;
  int port = 8080, max_job_attempts = 3;
  auto* serve = app.add_subcommand("serve", "run the coordinator");
  serve->add_option("--store", store_url, "journal path or sqlite:PATH")
      ->envname("SNIPEX_STORE");
  serve->add_option("--host", host)->envname("SNIPEX_HOST");
  serve->add_option("--port", port)->envname("SNIPEX_PORT");
  serve->add_option("--corpus", serve_corpus, "load jobs from this corpus");
  serve->add_option("--interpreters", interpreters,
                    "comma-separated interpreter ids for loaded jobs");
  serve->add_option("--max-job-attempts", max_job_attempts);

  // work
  std::string api, worker_id, configs_path;
  int parallelism = 0, lease_seconds = 120, max_installs = 5,
      idle_shutdown = 60;
  auto* work = app.add_subcommand("work", "run a worker loop");
  work->add_option("--api", api)->required()->envname("SNIPEX_API");
  work->add_option("--worker-id", worker_id)
      ->required()
      ->envname("SNIPEX_WORKER_ID");
  work->add_option("--parallelism", parallelism)
      ->envname("SNIPEX_PARALLELISM");
  work->add_option("--configs", configs_path, "InterpreterConfig JSON file")
      ->required()
      ->envname("SNIPEX_CONFIGS");
  work->add_option("--lease-seconds", lease_seconds);
  work->add_option("--max-installs", max_installs);
  work->add_option("--idle-shutdown", idle_shutdown,
                   "seconds without jobs before clean exit");

  // run-local
  std::string rl_corpus, rl_configs, rl_out = "results.jsonl";
  int rl_parallelism = 0, rl_max_installs = 5;
  auto* run_local = app.add_subcommand(
      "run-local", "in-process coordinator+worker over a corpus file");
  run_local->add_option("--corpus", rl_corpus)->required();
  run_local->add_option("--configs", rl_configs)->required();
  run_local->add_option("--out", rl_out, "results JSONL output");
  run_local->add_option("--parallelism", rl_parallelism);
  run_local->add_option("--max-installs", rl_max_installs);

  // analyze
  std::string an_results, an_corpus, an_report = "table2", an_pair,
              an_interp, an_selector = "overall";
  int64_t an_iterations = 10000, an_max_line = 30;
  uint64_t an_seed = 0;
  auto* analyze = app.add_subcommand("analyze", "results -> report");
  analyze->add_option("--results", an_results)->required();
  analyze->add_option("--corpus", an_corpus,
                      "corpus file for snippet metadata joins");
  analyze->add_option("--report", an_report,
                      "table1|table2|line-curve|trend|group-accepted|"
                      "group-github");
  analyze->add_option("--pair", an_pair, "interpreter pair a,b");
  analyze->add_option("--interp", an_interp, "interpreter id");
  analyze->add_option("--selector", an_selector,
                      "overall | single:<id> | first_only | second_only");
  analyze->add_option("--iterations", an_iterations);
  analyze->add_option("--seed", an_seed)->envname("SNIPEX_SEED");
  analyze->add_option("--max-line", an_max_line);

  auto* export_tax =
      app.add_subcommand("export-taxonomy", "print the status code table");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed())
      return cmd_ingest(posts_path, blocks_path, refs_path, tag, all_versions,
                        out_path);
    if (top->parsed()) return cmd_top_imports(ti_corpus, ti_n);
    if (serve->parsed())
      return cmd_serve(store_url, host, port, serve_corpus, interpreters,
                       max_job_attempts);
    if (work->parsed())
      return cmd_work(api, worker_id, parallelism, configs_path, lease_seconds,
                      max_installs, idle_shutdown);
    if (run_local->parsed())
      return cmd_run_local(rl_corpus, rl_configs, rl_out, rl_parallelism,
                           rl_max_installs);
    if (analyze->parsed())
      return cmd_analyze(an_results, an_corpus, an_report, an_pair, an_interp,
                         an_selector, an_iterations, an_seed, an_max_line);
    if (export_tax->parsed()) {
      std::cout << classifier::Taxonomy::instance().to_json() << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
