#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "snipex/analysis.hpp"
#include "snipex/classifier.hpp"
#include "snipex/corpus.hpp"
#include "snipex/sandbox.hpp"

namespace py = pybind11;
using namespace snipex;

namespace {

std::string classify_run(std::optional<int> exit_status, bool timed_out,
                         const std::string& stderr_tail,
                         std::optional<std::string> spawn_error) {
  sandbox::RawExecution raw;
  raw.exit_status = exit_status;
  raw.timed_out = timed_out;
  raw.stderr_tail = stderr_tail;
  raw.spawn_error = std::move(spawn_error);
  return classifier::classify(raw).name;
}

py::dict run_source(const std::string& source,
                    const std::vector<std::string>& command,
                    double timeout_seconds) {
  sandbox::InterpreterConfig config;
  config.id = "adhoc";
  config.command = command;
  config.timeout = std::chrono::duration_cast<Duration>(
      std::chrono::duration<double>(timeout_seconds));
  sandbox::RawExecution raw;
  {
    py::gil_scoped_release release;
    raw = sandbox::run_snippet(sandbox::prepare_source(source), config,
                               sandbox::make_temp_workdir());
  }
  py::dict out;
  out["status"] = classifier::classify(raw).name;
  out["timed_out"] = raw.timed_out;
  out["stdout"] = py::bytes(raw.stdout_tail);
  out["stderr"] = py::bytes(raw.stderr_tail);
  out["duration_ms"] = raw.duration.count();
  if (raw.exit_status) out["exit_status"] = *raw.exit_status;
  return out;
}

py::dict rates_from_counts(int64_t both, int64_t first_only,
                           int64_t second_only, int64_t neither) {
  analysis::TruthTable t{both, first_only, second_only, neither, 0};
  auto r = analysis::rates(t);
  py::dict out;
  out["first_rate"] = r.first_rate;
  out["second_rate"] = r.second_rate;
  out["overall_rate"] = r.overall_rate;
  out["both_rate"] = r.both_rate;
  out["first_not_second"] = r.first_not_second;
  out["second_not_first"] = r.second_not_first;
  return out;
}

py::dict bootstrap(const std::vector<bool>& a, const std::vector<bool>& b,
                   int64_t iterations, uint64_t seed) {
  auto r = analysis::bootstrap_diff(a, b, iterations, seed);
  py::dict out;
  out["mean_diff"] = r.mean_diff;
  out["ci_low"] = r.ci_low;
  out["ci_high"] = r.ci_high;
  out["iterations"] = r.iterations;
  out["seed"] = r.seed;
  return out;
}

std::vector<std::pair<std::string, int64_t>> imports_of(
    const std::vector<std::string>& texts, int n) {
  std::vector<corpus::Snippet> snippets;
  for (const auto& t : texts) {
    corpus::Snippet s;
    s.content = t;
    snippets.push_back(std::move(s));
  }
  return corpus::top_imports(snippets, n).entries;
}

py::list taxonomy_table() {
  py::list out;
  for (const auto& c : classifier::Taxonomy::instance().codes()) {
    py::dict row;
    row["name"] = c.name;
    row["numeric_id"] = c.numeric_id;
    row["category"] = c.category == classifier::Category::success
                          ? "success"
                          : c.category == classifier::Category::harness
                                ? "harness"
                                : "interpreter_error";
    out.append(row);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_snipex, m) {
  m.doc() = "snippet executability evaluation core";

  m.def("prepare_source", &sandbox::prepare_source,
        "Entity decode, newline normalization, BOM strip and dedent",
        py::arg("raw"));
  m.def("classify", &classify_run, py::arg("exit_status"),
        py::arg("timed_out") = false, py::arg("stderr_tail") = "",
        py::arg("spawn_error") = py::none());
  m.def("extract_missing_module", &classifier::extract_missing_module,
        py::arg("stderr_tail"));
  m.def("run_source", &run_source, py::arg("source"), py::arg("command"),
        py::arg("timeout_seconds") = 10.0);
  m.def("rates", &rates_from_counts, py::arg("both"), py::arg("first_only"),
        py::arg("second_only"), py::arg("neither"));
  m.def("bootstrap_diff", &bootstrap, py::arg("group_a"), py::arg("group_b"),
        py::arg("iterations") = 10000, py::arg("seed") = 0);
  m.def("ranksum", &analysis::ranksum, py::arg("group_a"), py::arg("group_b"));
  m.def("top_imports", &imports_of, py::arg("snippet_texts"), py::arg("n"));
  m.def("taxonomy", &taxonomy_table);
  m.attr("taxonomy_version") = classifier::Taxonomy::instance().version();
}
