#include "snipex/classifier.hpp"

#include <regex>
#include <unordered_map>

#include "json.hpp"

namespace snipex::classifier {

using nlohmann::json;

namespace {

// Built-in exception names of the 2.x and 3.x interpreter generations that
// show up as the head of a traceback's final line. StandardError is 2.x only.
const char* kInterpreterErrors[] = {
    "ArithmeticError",
    "AssertionError",
    "AttributeError",
    "BlockingIOError",
    "BrokenPipeError",
    "BufferError",
    "ChildProcessError",
    "ConnectionAbortedError",
    "ConnectionError",
    "ConnectionRefusedError",
    "ConnectionResetError",
    "EOFError",
    "EnvironmentError",
    "Exception",
    "FileExistsError",
    "FileNotFoundError",
    "FloatingPointError",
    "IOError",
    "ImportError",
    "IndentationError",
    "IndexError",
    "InterruptedError",
    "IsADirectoryError",
    "KeyError",
    "KeyboardInterrupt",
    "LookupError",
    "MemoryError",
    "ModuleNotFoundError",
    "NameError",
    "NotADirectoryError",
    "NotImplementedError",
    "OSError",
    "OverflowError",
    "PermissionError",
    "ProcessLookupError",
    "RecursionError",
    "ReferenceError",
    "RuntimeError",
    "StandardError",
    "StopIteration",
    "SyntaxError",
    "SystemError",
    "SystemExit",
    "TabError",
    "TimeoutError",
    "TypeError",
    "UnboundLocalError",
    "UnicodeDecodeError",
    "UnicodeEncodeError",
    "UnicodeError",
    "UnicodeTranslateError",
    "ValueError",
    "ZeroDivisionError",
};

std::string category_name(Category c) {
  switch (c) {
    case Category::success:
      return "success";
    case Category::interpreter_error:
      return "interpreter_error";
    case Category::harness:
      return "harness";
  }
  return "harness";
}

}  // namespace

Taxonomy::Taxonomy() : version_("1.0") {
  codes_.push_back({"Success", 0, Category::success});
  int id = 1;
  for (const char* name : kInterpreterErrors)
    codes_.push_back({name, id++, Category::interpreter_error});
  for (const char* name : {"Timeout", "SpawnError", "ExitCodeException",
                           "UnknownError"})
    codes_.push_back({name, id++, Category::harness});
}

const Taxonomy& Taxonomy::instance() {
  static Taxonomy taxonomy;
  return taxonomy;
}

std::optional<StatusCode> Taxonomy::by_name(const std::string& name) const {
  static const std::unordered_map<std::string, size_t> index = [] {
    std::unordered_map<std::string, size_t> m;
    const auto& codes = Taxonomy::instance().codes_;
    for (size_t i = 0; i < codes.size(); ++i) m[codes[i].name] = i;
    return m;
  }();
  auto it = index.find(name);
  if (it == index.end()) return std::nullopt;
  return codes_[it->second];
}

const StatusCode& Taxonomy::unknown_error() const {
  return codes_.back();  // UnknownError is last by construction
}

std::string Taxonomy::to_json() const {
  json codes = json::array();
  for (const auto& c : codes_)
    codes.push_back({{"name", c.name},
                     {"numeric_id", c.numeric_id},
                     {"category", category_name(c.category)}});
  return json{{"version", version_}, {"codes", codes}}.dump(2);
}

namespace {

const std::regex kExceptionHead(R"(^([A-Za-z_][A-Za-z0-9_.]*)(:|$))");

std::string final_segment(const std::string& dotted) {
  auto dot = dotted.rfind('.');
  return dot == std::string::npos ? dotted : dotted.substr(dot + 1);
}

}  // namespace

StatusCode classify(const sandbox::RawExecution& raw) {
  const auto& tax = Taxonomy::instance();
  if (raw.spawn_error) return *tax.by_name("SpawnError");
  if (raw.timed_out) return *tax.by_name("Timeout");
  if (raw.exit_status && *raw.exit_status == 0) return tax.success();

  auto lines = split_lines(raw.stderr_tail);
  // last non-empty line upward; the final traceback wins for chained
  // exceptions
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    if (it->find_first_not_of(" \t") == std::string::npos) continue;
    std::smatch m;
    if (std::regex_search(*it, m, kExceptionHead)) {
      if (auto code = tax.by_name(final_segment(m[1].str()))) return *code;
    }
  }
  bool stderr_blank =
      raw.stderr_tail.find_first_not_of(" \t\r\n") == std::string::npos;
  return stderr_blank ? *tax.by_name("ExitCodeException") : tax.unknown_error();
}

StatusCode classify_pair(const std::string& source,
                         const sandbox::InterpreterConfig& config) {
  auto prepared = sandbox::prepare_source(source);
  auto workdir = sandbox::make_temp_workdir();
  auto raw = sandbox::run_snippet(prepared, config, workdir);
  return classify(raw);
}

namespace {
const std::regex kModuleNotFound(
    R"(ModuleNotFoundError:\s+No module named\s+'([^']+)')");
const std::regex kImportErrorNamed(
    R"(ImportError:\s+No module named\s+'?([A-Za-z_][A-Za-z0-9_.]*)'?)");
}  // namespace

std::optional<std::string> extract_missing_module(
    const std::string& stderr_tail) {
  auto lines = split_lines(stderr_tail);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    if (it->find_first_not_of(" \t") == std::string::npos) continue;
    std::smatch m;
    if (std::regex_search(*it, m, kModuleNotFound) ||
        std::regex_search(*it, m, kImportErrorNamed)) {
      std::string name = m[1].str();
      auto dot = name.find('.');
      if (dot != std::string::npos) name.resize(dot);
      return name;
    }
    return std::nullopt;  // only the last non-empty line is considered
  }
  return std::nullopt;
}

}  // namespace snipex::classifier
