#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "snipex/sandbox.hpp"

namespace snipex::classifier {

enum class Category { success, interpreter_error, harness };

struct StatusCode {
  std::string name;
  int numeric_id = 0;  // 0 = Success
  Category category = Category::harness;

  bool operator==(const StatusCode&) const = default;
};

// Fixed, versioned table covering both interpreter generations' built-in
// exceptions plus the harness codes.
class Taxonomy {
 public:
  static const Taxonomy& instance();

  const std::vector<StatusCode>& codes() const { return codes_; }
  const std::string& version() const { return version_; }
  std::optional<StatusCode> by_name(const std::string& name) const;
  const StatusCode& success() const { return codes_.front(); }
  const StatusCode& unknown_error() const;

  std::string to_json() const;

 private:
  Taxonomy();
  std::vector<StatusCode> codes_;
  std::string version_;
};

StatusCode classify(const sandbox::RawExecution& raw);

StatusCode classify_pair(const std::string& source,
                         const sandbox::InterpreterConfig& config);

// "ModuleNotFoundError: No module named 'X'" / "ImportError: No module
// named X" on the last non-empty line; returns the top-level segment of X.
std::optional<std::string> extract_missing_module(
    const std::string& stderr_tail);

}  // namespace snipex::classifier
