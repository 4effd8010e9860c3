#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace snipex {

using TimePoint = std::chrono::sys_seconds;
using Duration = std::chrono::milliseconds;

// ISO-8601 UTC, e.g. "2019-03-07T12:00:00Z". Fractional seconds and a
// trailing "Z" or "+00:00" are tolerated on parse and dropped.
std::optional<TimePoint> parse_iso8601(std::string_view s);
std::string format_iso8601(TimePoint t);

// Fractional calendar years since the epoch, for trend regression.
double to_fractional_years(TimePoint t);
int utc_year(TimePoint t);

std::string base64_encode(std::string_view data);
std::optional<std::string> base64_decode(std::string_view data);

// Replaces invalid UTF-8 sequences with U+FFFD.
std::string utf8_lossy(std::string_view data);

std::string to_lower(std::string_view s);
std::vector<std::string> split_lines(std::string_view text);

}  // namespace snipex
