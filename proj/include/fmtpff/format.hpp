#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fmtpff {

// Shortest round-trip decimal representation; stable across runs, so files
// written from identical values are byte-identical.
std::string format_double(double value);

double parse_double(std::string_view text);

std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace fmtpff
