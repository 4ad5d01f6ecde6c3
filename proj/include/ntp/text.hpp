// Small text helpers shared by the file writers and the config parser.
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ntp {

// Shortest representation that round-trips; "inf"/"nan" for non-finite.
std::string format_double(double value);

std::string_view trim(std::string_view text);
std::vector<std::string_view> split(std::string_view text, char sep);

// Strict parsers: the whole (trimmed) field must be consumed.
bool parse_double(std::string_view text, double& out);
bool parse_unsigned(std::string_view text, unsigned long long& out);

}  // namespace ntp
