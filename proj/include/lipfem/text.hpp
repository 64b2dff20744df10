#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace lipfem {

/// Shortest representation that parses back to the identical double.
std::string format_double(double value);
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string hex64(unsigned long long value);

}  // namespace lipfem
