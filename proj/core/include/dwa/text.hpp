#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace dwa {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

/// Strict full-field parse; returns false on trailing garbage or empty input.
bool parse_double(std::string_view text, double& out);

std::vector<std::string_view> split_fields(std::string_view line, char sep = ',');

} // namespace dwa
