#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tlab {

/// Shortest-safe decimal for a double: 17 significant digits, so that
/// parse_real(format_real(x)) == x for every finite x.
std::string format_real(double x);

/// Parses a decimal (also "inf", "-inf", "nan"); throws ContractViolation on
/// trailing garbage.
double parse_real(std::string_view text);

std::vector<std::string> split(std::string_view line, char sep);

}  // namespace tlab
