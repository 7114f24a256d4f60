#include "tlab/text_io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "tlab/errors.hpp"

namespace tlab {

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_real(std::string_view text) {
  const std::string s(text);
  if (s.empty()) throw ContractViolation("parse_real: empty field");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw ContractViolation("parse_real: not a number: '" + s + "'");
  while (*end == ' ' || *end == '\r' || *end == '\t') ++end;
  if (*end != '\0') throw ContractViolation("parse_real: trailing characters in '" + s + "'");
  return v;
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace tlab
