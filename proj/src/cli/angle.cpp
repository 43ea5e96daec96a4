#include <cctype>
#include <charconv>
#include <numbers>
#include <stdexcept>
#include <string>

#include "qfb/cli.hpp"

namespace qfb::cli {

namespace {

double parse_number(std::string_view s, const std::string& whole) {
  double v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("cannot parse angle '" + whole + "'");
  return v;
}

}  // namespace

double parse_angle(const std::string& text) {
  std::string s;
  for (const char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  const auto pi_at = s.find("pi");
  if (pi_at == std::string::npos) {
    if (!s.empty() && s.front() == '+') s.erase(0, 1);
    return parse_number(s, text);
  }

  std::string_view head(s.data(), pi_at);
  std::string_view tail(s.data() + pi_at + 2, s.size() - pi_at - 2);
  double coefficient = 1;
  if (!head.empty() && head.back() == '*') head.remove_suffix(1);
  if (head == "-") {
    coefficient = -1;
  } else if (head == "+" || head.empty()) {
    coefficient = 1;
  } else {
    if (head.front() == '+') head.remove_prefix(1);
    coefficient = parse_number(head, text);
  }
  double divisor = 1;
  if (!tail.empty()) {
    if (tail.front() != '/') throw std::invalid_argument("cannot parse angle '" + text + "'");
    divisor = parse_number(tail.substr(1), text);
    if (divisor == 0) throw std::invalid_argument("angle divides by zero");
  }
  return coefficient * std::numbers::pi / divisor;
}

}  // namespace qfb::cli
