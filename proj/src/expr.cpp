#include "irm/expr.hpp"

#include <cctype>
#include <cstdlib>
#include <stdexcept>

namespace irm {

namespace {

[[noreturn]] void bad(const std::string& text, const std::string& why) {
  throw std::invalid_argument("predictor expression '" + text + "': " + why);
}

}  // namespace

Predictor parse_predictor_expression(const std::string& text,
                                     const OutcomeSpace& space) {
  const std::size_t dim = space.x_points.front().size();
  std::vector<double> coeffs(dim, 0.0);
  double constant = 0.0;

  std::string s;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  }
  if (s.empty()) bad(text, "empty");

  std::size_t pos = 0;
  while (pos < s.size()) {
    double sign = 1.0;
    while (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
      if (s[pos] == '-') sign = -sign;
      ++pos;
    }
    if (pos >= s.size()) bad(text, "dangling sign");

    double coef = 1.0;
    bool saw_number = false;
    if (std::isdigit(static_cast<unsigned char>(s[pos])) || s[pos] == '.') {
      char* end = nullptr;
      coef = std::strtod(s.c_str() + pos, &end);
      pos = static_cast<std::size_t>(end - s.c_str());
      saw_number = true;
      if (pos < s.size() && s[pos] == '*') ++pos;
    }
    if (pos < s.size() && s[pos] == 'x') {
      ++pos;
      if (pos >= s.size() || !std::isdigit(static_cast<unsigned char>(s[pos]))) {
        bad(text, "coordinate index expected after 'x'");
      }
      char* end = nullptr;
      const long k = std::strtol(s.c_str() + pos, &end, 10);
      pos = static_cast<std::size_t>(end - s.c_str());
      if (k < 1 || static_cast<std::size_t>(k) > dim) {
        bad(text, "coordinate x" + std::to_string(k) + " out of range");
      }
      coeffs[static_cast<std::size_t>(k - 1)] += sign * coef;
    } else if (saw_number) {
      constant += sign * coef;
    } else {
      bad(text, "unexpected character '" + std::string(1, s[pos]) + "'");
    }
  }
  return linear_predictor(space, coeffs, constant);
}

}  // namespace irm
