#include <doctest.h>

#include "irm/expr.hpp"

using namespace irm;

TEST_CASE("predictor mini-expressions") {
  const OutcomeSpace space = two_bit_space();
  SUBCASE("scaled coordinate") {
    const Predictor f = parse_predictor_expression("0.3*x2", space);
    CHECK(f.values == std::vector<double>{0.3, -0.3, 0.3, -0.3});
  }
  SUBCASE("sums with constants and spaces") {
    const Predictor f = parse_predictor_expression("x1 + 0.5*x2 - 0.1", space);
    CHECK(f.value_at({1, 1}) == doctest::Approx(1.4));
    CHECK(f.value_at({-1, -1}) == doctest::Approx(-1.6));
  }
  SUBCASE("bare coordinate and double negation") {
    const Predictor f = parse_predictor_expression("-x1", space);
    CHECK(f.values[0] == -1.0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(parse_predictor_expression("0.3*x9", space),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_predictor_expression("foo", space),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_predictor_expression("", space),
                    std::invalid_argument);
  }
}
