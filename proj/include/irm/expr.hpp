#pragma once

#include <string>

#include "irm/risk.hpp"

namespace irm {

// Parses predictor mini-expressions: linear combinations of the input
// coordinates plus an optional constant, e.g. "0.3*x2", "0.8*x1 - 0.1",
// "x1 + x2". Coordinates are 1-based.
Predictor parse_predictor_expression(const std::string& text,
                                     const OutcomeSpace& space);

}  // namespace irm
