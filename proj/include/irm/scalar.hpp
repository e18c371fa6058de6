#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "irm/env.hpp"
#include "irm/newton.hpp"
#include "irm/risk.hpp"

namespace irm {

// d/dw L_e(w * phi) at w = 1. Square loss: E[(phi(X)-Y) phi(X)].
// Logistic: E[-Y phi(X) / (1 + exp(Y phi(X)))].
double scalar_gradient(const Predictor& phi, const Environment& e, Loss loss);

// Partial derivatives of the gradient functional with respect to each
// phi(x); used to assemble solver Jacobians.
std::vector<double> scalar_gradient_partials(const Predictor& phi,
                                             const Environment& e, Loss loss);

enum class Restriction { unrestricted, odd, linear };

Restriction restriction_from_string(const std::string& s);
std::string to_string(Restriction r);

// Linear change of variables realizing a restriction: predictor values are
// basis * vars. odd solves one variable per {x, -x} orbit (self-negating
// points pinned to 0); linear solves one weight per input coordinate.
struct VariableMap {
  int dim = 0;
  std::size_t num_points = 0;
  std::vector<double> basis;  // row-major [point][var]

  void values_from_vars(std::span<const double> vars,
                        std::span<double> out) const;
};

VariableMap make_variable_map(const OutcomeSpace& space, Restriction r);

struct SolutionSet {
  Restriction restriction = Restriction::odd;
  Loss loss = Loss::square;
  std::vector<Predictor> solutions;            // lexicographic by table
  std::vector<std::vector<double>> vars;       // solver coordinates
  std::vector<std::vector<double>> residuals;  // per solution, per env
  std::vector<std::size_t> basin_counts;
  SolveDiagnostics diagnostics;
};

// All real solutions of {scalar_gradient(phi, e) = 0 for every e} found by
// multi-start damped Newton under the given restriction. Exhaustive in
// practice for the odd/linear systems (a handful of isolated roots); the
// unrestricted solution set can be a continuum, reported as the sampled
// roots with basin diagnostics.
SolutionSet solve_scalar_invariant(std::span<const Environment> envs, Loss loss,
                                   Restriction restriction,
                                   std::uint64_t seed = 0,
                                   Exec exec = Exec::parallel);

// Square-loss odd solutions on a fixed-alpha two-bit family, closed form:
// always {0, (1-2a) x1}; when (1-2a)^2 > 1/2 also
// x1/(2a') +- sqrt(1/2 - 1/(4a'^2)) x2 with a' = 1-2a.
struct OddClosedForm {
  double a = 0.0;   // 1 - 2*alpha
  bool has_cross_solutions = false;
  double w1 = 0.0;  // defined when the discriminant is >= 0
  double w2 = 0.0;
  double discriminant = 0.0;
  std::vector<Predictor> solutions;  // lexicographic by table
};

OddClosedForm two_bit_odd_closed_form(double alpha);

// Writes the gradient functional on the fixed-alpha family as F + beta * G
// (it is affine in beta for both losses); consistency-checked on a grid of
// intermediate beta values.
struct AffineBetaDecomposition {
  double constant_term = 0.0;     // F(phi)
  double beta_coefficient = 0.0;  // G(phi)
};

AffineBetaDecomposition affine_beta_decomposition(const Predictor& phi,
                                                  double alpha, Loss loss);

std::optional<Predictor> irm_s_select(const SolutionSet& set,
                                      std::span<const Environment> envs,
                                      Loss loss);
std::optional<Predictor> irm_s_select(std::span<const Environment> envs,
                                      Loss loss, Restriction restriction,
                                      std::uint64_t seed = 0,
                                      Exec exec = Exec::parallel);

}  // namespace irm
