#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "irm/scalar.hpp"

namespace irm {

// sum_e [ L_e(phi) + lambda * scalar_gradient(phi, e)^2 ]
double irmv1_objective(const Predictor& phi, std::span<const Environment> envs,
                       double lambda, Loss loss);

struct Irmv1Result {
  Predictor minimizer;
  double objective = 0.0;
  std::vector<double> residuals;   // scalar gradient per environment
  std::vector<double> env_losses;  // population loss per environment
  std::size_t stationary_points = 0;
  SolveDiagnostics diagnostics;
};

// Global minimum over the restricted class, found by enumerating the
// stationary points of the objective with multi-start damped Newton and
// comparing objective values (plain descent is unreliable: the objective is
// non-convex even for square loss). Logistic runs box starts to [-10,10]^dim
// and discards boundary-hitting iterates.
Irmv1Result irmv1_solve(std::span<const Environment> envs, double lambda,
                        Loss loss, Restriction restriction = Restriction::odd,
                        std::uint64_t seed = 0, Exec exec = Exec::parallel);

struct LambdaPathPoint {
  double lambda = 0.0;
  double log2_lambda = -1.0;  // -1 stands for lambda = 0
  Predictor minimizer;
  double objective = 0.0;
  std::vector<double> residuals;
  std::vector<double> env_losses;
};

// {0} followed by 2^0 .. 2^20.
std::vector<double> default_lambda_grid();

std::vector<LambdaPathPoint> lambda_path(std::span<const Environment> envs,
                                         std::span<const double> lambdas,
                                         Loss loss, std::uint64_t seed = 0,
                                         Exec exec = Exec::parallel);

}  // namespace irm
