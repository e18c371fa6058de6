#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "irm/parallel.hpp"

namespace irm {

using ResidualFn =
    std::function<void(std::span<const double> vars, std::span<double> out)>;
// Row-major m x n Jacobian of the residual.
using JacobianFn =
    std::function<void(std::span<const double> vars, std::span<double> out)>;

struct NewtonOptions {
  double residual_tol = 1e-10;  // max-abs acceptance
  int max_iterations = 200;
  int max_step_halvings = 30;
  double dedup_tol = 1e-6;  // max-norm between distinct roots
  // When > 0, starts whose iterates leave [-box, box]^dim are discarded
  // (used for losses that are not coercive in every direction).
  double start_box = 0.0;
};

struct SolveDiagnostics {
  std::size_t starts = 0;
  std::size_t converged = 0;
  std::size_t merged = 0;
  std::size_t discarded_boundary = 0;
  std::size_t lattice_points = 0;
  std::size_t random_points = 0;
  std::size_t total_iterations = 0;
};

struct MultiStartResult {
  std::vector<std::vector<double>> roots;  // deduplicated, lexicographic
  std::vector<std::size_t> basin_counts;   // converged starts per root
  SolveDiagnostics diagnostics;
};

// Start set: the 0.25-step lattice on [-2,2]^dim plus seeded uniform draws
// from [-3,3]^dim. Oversized lattices (beyond ~500k points) coarsen to unit
// step and finally drop to random-only with a larger draw count.
std::vector<std::vector<double>> solver_starts(int dim, std::uint64_t seed);

// Damped (Gauss-)Newton from every start: solve J d = -r in the least-squares
// sense, halve the step until the residual norm decreases, accept on
// max-abs(r) <= residual_tol. Works for square, overdetermined and
// underdetermined systems; accepted roots are exact zeros within tolerance.
MultiStartResult multistart_newton(int dim, int num_residuals,
                                   const ResidualFn& residual,
                                   const JacobianFn& jacobian,  // may be null
                                   std::span<const std::vector<double>> starts,
                                   const NewtonOptions& options,
                                   Exec exec = Exec::parallel);

// Scalar bisection utilities used by the crossover and regime-boundary
// analyses. predicate bisection assumes a single false->true transition.
double bisect_root(const std::function<double(double)>& f, double lo, double hi,
                   double width_tol, int max_iter = 200);
std::pair<double, double> bisect_predicate(const std::function<bool(double)>& pred,
                                           double lo, double hi, double width_tol,
                                           int max_iter = 200);

}  // namespace irm
