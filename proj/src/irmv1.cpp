#include "irm/irmv1.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace irm {

namespace {

double sigma(double z) { return 1.0 / (1.0 + std::exp(z)); }

// Objective gradient with respect to the predictor values, normalized by
// 1/(1+lambda). The raw gradient scales with lambda, so a fixed acceptance
// tolerance on the normalized residual gives uniform stationary-point
// accuracy along the whole path.
struct ObjectiveSystem {
  std::span<const Environment> envs;
  Loss loss;
  double lambda;
  const VariableMap& map;

  void residual(std::span<const double> vars, std::span<double> out) const {
    std::array<double, 12> values_buf;
    std::array<double, 12> grad_buf;
    const std::size_t n = map.num_points;
    const std::span<double> values(values_buf.data(), n);
    map.values_from_vars(vars, values);
    std::fill(grad_buf.begin(), grad_buf.begin() + static_cast<long>(n), 0.0);

    for (const Environment& e : envs) {
      // One pass for the gradient functional, one to accumulate partials.
      double g = 0.0;
      for (std::size_t xi = 0; xi < n; ++xi) {
        const double v = values[xi];
        for (std::size_t yi = 0; yi < e.space.num_y(); ++yi) {
          const double p = e.prob(xi, yi);
          if (p == 0.0) continue;
          const double y = e.space.y_points[yi];
          g += loss == Loss::square ? p * (v - y) * v : p * (-y * v) * sigma(y * v);
        }
      }
      for (std::size_t xi = 0; xi < n; ++xi) {
        const double v = values[xi];
        double dl = 0.0, dg = 0.0;
        for (std::size_t yi = 0; yi < e.space.num_y(); ++yi) {
          const double p = e.prob(xi, yi);
          if (p == 0.0) continue;
          const double y = e.space.y_points[yi];
          if (loss == Loss::square) {
            dl += p * (v - y);
            dg += p * (2.0 * v - y);
          } else {
            const double s = sigma(y * v);
            dl += p * (-y) * s;
            dg += p * (-y * s + v * s * (1.0 - s));
          }
        }
        grad_buf[xi] += dl + 2.0 * lambda * g * dg;
      }
    }

    const double scale = 1.0 / (1.0 + lambda);
    for (int j = 0; j < map.dim; ++j) {
      double s = 0.0;
      for (std::size_t xi = 0; xi < n; ++xi) {
        s += grad_buf[xi] * map.basis[xi * static_cast<std::size_t>(map.dim) +
                                      static_cast<std::size_t>(j)];
      }
      out[static_cast<std::size_t>(j)] = s * scale;
    }
  }
};

}  // namespace

double irmv1_objective(const Predictor& phi, std::span<const Environment> envs,
                       double lambda, Loss loss) {
  if (lambda < 0.0) {
    throw std::invalid_argument("irmv1_objective: lambda must be >= 0");
  }
  double total = 0.0;
  for (const Environment& e : envs) {
    const double g = scalar_gradient(phi, e, loss);
    total += population_loss(phi, e, loss) + lambda * g * g;
  }
  return total;
}

Irmv1Result irmv1_solve(std::span<const Environment> envs, double lambda,
                        Loss loss, Restriction restriction, std::uint64_t seed,
                        Exec exec) {
  if (envs.empty()) {
    throw std::invalid_argument("irmv1_solve: no environments");
  }
  if (lambda < 0.0) {
    throw std::invalid_argument("irmv1_solve: lambda must be >= 0");
  }
  const OutcomeSpace& space = envs.front().space;
  const VariableMap map = make_variable_map(space, restriction);
  const ObjectiveSystem system{envs, loss, lambda, map};

  const auto starts = solver_starts(map.dim, seed);
  NewtonOptions options;
  if (loss == Loss::logistic) options.start_box = 10.0;

  MultiStartResult ms = multistart_newton(
      map.dim, map.dim,
      [&](std::span<const double> v, std::span<double> out) {
        system.residual(v, out);
      },
      nullptr, starts, options, exec);

  if (ms.roots.empty()) {
    throw std::runtime_error(
        "irmv1_solve: no stationary point found (starts=" +
        std::to_string(ms.diagnostics.starts) +
        ", converged=" + std::to_string(ms.diagnostics.converged) +
        ", boundary=" + std::to_string(ms.diagnostics.discarded_boundary) + ")");
  }

  // Tables in lexicographic order so objective ties resolve canonically.
  std::vector<Predictor> candidates;
  for (const auto& root : ms.roots) {
    Predictor f = zero_predictor(space);
    map.values_from_vars(root, f.values);
    candidates.push_back(std::move(f));
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Predictor& a, const Predictor& b) {
              return a.values < b.values;
            });

  Irmv1Result result;
  result.stationary_points = candidates.size();
  result.diagnostics = ms.diagnostics;
  std::size_t best = 0;
  double best_obj = 0.0;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const double obj = irmv1_objective(candidates[k], envs, lambda, loss);
    if (k == 0 || obj < best_obj) {
      best = k;
      best_obj = obj;
    }
  }
  result.minimizer = candidates[best];
  result.objective = best_obj;
  for (const Environment& e : envs) {
    result.residuals.push_back(scalar_gradient(result.minimizer, e, loss));
    result.env_losses.push_back(population_loss(result.minimizer, e, loss));
  }
  return result;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> lambdas{0.0};
  for (int k = 0; k <= 20; ++k) {
    lambdas.push_back(std::ldexp(1.0, k));
  }
  return lambdas;
}

std::vector<LambdaPathPoint> lambda_path(std::span<const Environment> envs,
                                         std::span<const double> lambdas,
                                         Loss loss, std::uint64_t seed,
                                         Exec exec) {
  if (lambdas.empty()) {
    throw std::invalid_argument("lambda_path: empty lambda grid");
  }
  if (!std::is_sorted(lambdas.begin(), lambdas.end())) {
    throw std::invalid_argument("lambda_path: lambdas must be ascending");
  }
  std::vector<LambdaPathPoint> path;
  path.reserve(lambdas.size());
  for (double lambda : lambdas) {
    Irmv1Result r = irmv1_solve(envs, lambda, loss, Restriction::odd, seed, exec);
    LambdaPathPoint p;
    p.lambda = lambda;
    p.log2_lambda = lambda > 0.0 ? std::log2(lambda) : -1.0;
    p.minimizer = std::move(r.minimizer);
    p.objective = r.objective;
    p.residuals = std::move(r.residuals);
    p.env_losses = std::move(r.env_losses);
    path.push_back(std::move(p));
  }
  return path;
}

}  // namespace irm
