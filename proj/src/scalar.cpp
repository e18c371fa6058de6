#include "irm/scalar.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace irm {

namespace {

void require_same_space(const OutcomeSpace& a, const OutcomeSpace& b,
                        const char* what) {
  if (!(a == b)) {
    throw std::invalid_argument(std::string(what) + ": outcome spaces differ");
  }
}

double sigma(double z) { return 1.0 / (1.0 + std::exp(z)); }

double gradient_from_values(std::span<const double> values, const Environment& e,
                            Loss loss) {
  double g = 0.0;
  for (std::size_t xi = 0; xi < e.space.num_x(); ++xi) {
    const double v = values[xi];
    for (std::size_t yi = 0; yi < e.space.num_y(); ++yi) {
      const double p = e.prob(xi, yi);
      if (p == 0.0) continue;
      const double y = e.space.y_points[yi];
      if (loss == Loss::square) {
        g += p * (v - y) * v;
      } else {
        g += p * (-y * v) * sigma(y * v);
      }
    }
  }
  return g;
}

void gradient_partials_from_values(std::span<const double> values,
                                   const Environment& e, Loss loss,
                                   std::span<double> out) {
  for (std::size_t xi = 0; xi < e.space.num_x(); ++xi) {
    const double v = values[xi];
    double d = 0.0;
    for (std::size_t yi = 0; yi < e.space.num_y(); ++yi) {
      const double p = e.prob(xi, yi);
      if (p == 0.0) continue;
      const double y = e.space.y_points[yi];
      if (loss == Loss::square) {
        d += p * (2.0 * v - y);
      } else {
        const double s = sigma(y * v);
        d += p * (-y * s + v * s * (1.0 - s));
      }
    }
    out[xi] = d;
  }
}

}  // namespace

double scalar_gradient(const Predictor& phi, const Environment& e, Loss loss) {
  require_same_space(phi.space, e.space, "scalar_gradient");
  if (loss == Loss::logistic) {
    for (double y : e.space.y_points) {
      if (y != 1.0 && y != -1.0) {
        throw std::invalid_argument(
            "scalar_gradient: logistic loss needs labels in {-1,+1}");
      }
    }
  }
  return gradient_from_values(phi.values, e, loss);
}

std::vector<double> scalar_gradient_partials(const Predictor& phi,
                                             const Environment& e, Loss loss) {
  require_same_space(phi.space, e.space, "scalar_gradient_partials");
  std::vector<double> out(phi.values.size());
  gradient_partials_from_values(phi.values, e, loss, out);
  return out;
}

Restriction restriction_from_string(const std::string& s) {
  if (s == "unrestricted") return Restriction::unrestricted;
  if (s == "odd") return Restriction::odd;
  if (s == "linear") return Restriction::linear;
  throw std::invalid_argument("unknown restriction: " + s);
}

std::string to_string(Restriction r) {
  switch (r) {
    case Restriction::unrestricted:
      return "unrestricted";
    case Restriction::odd:
      return "odd";
    case Restriction::linear:
      return "linear";
  }
  throw std::logic_error("unreachable");
}

void VariableMap::values_from_vars(std::span<const double> vars,
                                   std::span<double> out) const {
  for (std::size_t xi = 0; xi < num_points; ++xi) {
    double v = 0.0;
    for (int j = 0; j < dim; ++j) {
      v += basis[xi * static_cast<std::size_t>(dim) + static_cast<std::size_t>(j)] *
           vars[static_cast<std::size_t>(j)];
    }
    out[xi] = v;
  }
}

VariableMap make_variable_map(const OutcomeSpace& space, Restriction r) {
  VariableMap map;
  map.num_points = space.num_x();
  switch (r) {
    case Restriction::unrestricted: {
      map.dim = static_cast<int>(space.num_x());
      map.basis.assign(map.num_points * static_cast<std::size_t>(map.dim), 0.0);
      for (std::size_t i = 0; i < map.num_points; ++i) {
        map.basis[i * static_cast<std::size_t>(map.dim) + i] = 1.0;
      }
      return map;
    }
    case Restriction::odd: {
      if (!space.sign_symmetric()) {
        throw std::invalid_argument(
            "odd restriction needs a sign-symmetric space");
      }
      const auto neg = space.negation_indices();
      std::vector<std::pair<std::size_t, std::size_t>> orbits;
      for (std::size_t i = 0; i < space.num_x(); ++i) {
        const auto j = static_cast<std::size_t>(neg[i]);
        if (i < j) orbits.emplace_back(i, j);
        // i == j is a self-negating point, pinned to 0
      }
      map.dim = static_cast<int>(orbits.size());
      map.basis.assign(map.num_points * static_cast<std::size_t>(map.dim), 0.0);
      for (std::size_t k = 0; k < orbits.size(); ++k) {
        map.basis[orbits[k].first * static_cast<std::size_t>(map.dim) + k] = 1.0;
        map.basis[orbits[k].second * static_cast<std::size_t>(map.dim) + k] = -1.0;
      }
      return map;
    }
    case Restriction::linear: {
      const std::size_t d = space.x_points.front().size();
      map.dim = static_cast<int>(d);
      map.basis.assign(map.num_points * d, 0.0);
      for (std::size_t i = 0; i < map.num_points; ++i) {
        for (std::size_t k = 0; k < d; ++k) {
          map.basis[i * d + k] = space.x_points[i][k];
        }
      }
      return map;
    }
  }
  throw std::logic_error("unreachable");
}

namespace {

// Residual/Jacobian of the simultaneous gradient constraints in the
// restriction's variables. Stack scratch keeps the callbacks safe under
// concurrent starts; |X| <= 12 by the outcome-space invariant.
struct ScalarSystem {
  std::span<const Environment> envs;
  Loss loss;
  const VariableMap& map;

  ScalarSystem(std::span<const Environment> e, Loss l, const VariableMap& m)
      : envs(e), loss(l), map(m) {}

  void residual(std::span<const double> vars, std::span<double> out) const {
    std::array<double, 12> values;
    const std::span<double> v(values.data(), map.num_points);
    map.values_from_vars(vars, v);
    for (std::size_t ei = 0; ei < envs.size(); ++ei) {
      out[ei] = gradient_from_values(v, envs[ei], loss);
    }
  }

  void jacobian(std::span<const double> vars, std::span<double> out) const {
    std::array<double, 12> values;
    std::array<double, 12> partials;
    const std::span<double> v(values.data(), map.num_points);
    const std::span<double> d(partials.data(), map.num_points);
    map.values_from_vars(vars, v);
    for (std::size_t ei = 0; ei < envs.size(); ++ei) {
      gradient_partials_from_values(v, envs[ei], loss, d);
      for (int j = 0; j < map.dim; ++j) {
        double s = 0.0;
        for (std::size_t xi = 0; xi < map.num_points; ++xi) {
          s += d[xi] * map.basis[xi * static_cast<std::size_t>(map.dim) +
                                 static_cast<std::size_t>(j)];
        }
        out[ei * static_cast<std::size_t>(map.dim) + static_cast<std::size_t>(j)] = s;
      }
    }
  }
};

SolutionSet build_solution_set(std::span<const Environment> envs, Loss loss,
                               Restriction restriction, const VariableMap& map,
                               MultiStartResult&& ms) {
  const OutcomeSpace& space = envs.front().space;
  SolutionSet set;
  set.restriction = restriction;
  set.loss = loss;
  set.diagnostics = ms.diagnostics;

  // Re-sort lexicographically by value table so solution sets compare
  // across restrictions.
  std::vector<std::size_t> order(ms.roots.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::vector<double>> tables(ms.roots.size());
  for (std::size_t i = 0; i < ms.roots.size(); ++i) {
    tables[i].resize(map.num_points);
    map.values_from_vars(ms.roots[i], tables[i]);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return tables[a] < tables[b];
  });

  for (std::size_t i : order) {
    Predictor f{space, std::move(tables[i])};
    std::vector<double> res(envs.size());
    for (std::size_t ei = 0; ei < envs.size(); ++ei) {
      res[ei] = scalar_gradient(f, envs[ei], loss);
    }
    set.solutions.push_back(std::move(f));
    set.vars.push_back(std::move(ms.roots[i]));
    set.residuals.push_back(std::move(res));
    set.basin_counts.push_back(ms.basin_counts[i]);
  }
  return set;
}

}  // namespace

SolutionSet solve_scalar_invariant(std::span<const Environment> envs, Loss loss,
                                   Restriction restriction, std::uint64_t seed,
                                   Exec exec) {
  if (envs.empty()) {
    throw std::invalid_argument("solve_scalar_invariant: no environments");
  }
  const OutcomeSpace& space = envs.front().space;
  for (const Environment& e : envs) {
    require_same_space(space, e.space, "solve_scalar_invariant");
  }
  const VariableMap map = make_variable_map(space, restriction);
  const ScalarSystem system(envs, loss, map);

  const auto starts = solver_starts(map.dim, seed);
  NewtonOptions options;
  MultiStartResult ms = multistart_newton(
      map.dim, static_cast<int>(envs.size()),
      [&](std::span<const double> v, std::span<double> out) {
        system.residual(v, out);
      },
      [&](std::span<const double> v, std::span<double> out) {
        system.jacobian(v, out);
      },
      starts, options, exec);
  ms.diagnostics.lattice_points = starts.size() >= 200 ? starts.size() - 200 : 0;
  ms.diagnostics.random_points = starts.size() - ms.diagnostics.lattice_points;
  return build_solution_set(envs, loss, restriction, map, std::move(ms));
}

OddClosedForm two_bit_odd_closed_form(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::domain_error("two_bit_odd_closed_form: alpha outside (0,1)");
  }
  OddClosedForm out;
  out.a = 1.0 - 2.0 * alpha;
  if (std::abs(out.a) < 1e-12) {
    throw std::domain_error("two_bit_odd_closed_form: degenerate at alpha = 1/2");
  }
  const OutcomeSpace space = two_bit_space();
  out.solutions.push_back(zero_predictor(space));
  out.solutions.push_back(linear_predictor(space, {out.a, 0.0}));
  out.discriminant = 0.5 - 1.0 / (4.0 * out.a * out.a);
  out.has_cross_solutions = out.discriminant > 0.0;
  if (out.discriminant >= 0.0) {
    out.w1 = 1.0 / (2.0 * out.a);
    out.w2 = std::sqrt(out.discriminant);
  }
  if (out.has_cross_solutions) {
    out.solutions.push_back(linear_predictor(space, {out.w1, out.w2}));
    out.solutions.push_back(linear_predictor(space, {out.w1, -out.w2}));
  }
  std::sort(out.solutions.begin(), out.solutions.end(),
            [](const Predictor& a, const Predictor& b) {
              return a.values < b.values;
            });
  return out;
}

AffineBetaDecomposition affine_beta_decomposition(const Predictor& phi,
                                                  double alpha, Loss loss) {
  if (!(phi.space == two_bit_space())) {
    throw std::invalid_argument("affine_beta_decomposition: needs the two-bit space");
  }
  const double eps = 1e-3;
  const double g0 = scalar_gradient(phi, two_bit_env(alpha, eps), loss);
  const double g1 = scalar_gradient(phi, two_bit_env(alpha, 1.0 - eps), loss);
  AffineBetaDecomposition d;
  d.beta_coefficient = (g1 - g0) / (1.0 - 2.0 * eps);
  d.constant_term = g0 - eps * d.beta_coefficient;
  for (double beta : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    const double g = scalar_gradient(phi, two_bit_env(alpha, beta), loss);
    if (std::abs(d.constant_term + beta * d.beta_coefficient - g) > 1e-10) {
      throw std::logic_error("affine_beta_decomposition: residual check failed");
    }
  }
  return d;
}

std::optional<Predictor> irm_s_select(const SolutionSet& set,
                                      std::span<const Environment> envs,
                                      Loss loss) {
  if (set.solutions.empty()) return std::nullopt;
  std::size_t best = 0;
  double best_loss = 0.0;
  for (std::size_t k = 0; k < set.solutions.size(); ++k) {
    double total = 0.0;
    for (const Environment& e : envs) {
      total += population_loss(set.solutions[k], e, loss);
    }
    if (k == 0 || total < best_loss) {
      best = k;
      best_loss = total;
    }
  }
  return set.solutions[best];
}

std::optional<Predictor> irm_s_select(std::span<const Environment> envs, Loss loss,
                                      Restriction restriction, std::uint64_t seed,
                                      Exec exec) {
  const SolutionSet set =
      solve_scalar_invariant(envs, loss, restriction, seed, exec);
  return irm_s_select(set, envs, loss);
}

}  // namespace irm
