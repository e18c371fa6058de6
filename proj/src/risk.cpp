#include "irm/risk.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace irm {

Loss loss_from_string(const std::string& s) {
  if (s == "square") return Loss::square;
  if (s == "logistic") return Loss::logistic;
  throw std::invalid_argument("unknown loss: " + s);
}

std::string to_string(Loss loss) {
  return loss == Loss::square ? "square" : "logistic";
}

double Predictor::value_at(const XPoint& x) const {
  const int i = space.index_of(x);
  if (i < 0) {
    throw std::invalid_argument("Predictor: point " + point_label(x) +
                                " not in space");
  }
  return values[static_cast<std::size_t>(i)];
}

bool Predictor::is_odd(double tol) const {
  const auto neg = space.negation_indices();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (neg[i] < 0) continue;
    if (std::abs(values[i] + values[static_cast<std::size_t>(neg[i])]) > tol) {
      return false;
    }
  }
  return true;
}

Predictor linear_predictor(const OutcomeSpace& space,
                           const std::vector<double>& coeffs, double constant) {
  Predictor f{space, std::vector<double>(space.num_x(), constant)};
  for (std::size_t i = 0; i < space.num_x(); ++i) {
    const XPoint& x = space.x_points[i];
    if (coeffs.size() > x.size()) {
      throw std::invalid_argument("linear_predictor: more weights than coordinates");
    }
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
      f.values[i] += coeffs[k] * x[k];
    }
  }
  return f;
}

Predictor zero_predictor(const OutcomeSpace& space) {
  return Predictor{space, std::vector<double>(space.num_x(), 0.0)};
}

double loss_value(Loss loss, double prediction, double y) {
  if (loss == Loss::square) {
    const double d = prediction - y;
    return 0.5 * d * d;
  }
  // log(1 + exp(-p*y)), stable for large |p|
  const double m = -prediction * y;
  return m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
}

namespace {

void require_same_space(const OutcomeSpace& a, const OutcomeSpace& b,
                        const char* what) {
  if (!(a == b)) {
    throw std::invalid_argument(std::string(what) + ": outcome spaces differ");
  }
}

void require_sign_labels(const Environment& e, const char* what) {
  for (double y : e.space.y_points) {
    if (y != 1.0 && y != -1.0) {
      throw std::invalid_argument(std::string(what) +
                                  ": logistic loss needs labels in {-1,+1}");
    }
  }
}

}  // namespace

double population_loss(const Predictor& f, const Environment& e, Loss loss) {
  require_same_space(f.space, e.space, "population_loss");
  if (loss == Loss::logistic) require_sign_labels(e, "population_loss");
  double total = 0.0;
  for (std::size_t xi = 0; xi < e.space.num_x(); ++xi) {
    for (std::size_t yi = 0; yi < e.space.num_y(); ++yi) {
      const double p = e.prob(xi, yi);
      if (p == 0.0) continue;
      total += p * loss_value(loss, f.values[xi], e.space.y_points[yi]);
    }
  }
  return total;
}

std::optional<double> conditional_mean(const Environment& e,
                                       std::span<const std::size_t> subset) {
  if (subset.empty()) {
    throw std::invalid_argument("conditional_mean: empty subset");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t xi : subset) {
    num += e.y_mass(xi);
    den += e.x_mass(xi);
  }
  if (den <= 0.0) return std::nullopt;
  return num / den;
}

std::optional<double> conditional_mean(const Environment& e,
                                       const std::vector<XPoint>& subset) {
  std::vector<std::size_t> idx;
  idx.reserve(subset.size());
  for (const XPoint& x : subset) {
    const int i = e.space.index_of(x);
    if (i < 0) {
      throw std::invalid_argument("conditional_mean: point " + point_label(x) +
                                  " not in space");
    }
    idx.push_back(static_cast<std::size_t>(i));
  }
  return conditional_mean(e, std::span<const std::size_t>(idx));
}

double pointwise_optimal(double mean, Loss loss) {
  if (loss == Loss::square) return mean;
  if (std::abs(mean) > 1.0 + 1e-12) {
    throw std::invalid_argument("pointwise_optimal: |mean| > 1");
  }
  if (1.0 - std::abs(mean) <= 0.0) {
    throw separability_error(
        "pointwise_optimal: deterministic label, logistic optimum is infinite");
  }
  return std::log((1.0 + mean) / (1.0 - mean));
}

Predictor erm_solve(std::span<const Environment> envs, Loss loss) {
  if (envs.empty()) throw std::invalid_argument("erm_solve: no environments");
  const OutcomeSpace& space = envs.front().space;
  for (const Environment& e : envs) {
    require_same_space(space, e.space, "erm_solve");
    if (loss == Loss::logistic) require_sign_labels(e, "erm_solve");
  }
  Predictor f = zero_predictor(space);
  for (std::size_t xi = 0; xi < space.num_x(); ++xi) {
    double num = 0.0, den = 0.0;
    for (const Environment& e : envs) {
      num += e.y_mass(xi);
      den += e.x_mass(xi);
    }
    if (den > 0.0) {
      f.values[xi] = pointwise_optimal(num / den, loss);
    }
  }
  return f;
}

std::vector<double> family_param_grid(const EnvironmentFamily& family,
                                      const GridSpec& grid) {
  if (grid.points < 2) {
    throw std::invalid_argument("family_param_grid: need at least 2 points");
  }
  auto [lo, hi] = family.param_domain();
  if (family.kind == EnvironmentFamily::Kind::custom) {
    std::vector<double> params;
    for (std::size_t i = 0; i < family.members.size(); ++i) {
      params.push_back(static_cast<double>(i));
    }
    return params;
  }
  const double a = lo + grid.endpoint_inset;
  const double b = hi - grid.endpoint_inset;
  if (!(a < b)) {
    throw std::invalid_argument("family_param_grid: inset exceeds the domain");
  }
  std::vector<double> params(static_cast<std::size_t>(grid.points));
  for (int i = 0; i < grid.points; ++i) {
    params[static_cast<std::size_t>(i)] =
        a + (b - a) * static_cast<double>(i) / (grid.points - 1);
  }
  return params;
}

std::vector<SweepPoint> loss_sweep(const Predictor& f,
                                   const EnvironmentFamily& family, Loss loss,
                                   const GridSpec& grid, Exec exec) {
  const std::vector<double> params = family_param_grid(family, grid);
  std::vector<SweepPoint> out(params.size());
  parallel_for(params.size(), exec, [&](std::size_t i) {
    const Environment e = family.at(params[i]);
    out[i] = SweepPoint{params[i], population_loss(f, e, loss)};
  });
  return out;
}

SupRisk ood_sup_risk(const Predictor& f, const EnvironmentFamily& family,
                     Loss loss, const GridSpec& grid, Exec exec) {
  const auto sweep = loss_sweep(f, family, loss, grid, exec);
  SupRisk sup;
  sup.value = sweep.front().value;
  sup.at_param = sweep.front().param;
  for (const SweepPoint& p : sweep) {
    if (p.value > sup.value) {
      sup.value = p.value;
      sup.at_param = p.param;
    }
  }
  sup.endpoint_bound = family.kind == EnvironmentFamily::Kind::two_bit &&
                       loss == Loss::square;
  return sup;
}

}  // namespace irm
