#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "irm/env.hpp"
#include "irm/parallel.hpp"

namespace irm {

enum class Loss { square, logistic };

Loss loss_from_string(const std::string& s);
std::string to_string(Loss loss);

// Raised when a conditional label is deterministic and the logistic
// pointwise optimum would be infinite.
class separability_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Real-valued table over the x-points of a space.
struct Predictor {
  OutcomeSpace space;
  std::vector<double> values;

  double value_at(const XPoint& x) const;
  bool is_odd(double tol = 1e-12) const;  // f(x) = -f(-x) wherever -x exists
};

// f(x) = constant + sum_k coeffs[k] * x[k]
Predictor linear_predictor(const OutcomeSpace& space,
                           const std::vector<double>& coeffs,
                           double constant = 0.0);
Predictor zero_predictor(const OutcomeSpace& space);

double loss_value(Loss loss, double prediction, double y);

// L_e(f) = sum_{x,y} pmf(x,y) * loss(f(x), y)
double population_loss(const Predictor& f, const Environment& e, Loss loss);

// E[Y | X in S]; empty optional when P(X in S) = 0 (a value, not an error).
std::optional<double> conditional_mean(const Environment& e,
                                       std::span<const std::size_t> subset);
std::optional<double> conditional_mean(const Environment& e,
                                       const std::vector<XPoint>& subset);

// Square loss: the mean itself. Logistic: log((1+mean)/(1-mean)); |mean| = 1
// raises separability_error.
double pointwise_optimal(double mean, Loss loss);

// Unrestricted minimizer of the summed population losses: per point, the
// pointwise optimum of the pooled conditional mean. Points with zero pooled
// mass get value 0.
Predictor erm_solve(std::span<const Environment> envs, Loss loss);

struct GridSpec {
  int points = 2001;
  double endpoint_inset = 1e-4;
};

std::vector<double> family_param_grid(const EnvironmentFamily& family,
                                      const GridSpec& grid);

struct SweepPoint {
  double param;
  double value;
};

std::vector<SweepPoint> loss_sweep(const Predictor& f,
                                   const EnvironmentFamily& family, Loss loss,
                                   const GridSpec& grid = {},
                                   Exec exec = Exec::parallel);

struct SupRisk {
  double value = 0.0;
  double at_param = 0.0;
  // Set when the loss is affine in the family parameter, so the inset
  // endpoints bound the open-interval supremum.
  bool endpoint_bound = false;
};

SupRisk ood_sup_risk(const Predictor& f, const EnvironmentFamily& family,
                     Loss loss, const GridSpec& grid = {},
                     Exec exec = Exec::parallel);

}  // namespace irm
