#include <doctest.h>

#include <cmath>
#include <random>

#include "irm/risk.hpp"

using namespace irm;

namespace {

std::vector<Environment> failure_pair() {
  return {two_bit_env(0.1, 0.2), two_bit_env(0.1, 0.25)};
}

Predictor from_table(const OutcomeSpace& space, std::vector<double> v) {
  return Predictor{space, std::move(v)};
}

}  // namespace

TEST_CASE("population loss basics") {
  const Environment e = two_bit_env(0.37, 0.81);
  CHECK(population_loss(zero_predictor(e.space), e, Loss::square) ==
        doctest::Approx(0.5).epsilon(1e-14));

  // Reference table from the pooled-mean computation.
  const Predictor f_erm =
      from_table(e.space, {0.8889, -0.3077, 0.3077, -0.8889});
  CHECK(std::abs(population_loss(f_erm, two_bit_env(0.25, 0.9), Loss::square) -
                 0.985) < 1e-3);

  const Predictor f_irm = linear_predictor(e.space, {0.8, 0.0});
  CHECK(std::abs(population_loss(f_irm, two_bit_env(0.1, 0.9), Loss::square) -
                 0.18) < 1e-12);
}

TEST_CASE("population loss contract checks") {
  const Environment e = two_bit_env(0.1, 0.2);
  const Predictor f = zero_predictor(three_level_space());
  CHECK_THROWS_AS(population_loss(f, e, Loss::square), std::invalid_argument);
}

TEST_CASE("loss is linear in the pmf: mixtures") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uab(0.05, 0.95);
  std::uniform_real_distribution<double> uval(-2.0, 2.0);
  for (int rep = 0; rep < 50; ++rep) {
    const Environment e1 = two_bit_env(uab(rng), uab(rng));
    const Environment e2 = two_bit_env(uab(rng), uab(rng));
    const double t = uab(rng);
    std::vector<double> pmf(e1.pmf.size());
    for (std::size_t i = 0; i < pmf.size(); ++i) {
      pmf[i] = t * e1.pmf[i] + (1.0 - t) * e2.pmf[i];
    }
    const Environment mix = environment_from_pmf(e1.space, pmf, "mix");
    Predictor f = zero_predictor(e1.space);
    for (double& v : f.values) v = uval(rng);
    for (Loss loss : {Loss::square, Loss::logistic}) {
      const double lhs = population_loss(f, mix, loss);
      const double rhs = t * population_loss(f, e1, loss) +
                         (1.0 - t) * population_loss(f, e2, loss);
      CHECK(std::abs(lhs - rhs) < 1e-12);
    }
  }
}

TEST_CASE("conditional means over subsets") {
  const Environment e = two_bit_env(0.25, 0.1);
  SUBCASE("x1 = +1 rows give 1 - 2 alpha") {
    const auto m = conditional_mean(e, std::vector<XPoint>{{1, 1}, {1, -1}});
    REQUIRE(m.has_value());
    CHECK(std::abs(*m - 0.5) < 1e-12);
  }
  SUBCASE("the full set is centered") {
    const auto m = conditional_mean(
        e, std::vector<XPoint>{{1, 1}, {1, -1}, {-1, 1}, {-1, -1}});
    REQUIRE(m.has_value());
    CHECK(std::abs(*m) < 1e-15);
  }
  SUBCASE("singleton matches the closed form") {
    const auto m = conditional_mean(e, std::vector<XPoint>{{1, 1}});
    REQUIRE(m.has_value());
    CHECK(std::abs(*m - 0.65 / 0.70) < 1e-12);
  }
  SUBCASE("zero-mass subsets are undefined, not an error") {
    std::vector<double> pmf = {0.5, 0.5, 0.0, 0.0};
    OutcomeSpace space{{{1}, {-1}}, {-1.0, 1.0}};
    const Environment sparse = environment_from_pmf(space, pmf, "sparse");
    const auto m = conditional_mean(sparse, std::vector<XPoint>{{-1}});
    CHECK_FALSE(m.has_value());
  }
  SUBCASE("empty subsets violate the contract") {
    CHECK_THROWS_AS(conditional_mean(e, std::vector<XPoint>{}),
                    std::invalid_argument);
  }
}

TEST_CASE("pointwise optima") {
  CHECK(pointwise_optimal(0.0, Loss::square) == 0.0);
  CHECK(pointwise_optimal(0.0, Loss::logistic) == 0.0);
  CHECK(pointwise_optimal(0.5, Loss::square) == 0.5);
  CHECK(std::abs(pointwise_optimal(0.9, Loss::logistic) - std::log(19.0)) <
        1e-12);
  CHECK_THROWS_AS(pointwise_optimal(1.0, Loss::logistic), separability_error);
  CHECK_THROWS_AS(pointwise_optimal(-1.0, Loss::logistic), separability_error);
  CHECK_THROWS_AS(pointwise_optimal(1.5, Loss::logistic), std::invalid_argument);
}

TEST_CASE("pointwise training-loss minimizer") {
  SUBCASE("motivating reference table") {
    const std::vector<Environment> envs = {two_bit_env(0.25, 0.1),
                                           two_bit_env(0.25, 0.2)};
    const Predictor f = erm_solve(envs, Loss::square);
    const std::vector<double> expect = {0.8889, -0.3077, 0.3077, -0.8889};
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(std::abs(f.values[i] - expect[i]) < 1e-4);
    }
  }
  SUBCASE("failure-scenario reference table") {
    const auto envs = failure_pair();
    const Predictor f = erm_solve(envs, Loss::square);
    const std::vector<double> expect = {0.9375, 0.4464, -0.4464, -0.9375};
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(std::abs(f.values[i] - expect[i]) < 1e-4);
    }
  }
  SUBCASE("single environment reduces to its conditional means") {
    const Environment e = two_bit_env(0.3, 0.7);
    const Predictor f = erm_solve(std::vector<Environment>{e}, Loss::square);
    for (std::size_t xi = 0; xi < e.space.num_x(); ++xi) {
      const auto m = conditional_mean(e, std::vector<std::size_t>{xi});
      CHECK(std::abs(f.values[xi] - *m) < 1e-15);
    }
  }
  SUBCASE("square solution equals pooled means and beats random perturbations") {
    const auto envs = failure_pair();
    const Predictor f = erm_solve(envs, Loss::square);
    for (std::size_t xi = 0; xi < f.space.num_x(); ++xi) {
      double num = 0.0, den = 0.0;
      for (const Environment& e : envs) {
        num += e.y_mass(xi);
        den += e.x_mass(xi);
      }
      CHECK(std::abs(f.values[xi] - num / den) < 1e-12);
    }
    double base = 0.0;
    for (const Environment& e : envs) base += population_loss(f, e, Loss::square);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (int rep = 0; rep < 1000; ++rep) {
      Predictor g = f;
      for (double& v : g.values) v += u(rng);
      double total = 0.0;
      for (const Environment& e : envs) total += population_loss(g, e, Loss::square);
      CHECK(total >= base - 1e-12);
    }
  }
}

TEST_CASE("odd predictors") {
  const auto envs = failure_pair();
  // Symmetric environments make the pointwise minimizer odd automatically.
  CHECK(erm_solve(envs, Loss::square).is_odd(1e-12));
  CHECK(erm_solve(envs, Loss::logistic).is_odd(1e-12));
  CHECK(zero_predictor(two_bit_space()).is_odd());
  Predictor f = linear_predictor(two_bit_space(), {0.5, 0.25}, 0.1);
  CHECK_FALSE(f.is_odd());
  CHECK(linear_predictor(three_level_space(), {0.3, -0.2}).is_odd(1e-15));
}

TEST_CASE("three-level loss law of the x2 predictor") {
  const OutcomeSpace space = three_level_space();
  const Predictor f2 = linear_predictor(space, {0.0, 0.3});
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uth(-1.0 / 6.0 + 1e-4, 1.0 / 3.0 - 1e-4);
  for (int rep = 0; rep < 100; ++rep) {
    const double theta = uth(rng);
    const double loss = population_loss(f2, section4_env(theta), Loss::square);
    CHECK(std::abs(loss - (0.47 + 0.09 * theta)) < 1e-12);
  }
}

TEST_CASE("sup risk over families") {
  SUBCASE("predictors ignoring x2 are flat across beta") {
    const Predictor f = linear_predictor(two_bit_space(), {0.8, 0.0});
    const auto family = EnvironmentFamily::two_bit(0.1);
    const auto sweep = loss_sweep(f, family, Loss::square, GridSpec{501, 1e-4});
    double lo = sweep.front().value, hi = sweep.front().value;
    for (const auto& p : sweep) {
      lo = std::min(lo, p.value);
      hi = std::max(hi, p.value);
    }
    CHECK(hi - lo < 1e-12);
    const SupRisk sup = ood_sup_risk(f, family, Loss::square);
    CHECK(std::abs(sup.value - 0.18) < 1e-12);
    CHECK(sup.endpoint_bound);
  }
  SUBCASE("three-level sup risks of the two invariant predictors") {
    const OutcomeSpace space = three_level_space();
    const auto family = EnvironmentFamily::section4();
    const SupRisk s1 =
        ood_sup_risk(linear_predictor(space, {0.3, 0.0}), family, Loss::square);
    const SupRisk s2 =
        ood_sup_risk(linear_predictor(space, {0.0, 0.3}), family, Loss::square);
    CHECK(std::abs(s1.value - 0.47) < 1e-9);
    CHECK(std::abs(s2.value - 0.5) < 1e-3);
    CHECK(s2.value < 0.5);  // open-interval supremum approached from inside
    CHECK(s2.at_param > 0.33);
  }
  SUBCASE("grid contract") {
    const auto family = EnvironmentFamily::two_bit(0.1);
    const Predictor f = zero_predictor(two_bit_space());
    CHECK_THROWS_AS(ood_sup_risk(f, family, Loss::square, GridSpec{1, 1e-4}),
                    std::invalid_argument);
  }
}
