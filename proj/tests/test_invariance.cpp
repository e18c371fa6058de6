#include <doctest.h>

#include <cmath>
#include <random>

#include "irm/invariance.hpp"

using namespace irm;

namespace {

std::vector<Environment> failure_pair() {
  return {two_bit_env(0.1, 0.2), two_bit_env(0.1, 0.25)};
}

Partition two_bit_partition_by_x1() {
  Partition p;
  p.cell_of = {0, 0, 1, 1};
  return p;
}

double table_distance(const Predictor& f, const std::vector<double>& table) {
  double m = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    m = std::max(m, std::abs(f.values[i] - table[i]));
  }
  return m;
}

bool set_contains(const InvariantPredictorSet& set,
                  const std::vector<double>& table, double tol) {
  for (const Predictor& f : set.predictors) {
    if (table_distance(f, table) <= tol) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("partition invariance on the two-bit family") {
  const auto envs = failure_pair();

  SUBCASE("grouping by x1 is invariant with means +-0.8") {
    const auto report =
        is_invariant_partition(two_bit_partition_by_x1(), envs, 1e-9);
    CHECK(report.invariant);
    REQUIRE(report.cells.size() == 2);
    CHECK(std::abs(*report.cells[0].env_means[0] - 0.8) < 1e-12);
    CHECK(std::abs(*report.cells[1].env_means[1] + 0.8) < 1e-12);
  }
  SUBCASE("grouping by x2 is not invariant") {
    Partition p;
    p.cell_of = {0, 1, 0, 1};
    const auto report = is_invariant_partition(p, envs, 1e-9);
    CHECK_FALSE(report.invariant);
    CHECK(report.cells[0].max_deviation > 0.05);
  }
  SUBCASE("grouping by the product is invariant with zero means") {
    Partition p;
    p.cell_of = {0, 1, 1, 0};
    const auto report = is_invariant_partition(p, envs, 1e-9);
    CHECK(report.invariant);
    for (const auto& cell : report.cells) {
      for (const auto& mean : cell.env_means) {
        CHECK(std::abs(*mean) < 1e-15);
      }
    }
  }
}

TEST_CASE("full invariant predictor sets on two-bit training pairs") {
  SUBCASE("square loss: the zero predictor and 0.8 x1") {
    const auto set =
        invariant_predictors_full(failure_pair(), Loss::square, 1e-9);
    REQUIRE(set.predictors.size() == 2);
    CHECK(set_contains(set, {0, 0, 0, 0}, 1e-12));
    CHECK(set_contains(set, {0.8, 0.8, -0.8, -0.8}, 1e-12));
    // Witness structure: the zero predictor arises from the all-of-X cell and
    // the x1*x2 grouping; 0.8 x1 only from the x1 grouping.
    std::size_t total_witnesses = 0;
    for (const auto& w : set.witnesses) total_witnesses += w.size();
    CHECK(total_witnesses == 3);
    CHECK(set.invariant_partitions == 3);
    CHECK(set.partitions_scanned == 15);
  }
  SUBCASE("logistic loss keeps only the log-odds x1 predictor") {
    const std::vector<Environment> envs = {two_bit_env(0.05, 0.1),
                                           two_bit_env(0.05, 0.2)};
    const auto set = invariant_predictors_full(envs, Loss::logistic, 1e-9);
    REQUIRE(set.predictors.size() == 2);
    const double c = std::log(19.0);
    CHECK(set_contains(set, {0, 0, 0, 0}, 1e-12));
    CHECK(set_contains(set, {c, c, -c, -c}, 1e-3));
  }
}

TEST_CASE("three-level invariant predictors use at most one coordinate") {
  const std::vector<Environment> envs = {section4_env(-0.1), section4_env(0.2)};
  const auto set = invariant_predictors_full(envs, Loss::square, 1e-9);
  const OutcomeSpace& space = envs.front().space;

  auto depends_only_on = [&](const Predictor& f, int coord) {
    for (std::size_t a = 0; a < space.num_x(); ++a) {
      for (std::size_t b = 0; b < space.num_x(); ++b) {
        if (space.x_points[a][static_cast<std::size_t>(coord)] ==
                space.x_points[b][static_cast<std::size_t>(coord)] &&
            std::abs(f.values[a] - f.values[b]) > 1e-9) {
          return false;
        }
      }
    }
    return true;
  };
  for (const Predictor& f : set.predictors) {
    CHECK((depends_only_on(f, 0) || depends_only_on(f, 1)));
  }

  // f0, 0.3 x1, 0.3 x2 and the two coarse-cell variants with values -+0.15.
  CHECK(set.predictors.size() == 5);
  std::vector<double> t1(space.num_x()), t2(space.num_x());
  for (std::size_t i = 0; i < space.num_x(); ++i) {
    t1[i] = 0.3 * space.x_points[i][0];
    t2[i] = 0.3 * space.x_points[i][1];
  }
  CHECK(set_contains(set, t1, 1e-9));
  CHECK(set_contains(set, t2, 1e-9));
  std::vector<double> coarse(space.num_x());
  for (std::size_t i = 0; i < space.num_x(); ++i) {
    coarse[i] = space.x_points[i][0] == 1 ? 0.3 : -0.15;
  }
  CHECK(set_contains(set, coarse, 1e-9));
}

TEST_CASE("subset scans") {
  SUBCASE("two-bit table at alpha 0.25") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> ub(0.05, 0.95);
    std::vector<double> betas;
    for (int i = 0; i < 5; ++i) betas.push_back(ub(rng));
    const auto rows = subset_invariance_scan(EnvironmentFamily::two_bit(0.25),
                                             betas, 1e-9);
    REQUIRE(rows.size() == 15);
    // Point order (1,1),(1,-1),(-1,1),(-1,-1): the beta-independent subsets.
    std::map<std::uint32_t, double> expect = {
        {3, 0.5}, {6, 0.0}, {9, 0.0}, {12, -0.5}, {15, 0.0}};
    std::size_t invariant = 0;
    for (const auto& r : rows) {
      if (expect.count(r.mask)) {
        CHECK(r.invariant);
        CHECK(std::abs(*r.common_mean - expect[r.mask]) < 1e-9);
        ++invariant;
      } else {
        CHECK_FALSE(r.invariant);
      }
    }
    CHECK(invariant == 5);
  }
  SUBCASE("singleton subsets vary with beta") {
    const auto rows = subset_invariance_scan(
        EnvironmentFamily::two_bit(0.25), std::vector<double>{0.1, 0.4, 0.7},
        1e-9);
    CHECK_FALSE(rows[0].invariant);  // mask 1 = {(1,1)}
  }
  SUBCASE("three-level scan: 37 invariant subsets, 6 with nonzero mean") {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> ut(-1.0 / 6.0 + 0.01, 1.0 / 3.0 - 0.01);
    std::vector<double> thetas;
    for (int i = 0; i < 5; ++i) thetas.push_back(ut(rng));
    const auto rows =
        subset_invariance_scan(EnvironmentFamily::section4(), thetas, 1e-9);
    REQUIRE(rows.size() == 511);
    std::size_t invariant = 0, nonzero = 0;
    for (const auto& r : rows) {
      if (!r.invariant) continue;
      ++invariant;
      if (r.common_mean && std::abs(*r.common_mean) > 1e-9) ++nonzero;
    }
    CHECK(invariant == 37);
    CHECK(nonzero == 6);
  }
  SUBCASE("probe count contract") {
    CHECK_THROWS_AS(subset_invariance_scan(EnvironmentFamily::two_bit(0.25),
                                           std::vector<double>{0.1, 0.2}, 1e-9),
                    std::invalid_argument);
  }
}

TEST_CASE("selection by summed training loss") {
  SUBCASE("motivating pair selects 0.5 x1") {
    const std::vector<Environment> envs = {two_bit_env(0.25, 0.1),
                                           two_bit_env(0.25, 0.2)};
    const auto f = irm_select(envs, Loss::square, 1e-9);
    REQUIRE(f.has_value());
    CHECK(table_distance(*f, {0.5, 0.5, -0.5, -0.5}) < 1e-9);
  }
  SUBCASE("failure pair selects 0.8 x1") {
    const auto f = irm_select(failure_pair(), Loss::square, 1e-9);
    REQUIRE(f.has_value());
    CHECK(table_distance(*f, {0.8, 0.8, -0.8, -0.8}) < 1e-9);
  }
  SUBCASE("perturbed environments keep only the zero predictor") {
    const std::vector<Environment> envs = {two_bit_env(0.245, 0.105),
                                           two_bit_env(0.255, 0.195),
                                           two_bit_env(0.251, 0.302)};
    const auto set = invariant_predictors_full(envs, Loss::square, 1e-6);
    REQUIRE(set.predictors.size() == 1);
    CHECK(table_distance(set.predictors[0], {0, 0, 0, 0}) < 1e-15);
    const auto f = irm_select(set, envs, Loss::square);
    REQUIRE(f.has_value());
    CHECK(table_distance(*f, {0, 0, 0, 0}) < 1e-15);
  }
}

TEST_CASE("deterministic cells under logistic loss are skipped with a note") {
  // One point carries a deterministic label; the partition isolating it has
  // no finite logistic optimum and must be skipped, not fabricated.
  OutcomeSpace space{{{1}, {-1}}, {-1.0, 1.0}};
  const Environment e =
      environment_from_pmf(space, {0.0, 0.5, 0.25, 0.25}, "separable");
  const auto set = invariant_predictors_full(
      std::vector<Environment>{e}, Loss::logistic, 1e-9);
  REQUIRE(set.predictors.size() == 1);
  REQUIRE(set.skipped.size() == 1);
  // The surviving coarse partition pools to mean 1/2, log-odds log(3).
  CHECK(std::abs(set.predictors[0].values[0] - std::log(3.0)) < 1e-12);
}

TEST_CASE("unsupported cells never veto invariance") {
  OutcomeSpace space{{{1}, {-1}}, {-1.0, 1.0}};
  // First environment puts no mass on (-1); conditional mean there is
  // undefined and must be compatible with anything.
  const Environment a =
      environment_from_pmf(space, {0.3, 0.7, 0.0, 0.0}, "one-sided");
  const Environment b =
      environment_from_pmf(space, {0.15, 0.35, 0.25, 0.25}, "full");
  Partition fine;
  fine.cell_of = {0, 1};
  const auto report =
      is_invariant_partition(fine, std::vector<Environment>{a, b}, 1e-9);
  CHECK(report.invariant);
  CHECK_FALSE(report.cells[1].env_means[0].has_value());
  CHECK(report.cells[1].env_means[1].has_value());
}

TEST_CASE("piecewise map counterexample") {
  std::vector<Environment> train;
  for (double t : {0.05, 0.1, 0.15, 0.2, 0.25}) train.push_back(piecewise_pi_env(t));
  const Partition by_x1 = two_bit_partition_by_x1();
  CHECK(is_invariant_partition(by_x1, train, 1e-9).invariant);

  // The x1 predictor on the training range is 0.8 x1 and it passes the
  // gradient-free invariance check, yet theta = 0.5 breaks it.
  const auto mean =
      conditional_mean(train.front(), std::vector<XPoint>{{1, 1}, {1, -1}});
  CHECK(std::abs(*mean - 0.8) < 1e-12);

  std::vector<Environment> extended = train;
  extended.push_back(piecewise_pi_env(0.5));
  CHECK_FALSE(is_invariant_partition(by_x1, extended, 1e-9).invariant);
}

TEST_CASE("two training environments identify the family-wide invariant set") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ua(0.05, 0.95);
  std::uniform_real_distribution<double> ub(0.02, 0.98);
  for (int rep = 0; rep < 50; ++rep) {
    const double alpha = ua(rng);
    double b1 = ub(rng), b2 = ub(rng);
    if (std::abs(b1 - b2) < 0.05) b2 = b1 < 0.5 ? b1 + 0.3 : b1 - 0.3;
    const std::vector<Environment> pair = {two_bit_env(alpha, b1),
                                           two_bit_env(alpha, b2)};
    std::vector<Environment> ten;
    for (int k = 0; k < 10; ++k) ten.push_back(two_bit_env(alpha, ub(rng)));

    const auto set2 = invariant_predictors_full(pair, Loss::square, 1e-9);
    const auto set10 = invariant_predictors_full(ten, Loss::square, 1e-9);
    REQUIRE(set2.predictors.size() == set10.predictors.size());
    for (std::size_t i = 0; i < set2.predictors.size(); ++i) {
      CHECK(table_distance(set2.predictors[i], set10.predictors[i].values) <
            1e-9);
    }
  }
}

TEST_CASE("repeated runs produce identical sets in identical order") {
  const auto envs = failure_pair();
  const auto a = invariant_predictors_full(envs, Loss::square, 1e-9, Exec::serial);
  const auto b = invariant_predictors_full(envs, Loss::square, 1e-9, Exec::parallel);
  REQUIRE(a.predictors.size() == b.predictors.size());
  for (std::size_t i = 0; i < a.predictors.size(); ++i) {
    CHECK(a.predictors[i].values == b.predictors[i].values);
    CHECK(a.witnesses[i].size() == b.witnesses[i].size());
  }
}
