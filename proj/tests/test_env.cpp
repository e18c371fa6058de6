#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "irm/env.hpp"

using namespace irm;

namespace {

double pmf_at(const Environment& e, const XPoint& x, double y) {
  const int xi = e.space.index_of(x);
  REQUIRE(xi >= 0);
  for (std::size_t yi = 0; yi < e.space.num_y(); ++yi) {
    if (e.space.y_points[yi] == y) return e.prob(static_cast<std::size_t>(xi), yi);
  }
  FAIL("y not in space");
  return 0.0;
}

double coord_moment(const Environment& e, int coord, int y_power) {
  std::vector<double> per_x(e.space.num_x());
  for (std::size_t i = 0; i < e.space.num_x(); ++i) {
    per_x[i] = e.space.x_points[i][static_cast<std::size_t>(coord)];
  }
  return e.expectation(per_x, y_power);
}

}  // namespace

TEST_CASE("two-bit pmf entries match the hand expansion") {
  const Environment e = two_bit_env(0.25, 0.1);
  // 1/2 (1-a)(1-b) and 1/2 a b
  CHECK(std::abs(pmf_at(e, {1, 1}, 1.0) - 0.3375) < 1e-15);
  CHECK(std::abs(pmf_at(e, {1, 1}, -1.0) - 0.0125) < 1e-15);
}

TEST_CASE("two-bit fully symmetric case is uniform") {
  const Environment e = two_bit_env(0.5, 0.5);
  for (double p : e.pmf) CHECK(std::abs(p - 0.125) < 1e-15);
}

TEST_CASE("two-bit moment identities") {
  const Environment e = two_bit_env(0.25, 0.1);
  std::vector<double> x1x2(e.space.num_x());
  for (std::size_t i = 0; i < e.space.num_x(); ++i) {
    x1x2[i] = e.space.x_points[i][0] * e.space.x_points[i][1];
  }
  CHECK(std::abs(coord_moment(e, 0, 1) - 0.5) < 1e-12);
  CHECK(std::abs(coord_moment(e, 1, 1) - 0.8) < 1e-12);
  CHECK(std::abs(e.expectation(x1x2, 0) - 0.4) < 1e-12);
}

TEST_CASE("two-bit parameter domain") {
  CHECK_THROWS_AS(two_bit_env(0.0, 0.5), std::domain_error);
  CHECK_THROWS_AS(two_bit_env(1.0, 0.5), std::domain_error);
  CHECK_THROWS_AS(two_bit_env(0.5, -0.1), std::domain_error);
  CHECK_THROWS_AS(two_bit_env(0.5, 1.5), std::domain_error);
}

TEST_CASE("constructed environments satisfy the invariants: 1000 draws") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uab(0.001, 0.999);
  std::uniform_real_distribution<double> uth(-1.0 / 6.0 + 1e-3, 1.0 / 3.0 - 1e-3);
  for (int i = 0; i < 1000; ++i) {
    const Environment e = two_bit_env(uab(rng), uab(rng));
    CHECK_NOTHROW(e.validate(1e-12, 1e-12));
    const Environment s = section4_env(uth(rng));
    CHECK_NOTHROW(s.validate(1e-12));
  }
}

TEST_CASE("three-level conditional structure") {
  SUBCASE("theta = 0 turns the correction off") {
    const Environment e = section4_env(0.0);
    for (int x1 = -1; x1 <= 1; ++x1) {
      for (int x2 = -1; x2 <= 1; ++x2) {
        CHECK(section4_g(0.0, x1, x2) == 0.0);
      }
    }
    // E[Y | X1 = 1] = 0.3
    double num = 0.0, den = 0.0;
    for (std::size_t xi = 0; xi < e.space.num_x(); ++xi) {
      if (e.space.x_points[xi][0] != 1) continue;
      num += e.y_mass(xi);
      den += e.x_mass(xi);
    }
    CHECK(std::abs(num / den - 0.3) < 1e-12);
  }

  SUBCASE("correction has zero conditional mean given either coordinate") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uth(-1.0 / 6.0 + 1e-3,
                                               1.0 / 3.0 - 1e-3);
    for (int rep = 0; rep < 100; ++rep) {
      const double theta = uth(rng);
      const Environment e = section4_env(theta);
      for (int v = -1; v <= 1; ++v) {
        for (int coord = 0; coord < 2; ++coord) {
          double gsum = 0.0, mass = 0.0, ysum = 0.0;
          for (std::size_t xi = 0; xi < e.space.num_x(); ++xi) {
            const XPoint& x = e.space.x_points[xi];
            if (x[static_cast<std::size_t>(coord)] != v) continue;
            const double px = e.x_mass(xi);
            gsum += px * section4_g(theta, x[0], x[1]);
            ysum += e.y_mass(xi);
            mass += px;
          }
          CHECK(std::abs(gsum / mass) < 1e-12);
          // E[Y | X_coord = v] = 0.3 v
          CHECK(std::abs(ysum / mass - 0.3 * v) < 1e-12);
        }
      }
    }
  }

  SUBCASE("domain ends are rejected") {
    CHECK_THROWS_AS(section4_env(-1.0 / 6.0), std::domain_error);
    CHECK_THROWS_AS(section4_env(1.0 / 3.0), std::domain_error);
  }
}

TEST_CASE("piecewise map branches") {
  SUBCASE("continuity at the knot") {
    const Environment a = piecewise_pi_env(0.25);
    const Environment b = two_bit_env(0.1, 0.3);
    for (std::size_t i = 0; i < a.pmf.size(); ++i) {
      CHECK(std::abs(a.pmf[i] - b.pmf[i]) < 1e-15);
    }
  }
  SUBCASE("left branch") {
    const Environment e = piecewise_pi_env(0.125);
    CHECK(e.params.at("alpha") == 0.1);
    CHECK(std::abs(e.params.at("beta") - 0.15) < 1e-15);
  }
  SUBCASE("right branch") {
    const Environment e = piecewise_pi_env(0.5);
    CHECK(std::abs(e.params.at("alpha") - 0.4) < 1e-15);
    CHECK(e.params.at("beta") == 0.3);
  }
  SUBCASE("domain") {
    CHECK_THROWS_AS(piecewise_pi_env(0.0), std::domain_error);
    CHECK_THROWS_AS(piecewise_pi_env(1.0), std::domain_error);
  }
}

TEST_CASE("environment file round trip and validation") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "irm_env_test";
  fs::create_directories(dir);

  SUBCASE("round trip is entrywise exact") {
    const Environment e = two_bit_env(0.25, 0.1);
    save_environments(dir / "roundtrip.json", {e});
    const auto loaded = load_environments(dir / "roundtrip.json");
    REQUIRE(loaded.size() == 1);
    REQUIRE(loaded[0].space == e.space);
    for (std::size_t i = 0; i < e.pmf.size(); ++i) {
      CHECK(std::abs(loaded[0].pmf[i] - e.pmf[i]) < 1e-15);
    }
  }

  SUBCASE("noisy parameters keep their moments") {
    save_environments(dir / "noisy.json", {two_bit_env(0.245, 0.105)});
    const auto loaded = load_environments(dir / "noisy.json");
    CHECK(std::abs(coord_moment(loaded[0], 1, 1) - 0.79) < 1e-12);
  }

  SUBCASE("bad mass sums are rejected") {
    std::ofstream out(dir / "bad_sum.json");
    out << R"({"x_points": [[1],[-1]], "y_points": [-1, 1],
               "environments": [{"label": "bad",
                                 "pmf": [[0.24, 0.25], [0.25, 0.24]]}]})";
    out.close();
    CHECK_THROWS_WITH_AS(static_cast<void>(load_environments(dir / "bad_sum.json")),
                         doctest::Contains("sums to"), std::runtime_error);
  }

  SUBCASE("negative mass names the entry") {
    std::ofstream out(dir / "neg.json");
    out << R"({"x_points": [[1],[-1]], "y_points": [-1, 1],
               "environments": [{"label": "neg",
                                 "pmf": [[0.75, 0.25], [0.25, -0.25]]}]})";
    out.close();
    CHECK_THROWS_WITH_AS(static_cast<void>(load_environments(dir / "neg.json")),
                         doctest::Contains("negative mass"), std::runtime_error);
  }

  SUBCASE("mismatched grid shape is rejected") {
    std::ofstream out(dir / "shape.json");
    out << R"({"x_points": [[1],[-1]], "y_points": [-1, 1],
               "environments": [{"label": "shape", "pmf": [[0.5, 0.5]]}]})";
    out.close();
    CHECK_THROWS_WITH_AS(static_cast<void>(load_environments(dir / "shape.json")),
                         doctest::Contains("rows"), std::runtime_error);
  }
}

TEST_CASE("outcome space guards") {
  OutcomeSpace s = two_bit_space();
  CHECK(s.sign_symmetric());
  s.x_points.push_back({1, 1});
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("family parameter domains") {
  const auto f = EnvironmentFamily::section4();
  CHECK(f.param_domain().first == doctest::Approx(-1.0 / 6.0));
  CHECK_THROWS_AS(f.at(0.4), std::domain_error);
  const auto c = EnvironmentFamily::custom({two_bit_env(0.1, 0.2)});
  CHECK(c.at(0.0).label == "(0.1,0.2)");
}
