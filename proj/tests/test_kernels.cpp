#include <doctest.h>

#include "irm/invariance.hpp"
#include "irm/risk.hpp"

using namespace irm;

// The OpenMP kernels must reproduce the serial reference bit for bit: every
// work item runs the same code path and the merges are index-ordered.

TEST_CASE("partition scan: serial vs parallel") {
  const std::vector<Environment> envs = {section4_env(-0.1), section4_env(0.2)};
  const auto serial = scan_invariant_partitions(envs, 1e-9, Exec::serial);
  const auto parallel = scan_invariant_partitions(envs, 1e-9, Exec::parallel);
  CHECK(serial == parallel);
  CHECK_FALSE(serial.empty());
}

TEST_CASE("family sweep: serial vs parallel") {
  const Predictor f = linear_predictor(three_level_space(), {0.0, 0.3});
  const auto family = EnvironmentFamily::section4();
  const auto serial = loss_sweep(f, family, Loss::square, {}, Exec::serial);
  const auto parallel = loss_sweep(f, family, Loss::square, {}, Exec::parallel);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].param == parallel[i].param);
    CHECK(serial[i].value == parallel[i].value);
  }
}

TEST_CASE("sup risk agrees across policies") {
  const Predictor f = linear_predictor(two_bit_space(), {0.6, 0.2});
  const auto family = EnvironmentFamily::two_bit(0.1);
  const auto a = ood_sup_risk(f, family, Loss::square, {}, Exec::serial);
  const auto b = ood_sup_risk(f, family, Loss::square, {}, Exec::parallel);
  CHECK(a.value == b.value);
  CHECK(a.at_param == b.at_param);
}
