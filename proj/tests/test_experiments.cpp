#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "irm/experiments.hpp"

using namespace irm;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("experiment registry") {
  const auto ids = experiment_ids();
  CHECK(ids.size() == 13);
  CHECK(ids.front() == "motivating-025");
  CHECK_THROWS_AS(experiment_anchor("nope"), std::invalid_argument);
  CHECK(experiment_anchor("app-d-scan") == "app-d");
}

TEST_CASE("every experiment passes its embedded reference table") {
  const fs::path dir = fs::temp_directory_path() / "irm_experiments_test";
  fs::remove_all(dir);
  const auto reports = run_all_experiments(dir, {});
  REQUIRE(reports.size() == 13);

  // One reference per value in the embedded tables; the audit freezes the counts.
  const std::map<std::string, std::size_t> expected_counts = {
      {"motivating-025", 11}, {"failure-01", 25},   {"fig1-loci", 9},
      {"fig2-losses", 2},     {"fig3-path", 10},    {"fig5-noisy", 5},
      {"app-a3-logistic", 11}, {"fig6-loci", 9},    {"fig7-losses", 2},
      {"sec4-prop2", 7},      {"app-d-scan", 8},    {"app-e-counterexample", 4},
      {"app-b-table1", 20},
  };
  for (const auto& rep : reports) {
    INFO("experiment ", rep.id);
    for (const auto& c : rep.checks) {
      INFO("check ", c.name, " expected ", c.expected, " actual ", c.actual);
      CHECK(c.pass);
    }
    REQUIRE(expected_counts.count(rep.id) == 1);
    CHECK(rep.checks.size() == expected_counts.at(rep.id));
    for (const auto& c : rep.checks) CHECK_FALSE(c.source.empty());
  }
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "app-d-scan" / "scan.csv"));
  CHECK(fs::exists(dir / "app-d-scan" / "scan.csv.json"));
  CHECK(fs::exists(dir / "fig3-path" / "report.json"));
}

TEST_CASE("experiments are byte-deterministic under a fixed seed") {
  const fs::path dir_a = fs::temp_directory_path() / "irm_det_a";
  const fs::path dir_b = fs::temp_directory_path() / "irm_det_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  run_experiment("motivating-025", dir_a, {});
  run_experiment("motivating-025", dir_b, {});
  for (const char* name : {"predictors.csv", "losses.csv"}) {
    CHECK(slurp(dir_a / "motivating-025" / name) ==
          slurp(dir_b / "motivating-025" / name));
  }
}

TEST_CASE("unknown experiment ids are rejected") {
  CHECK_THROWS_AS(run_experiment("bogus", fs::temp_directory_path(), {}),
                  std::invalid_argument);
}
