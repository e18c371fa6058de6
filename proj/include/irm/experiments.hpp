#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "irm/csv.hpp"
#include "irm/parallel.hpp"

namespace irm {

// One embedded reference comparison. Interval references encode the bracket
// as expected = midpoint, tol = half-width.
struct RefCheck {
  std::string name;
  double expected = 0.0;
  double actual = 0.0;
  double tol = 0.0;
  bool pass = false;
  std::string source;  // anchor of the reference table this value comes from
};

struct ExperimentReport {
  std::string id;
  std::string anchor;
  std::map<std::string, std::string> params;
  std::vector<std::pair<std::string, CsvTable>> blocks;
  std::vector<RefCheck> checks;
  double wall_seconds = 0.0;

  bool pass() const;
  std::string summary() const;  // one line per check plus a verdict
};

struct ExperimentOptions {
  std::uint64_t seed = 0;
  Exec exec = Exec::parallel;
};

std::vector<std::string> experiment_ids();
std::string experiment_anchor(const std::string& id);

// Runs one experiment, writing each block as <name>.csv plus a .json mirror
// and a report.json under out_dir/<id>/. Unknown ids throw.
ExperimentReport run_experiment(const std::string& id,
                                const std::filesystem::path& out_dir,
                                const ExperimentOptions& options = {});

// Every id in order; also writes manifest.json listing ids and anchors.
std::vector<ExperimentReport> run_all_experiments(
    const std::filesystem::path& out_dir, const ExperimentOptions& options = {});

}  // namespace irm
