#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "irm/env.hpp"
#include "irm/parallel.hpp"
#include "irm/partition.hpp"
#include "irm/risk.hpp"

namespace irm {

struct CellInvariance {
  std::vector<std::size_t> members;
  std::vector<std::optional<double>> env_means;  // per environment
  double max_deviation = 0.0;  // over environment pairs with defined means
  bool consistent = true;
};

struct InvarianceReport {
  bool invariant = true;
  std::vector<CellInvariance> cells;
};

// A partition is invariant when, cell by cell, the conditional label means
// agree (within tol) across every pair of environments giving the cell
// positive mass. Cells unsupported in an environment never veto.
InvarianceReport is_invariant_partition(const Partition& p,
                                        std::span<const Environment> envs,
                                        double tol);

struct Witness {
  Partition partition;
  std::vector<double> cell_values;  // downstream value per cell
};

struct InvariantPredictorSet {
  Loss loss = Loss::square;
  double tol = 0.0;
  std::vector<Predictor> predictors;             // lexicographic by table
  std::vector<std::vector<Witness>> witnesses;   // parallel to predictors
  std::vector<std::string> skipped;              // separability warnings
  std::uint64_t partitions_scanned = 0;
  std::uint64_t invariant_partitions = 0;
};

// Enumerates all partitions of the x-points, keeps the invariant ones, and
// builds each witness predictor from the pooled per-cell conditional means
// (cells with zero mass everywhere get value 0). Deduplicated at the
// predictor level, so one predictor may carry several witnesses.
InvariantPredictorSet invariant_predictors_full(std::span<const Environment> envs,
                                                Loss loss, double tol,
                                                Exec exec = Exec::parallel);

struct SubsetScanRow {
  std::uint32_t mask = 0;
  bool invariant = false;
  std::optional<double> common_mean;  // defined when invariant and supported
};

// Classifies every non-empty subset S of the x-points by whether
// E[Y | X in S] is the same across the probe environments. |X| <= 9.
std::vector<SubsetScanRow> subset_invariance_scan(std::span<const Environment> probes,
                                                  double tol);
std::vector<SubsetScanRow> subset_invariance_scan(const EnvironmentFamily& family,
                                                  std::span<const double> probe_params,
                                                  double tol);

// Member of the invariant set with the least summed training loss; ties go
// to the lexicographically smallest table. Empty optional when the set is
// empty ("no invariant predictor").
std::optional<Predictor> irm_select(const InvariantPredictorSet& set,
                                    std::span<const Environment> envs,
                                    Loss loss);
std::optional<Predictor> irm_select(std::span<const Environment> envs, Loss loss,
                                    double tol, Exec exec = Exec::parallel);

// Kernel shared by invariant_predictors_full and the benchmarks: ranks of
// the invariant partitions, in enumeration order.
std::vector<std::uint64_t> scan_invariant_partitions(std::span<const Environment> envs,
                                                     double tol, Exec exec);

}  // namespace irm
