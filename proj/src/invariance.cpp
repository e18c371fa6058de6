#include "irm/invariance.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace irm {

namespace {

struct EnvMasses {
  // Per environment: P(X = x) and E[Y 1{X = x}] per point.
  std::vector<std::vector<double>> den;
  std::vector<std::vector<double>> num;
  std::size_t num_envs = 0;
  std::size_t num_points = 0;
};

EnvMasses make_masses(std::span<const Environment> envs) {
  if (envs.empty()) {
    throw std::invalid_argument("invariance: no environments");
  }
  const OutcomeSpace& space = envs.front().space;
  for (const Environment& e : envs) {
    if (!(e.space == space)) {
      throw std::invalid_argument("invariance: outcome spaces differ");
    }
  }
  EnvMasses m;
  m.num_envs = envs.size();
  m.num_points = space.num_x();
  m.den.resize(m.num_envs);
  m.num.resize(m.num_envs);
  for (std::size_t ei = 0; ei < m.num_envs; ++ei) {
    m.den[ei].resize(m.num_points);
    m.num[ei].resize(m.num_points);
    for (std::size_t xi = 0; xi < m.num_points; ++xi) {
      m.den[ei][xi] = envs[ei].x_mass(xi);
      m.num[ei][xi] = envs[ei].y_mass(xi);
    }
  }
  return m;
}

// Scratch accumulators for the hot partition check; cell-major layout.
struct ScanScratch {
  std::vector<double> num;  // [cell * num_envs + env]
  std::vector<double> den;
};

bool partition_invariant(const std::vector<std::uint8_t>& rgs, int num_cells,
                         const EnvMasses& m, double tol, ScanScratch& s) {
  const std::size_t ke = static_cast<std::size_t>(num_cells) * m.num_envs;
  s.num.assign(ke, 0.0);
  s.den.assign(ke, 0.0);
  for (std::size_t ei = 0; ei < m.num_envs; ++ei) {
    const double* den = m.den[ei].data();
    const double* num = m.num[ei].data();
    for (std::size_t xi = 0; xi < m.num_points; ++xi) {
      const std::size_t slot = rgs[xi] * m.num_envs + ei;
      s.den[slot] += den[xi];
      s.num[slot] += num[xi];
    }
  }
  for (int c = 0; c < num_cells; ++c) {
    double lo = 0.0, hi = 0.0;
    bool seen = false;
    for (std::size_t ei = 0; ei < m.num_envs; ++ei) {
      const std::size_t slot = static_cast<std::size_t>(c) * m.num_envs + ei;
      if (s.den[slot] <= 0.0) continue;
      const double mean = s.num[slot] / s.den[slot];
      if (!seen) {
        lo = hi = mean;
        seen = true;
      } else {
        lo = std::min(lo, mean);
        hi = std::max(hi, mean);
      }
    }
    if (seen && hi - lo > tol) return false;
  }
  return true;
}

}  // namespace

InvarianceReport is_invariant_partition(const Partition& p,
                                        std::span<const Environment> envs,
                                        double tol) {
  const EnvMasses m = make_masses(envs);
  if (p.cell_of.size() != m.num_points) {
    throw std::invalid_argument("is_invariant_partition: partition size mismatch");
  }
  InvarianceReport report;
  for (const auto& members : p.cells()) {
    CellInvariance cell;
    cell.members = members;
    for (std::size_t ei = 0; ei < m.num_envs; ++ei) {
      double num = 0.0, den = 0.0;
      for (std::size_t xi : members) {
        num += m.num[ei][xi];
        den += m.den[ei][xi];
      }
      cell.env_means.push_back(den > 0.0 ? std::optional<double>(num / den)
                                         : std::nullopt);
    }
    for (std::size_t a = 0; a < m.num_envs; ++a) {
      for (std::size_t b = a + 1; b < m.num_envs; ++b) {
        if (cell.env_means[a] && cell.env_means[b]) {
          cell.max_deviation = std::max(
              cell.max_deviation, std::abs(*cell.env_means[a] - *cell.env_means[b]));
        }
      }
    }
    cell.consistent = cell.max_deviation <= tol;
    report.invariant = report.invariant && cell.consistent;
    report.cells.push_back(std::move(cell));
  }
  return report;
}

std::vector<std::uint64_t> scan_invariant_partitions(std::span<const Environment> envs,
                                                     double tol, Exec exec) {
  const EnvMasses m = make_masses(envs);
  const int n = static_cast<int>(m.num_points);
  const std::uint64_t total = bell_number(n);
  constexpr std::uint64_t kBlock = 8192;
  const std::size_t num_blocks =
      static_cast<std::size_t>((total + kBlock - 1) / kBlock);
  std::vector<std::vector<std::uint64_t>> block_hits(num_blocks);

  parallel_for(num_blocks, exec, [&](std::size_t bi) {
    const std::uint64_t lo = static_cast<std::uint64_t>(bi) * kBlock;
    const std::uint64_t hi = std::min(total, lo + kBlock);
    Partition p = PartitionEnumerator::unrank(n, lo);
    std::vector<std::uint8_t> pmax;
    rgs_prefix_max(p.cell_of, pmax);
    ScanScratch scratch;
    auto& hits = block_hits[bi];
    for (std::uint64_t rank = lo; rank < hi; ++rank) {
      const int cells = static_cast<int>(pmax.back()) + 1;
      if (partition_invariant(p.cell_of, cells, m, tol, scratch)) {
        hits.push_back(rank);
      }
      if (rank + 1 < hi && !rgs_advance(p.cell_of, pmax)) break;
    }
  });

  std::vector<std::uint64_t> hits;
  for (auto& block : block_hits) {
    hits.insert(hits.end(), block.begin(), block.end());
  }
  return hits;
}

InvariantPredictorSet invariant_predictors_full(std::span<const Environment> envs,
                                                Loss loss, double tol, Exec exec) {
  const EnvMasses m = make_masses(envs);
  const int n = static_cast<int>(m.num_points);
  const OutcomeSpace& space = envs.front().space;

  InvariantPredictorSet set;
  set.loss = loss;
  set.tol = tol;
  set.partitions_scanned = bell_number(n);

  const std::vector<std::uint64_t> hits = scan_invariant_partitions(envs, tol, exec);
  set.invariant_partitions = hits.size();

  constexpr double kDedupTol = 1e-6;
  for (std::uint64_t rank : hits) {
    Partition p = PartitionEnumerator::unrank(n, rank);
    const auto cells = p.cells();
    std::vector<double> cell_values(cells.size(), 0.0);
    bool separable = false;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double num = 0.0, den = 0.0;
      for (std::size_t ei = 0; ei < m.num_envs; ++ei) {
        for (std::size_t xi : cells[c]) {
          num += m.num[ei][xi];
          den += m.den[ei][xi];
        }
      }
      if (den <= 0.0) continue;  // unsupported cell, value stays 0
      try {
        cell_values[c] = pointwise_optimal(num / den, loss);
      } catch (const separability_error&) {
        separable = true;
        break;
      }
    }
    if (separable) {
      set.skipped.push_back("partition rank " + std::to_string(rank) +
                            " skipped: deterministic cell under logistic loss");
      continue;
    }
    Predictor f = zero_predictor(space);
    for (std::size_t xi = 0; xi < static_cast<std::size_t>(n); ++xi) {
      f.values[xi] = cell_values[p.cell_of[xi]];
    }
    Witness w{std::move(p), std::move(cell_values)};

    bool merged = false;
    for (std::size_t k = 0; k < set.predictors.size(); ++k) {
      double dist = 0.0;
      for (std::size_t xi = 0; xi < f.values.size(); ++xi) {
        dist = std::max(dist, std::abs(f.values[xi] - set.predictors[k].values[xi]));
      }
      if (dist <= kDedupTol) {
        set.witnesses[k].push_back(std::move(w));
        merged = true;
        break;
      }
    }
    if (!merged) {
      set.predictors.push_back(std::move(f));
      set.witnesses.push_back({std::move(w)});
    }
  }

  // Canonical order: lexicographic by value table.
  std::vector<std::size_t> order(set.predictors.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return set.predictors[a].values < set.predictors[b].values;
  });
  std::vector<Predictor> predictors;
  std::vector<std::vector<Witness>> witnesses;
  for (std::size_t i : order) {
    predictors.push_back(std::move(set.predictors[i]));
    witnesses.push_back(std::move(set.witnesses[i]));
  }
  set.predictors = std::move(predictors);
  set.witnesses = std::move(witnesses);
  return set;
}

std::vector<SubsetScanRow> subset_invariance_scan(std::span<const Environment> probes,
                                                  double tol) {
  const EnvMasses m = make_masses(probes);
  if (m.num_points > 9) {
    throw std::invalid_argument("subset_invariance_scan: more than 9 points");
  }
  const std::uint32_t limit = 1u << m.num_points;
  std::vector<SubsetScanRow> rows;
  rows.reserve(limit - 1);
  for (std::uint32_t mask = 1; mask < limit; ++mask) {
    SubsetScanRow row;
    row.mask = mask;
    double lo = 0.0, hi = 0.0, pooled_num = 0.0, pooled_den = 0.0;
    bool seen = false;
    for (std::size_t ei = 0; ei < m.num_envs; ++ei) {
      double num = 0.0, den = 0.0;
      for (std::size_t xi = 0; xi < m.num_points; ++xi) {
        if (mask & (1u << xi)) {
          num += m.num[ei][xi];
          den += m.den[ei][xi];
        }
      }
      if (den <= 0.0) continue;
      const double mean = num / den;
      pooled_num += num;
      pooled_den += den;
      if (!seen) {
        lo = hi = mean;
        seen = true;
      } else {
        lo = std::min(lo, mean);
        hi = std::max(hi, mean);
      }
    }
    row.invariant = !seen || hi - lo <= tol;
    if (row.invariant && pooled_den > 0.0) {
      row.common_mean = pooled_num / pooled_den;
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<SubsetScanRow> subset_invariance_scan(const EnvironmentFamily& family,
                                                  std::span<const double> probe_params,
                                                  double tol) {
  if (probe_params.size() < 3) {
    throw std::invalid_argument("subset_invariance_scan: need >= 3 probe parameters");
  }
  std::vector<Environment> probes;
  probes.reserve(probe_params.size());
  for (double p : probe_params) probes.push_back(family.at(p));
  return subset_invariance_scan(std::span<const Environment>(probes), tol);
}

std::optional<Predictor> irm_select(const InvariantPredictorSet& set,
                                    std::span<const Environment> envs, Loss loss) {
  if (set.predictors.empty()) return std::nullopt;
  std::size_t best = 0;
  double best_loss = 0.0;
  for (std::size_t k = 0; k < set.predictors.size(); ++k) {
    double total = 0.0;
    for (const Environment& e : envs) {
      total += population_loss(set.predictors[k], e, loss);
    }
    if (k == 0 || total < best_loss) {
      best = k;
      best_loss = total;
    }
  }
  return set.predictors[best];
}

std::optional<Predictor> irm_select(std::span<const Environment> envs, Loss loss,
                                    double tol, Exec exec) {
  return irm_select(invariant_predictors_full(envs, loss, tol, exec), envs, loss);
}

}  // namespace irm
