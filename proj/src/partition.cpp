#include "irm/partition.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

namespace irm {

namespace {

constexpr int kMaxN = 12;

// completions[i][m]: number of ways to fill RGS positions i..n-1 when the
// prefix maximum is m.
using CompletionTable = std::array<std::array<std::uint64_t, kMaxN + 2>, kMaxN + 1>;

CompletionTable completion_table(int n) {
  CompletionTable d{};
  for (int m = 0; m <= kMaxN + 1; ++m) d[static_cast<std::size_t>(n)][static_cast<std::size_t>(m)] = 1;
  for (int i = n - 1; i >= 0; --i) {
    for (int m = kMaxN; m >= 0; --m) {
      d[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)] =
          (static_cast<std::uint64_t>(m) + 1) *
              d[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(m)] +
          d[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(m + 1)];
    }
  }
  return d;
}

void check_n(int n) {
  if (n < 1 || n > kMaxN) {
    throw std::invalid_argument("partition enumeration supports 1..12 points");
  }
}

}  // namespace

int Partition::num_cells() const {
  std::uint8_t mx = 0;
  for (std::uint8_t c : cell_of) mx = std::max(mx, c);
  return cell_of.empty() ? 0 : mx + 1;
}

std::vector<std::vector<std::size_t>> Partition::cells() const {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(num_cells()));
  for (std::size_t i = 0; i < cell_of.size(); ++i) {
    out[cell_of[i]].push_back(i);
  }
  return out;
}

std::uint64_t bell_number(int n) {
  check_n(n);
  return completion_table(n)[1][0];
}

void rgs_prefix_max(const std::vector<std::uint8_t>& rgs,
                    std::vector<std::uint8_t>& prefix_max) {
  prefix_max.resize(rgs.size());
  std::uint8_t m = 0;
  for (std::size_t i = 0; i < rgs.size(); ++i) {
    m = std::max(m, rgs[i]);
    prefix_max[i] = m;
  }
}

bool rgs_advance(std::vector<std::uint8_t>& rgs,
                 std::vector<std::uint8_t>& prefix_max) {
  const int n = static_cast<int>(rgs.size());
  // Rightmost position that can still grow: rgs[i] <= prefix_max[i-1].
  int i = n - 1;
  while (i >= 1 && rgs[static_cast<std::size_t>(i)] >
                       prefix_max[static_cast<std::size_t>(i - 1)]) {
    --i;
  }
  if (i < 1) return false;
  ++rgs[static_cast<std::size_t>(i)];
  prefix_max[static_cast<std::size_t>(i)] =
      std::max(prefix_max[static_cast<std::size_t>(i - 1)],
               rgs[static_cast<std::size_t>(i)]);
  for (int j = i + 1; j < n; ++j) {
    rgs[static_cast<std::size_t>(j)] = 0;
    prefix_max[static_cast<std::size_t>(j)] =
        prefix_max[static_cast<std::size_t>(j - 1)];
  }
  return true;
}

PartitionEnumerator::PartitionEnumerator(int n) : n_(n) {
  check_n(n);
  total_ = bell_number(n);
  rgs_.assign(static_cast<std::size_t>(n), 0);
  prefix_max_.assign(static_cast<std::size_t>(n), 0);
}

bool PartitionEnumerator::next(Partition& out) {
  if (first_) {
    first_ = false;
    out.cell_of = rgs_;
    return true;
  }
  if (!rgs_advance(rgs_, prefix_max_)) return false;
  out.cell_of = rgs_;
  return true;
}

Partition PartitionEnumerator::unrank(int n, std::uint64_t rank) {
  check_n(n);
  const CompletionTable d = completion_table(n);
  if (rank >= d[1][0]) {
    throw std::out_of_range("partition rank out of range");
  }
  Partition p;
  p.cell_of.assign(static_cast<std::size_t>(n), 0);
  int m = 0;
  for (int i = 1; i < n; ++i) {
    for (int v = 0; v <= m + 1; ++v) {
      const int next_max = std::max(m, v);
      const std::uint64_t cnt =
          d[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(next_max)];
      if (rank < cnt) {
        p.cell_of[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v);
        m = next_max;
        break;
      }
      rank -= cnt;
    }
  }
  return p;
}

}  // namespace irm
