#pragma once

#include <cstdint>
#include <vector>

namespace irm {

// Set partition of {0..n-1} stored as a restricted growth string:
// cell_of[0] = 0 and cell_of[i] <= max(cell_of[0..i-1]) + 1.
struct Partition {
  std::vector<std::uint8_t> cell_of;

  int num_cells() const;
  std::vector<std::vector<std::size_t>> cells() const;
  bool operator==(const Partition&) const = default;
};

std::uint64_t bell_number(int n);

// Low-level restricted-growth-string stepping, shared by the enumerator and
// the block-parallel scan kernels.
void rgs_prefix_max(const std::vector<std::uint8_t>& rgs,
                    std::vector<std::uint8_t>& prefix_max);
bool rgs_advance(std::vector<std::uint8_t>& rgs,
                 std::vector<std::uint8_t>& prefix_max);

// Streams every partition of an n-point set exactly once, in lexicographic
// RGS order. n <= 12 (Bell(12) = 4,213,597).
class PartitionEnumerator {
 public:
  explicit PartitionEnumerator(int n);

  bool next(Partition& out);
  std::uint64_t total() const { return total_; }

  static Partition unrank(int n, std::uint64_t rank);

 private:
  int n_;
  std::uint64_t total_;
  bool first_ = true;
  std::vector<std::uint8_t> rgs_;
  std::vector<std::uint8_t> prefix_max_;
};

}  // namespace irm
