#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mnar {

// SplitMix64 finaliser.
std::uint64_t mix64(std::uint64_t z);

// Child seed for replication `rep` of grid cell `cell`:
//   mix64(mix64(mix64(master) ^ (cell + 1) * G) ^ (rep + 1) * G2)
// with G = 0x9E3779B97F4A7C15, G2 = 0xD1B54A32D192ED03 (wrapping arithmetic).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell, std::uint64_t rep);

/// Counter-based generator. The k-th raw variate (k = 0, 1, ...) of stream
/// (seed, lane, index) is
///   key = mix64(mix64(seed ^ lane * G2) + index * G)
///   raw_k = mix64(key + (k + 1) * G)
/// so any variate can be recomputed without replaying earlier ones. Samplers
/// give every observation its own `index` and every role its own `lane`.
///
/// Variate consumption: uniform(), normal() and below() each take exactly one raw value.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t lane, std::uint64_t index);

  std::uint64_t next_u64();
  double uniform();                    // in (0,1): ((raw >> 11) + 0.5) * 2^-53
  double normal();                     // inverse normal CDF of uniform()
  std::uint64_t below(std::uint64_t n);  // floor(uniform() * n), clamped to n - 1
  std::uint64_t consumed() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Fisher-Yates on 0..n-1 driven by Stream(seed, lane, 0); one raw variate per swap.
std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed, std::uint64_t lane = 0);

}  // namespace mnar
