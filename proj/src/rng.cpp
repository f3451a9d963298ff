#include "mnar/rng.hpp"

#include <numeric>

#include "mnar/normal.hpp"

namespace mnar {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kGolden2 = 0xD1B54A32D192ED03ULL;
}  // namespace

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell, std::uint64_t rep) {
  return mix64(mix64(mix64(master) ^ ((cell + 1) * kGolden)) ^ ((rep + 1) * kGolden2));
}

Stream::Stream(std::uint64_t seed, std::uint64_t lane, std::uint64_t index)
    : key_(mix64(mix64(seed ^ (lane * kGolden2)) + index * kGolden)) {}

std::uint64_t Stream::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double Stream::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Stream::normal() { return norm_quantile(uniform()); }

std::uint64_t Stream::below(std::uint64_t n) {
  const auto k = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  return k < n ? k : n - 1;
}

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed, std::uint64_t lane) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  Stream s(seed, lane, 0);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(s.below(i));
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

}  // namespace mnar
