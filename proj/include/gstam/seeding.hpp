#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gstam {

using Rng = std::mt19937_64;

// Derives an independent stream seed from a run seed and a stage label, so
// reseeding one stage (say "split") leaves every other stage untouched.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label, std::uint64_t index = 0);

// 64-bit FNV-1a, used for dataset checksums and parameter fingerprints.
class Fnv1a {
 public:
  void update(const void* data, std::size_t bytes);
  void update(double value) { update(&value, sizeof value); }
  void update(std::uint64_t value) { update(&value, sizeof value); }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace gstam
