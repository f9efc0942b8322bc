#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace trajx {

// Per-stage seed: splitmix64 over the run seed mixed with the FNV-1a hash of
// the stage name, truncated to 53 bits so it survives a JSON round trip in
// any language.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage);

// mt19937_64 with explicit integer-to-real conversion so draws do not depend
// on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Uniform integer in [0, n).
  int below(int n) { return static_cast<int>(engine_() % static_cast<std::uint64_t>(n)); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace trajx
