#include "trajx/rng.hpp"

#include "trajx/env_config.hpp"

namespace trajx {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage) {
  std::uint64_t z = seed ^ fnv1a64(stage);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z & ((std::uint64_t{1} << 53) - 1);
}

}  // namespace trajx
