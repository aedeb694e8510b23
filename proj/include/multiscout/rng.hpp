#pragma once

#include <cstdint>
#include <random>

namespace multiscout {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent child seeds from a master seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ (index * 0xD1B54A32D192ED03ULL + 1));
}

// Labelled sub-streams so adding a new consumer never shifts existing ones.
enum class SeedStream : std::uint64_t {
  Scene = 1,
  Phase = 2,
  Noise = 3,
  Solver = 4,
  Motion = 5,
  Association = 6,
};

constexpr std::uint64_t derive_seed(std::uint64_t master, SeedStream stream,
                                    std::uint64_t index = 0) {
  return derive_seed(derive_seed(master, static_cast<std::uint64_t>(stream)), index);
}

}  // namespace multiscout
