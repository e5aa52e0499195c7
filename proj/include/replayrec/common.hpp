#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace replayrec {

using Rng = std::mt19937_64;

// Error categories map onto CLI exit codes (2 config, 3 data, 4 divergence).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Derives independent named RNG streams from a single root seed, so that
// changing one component's configuration leaves the others' draws intact.
class SeedStreams {
 public:
  explicit SeedStreams(std::uint64_t root) : root_(root) {}

  std::uint64_t root() const { return root_; }
  std::uint64_t seed_for(std::string_view name) const;
  Rng stream(std::string_view name) const { return Rng(seed_for(name)); }

 private:
  std::uint64_t root_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace replayrec
