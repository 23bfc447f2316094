#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace t2sc {

// Thin wrapper over mt19937_64. The engine's output sequence is fixed by the
// standard, and index sampling below uses rejection rather than a
// library-specific distribution, so a seed reproduces across toolchains.
class SeededRandom {
 public:
  explicit SeededRandom(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);

  /// Derives an independent child seed from a master seed and a label such
  /// as "q17/run2/sc-3".
  static std::uint64_t derive(std::uint64_t master, std::string_view label);

 private:
  std::mt19937_64 engine_;
};

}  // namespace t2sc
