#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace posefuse {

/// Deterministic random stream. Draws are built from the raw 64-bit engine
/// output instead of std:: distributions, whose algorithms are
/// implementation defined, so a seed reproduces the same sequence everywhere.
class SeededRandomSource {
 public:
  explicit SeededRandomSource(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream for one unit of work (for example a
  /// (person, joint, frame) triple), derived from the master seed by counter
  /// values. Independent of thread scheduling.
  static SeededRandomSource derive(std::uint64_t master,
                                   std::initializer_list<std::uint64_t> keys);

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), n > 0. Rejection sampling, no modulo bias.
  std::uint64_t index(std::uint64_t n);

  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace posefuse
