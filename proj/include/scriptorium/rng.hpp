#pragma once

#include <cstdint>

namespace scriptorium {

// Counter-based deterministic random stream. Every (root_seed, font_id,
// word_index) tuple derives an independent stream, so samples can be drawn
// in any order from any number of workers and still come out bit-identical.
class SampleRng {
 public:
  explicit SampleRng(uint64_t seed) : state_(mix(seed + kGamma)) {}

  // Stream seed for one sample of the dataset grid.
  static uint64_t derive(uint64_t root_seed, uint64_t a, uint64_t b);

  uint64_t next_u64();

  // Uniform double in [lo, hi). lo == hi collapses to the constant lo.
  double uniform(double lo, double hi);

  // Uniform integer in [lo, hi], both inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi);

 private:
  static constexpr uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  static uint64_t mix(uint64_t z);
  uint64_t state_;
};

}  // namespace scriptorium
