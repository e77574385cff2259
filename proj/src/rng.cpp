#include "scriptorium/rng.hpp"

namespace scriptorium {

uint64_t SampleRng::mix(uint64_t z) {
  // splitmix64 finalizer
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t SampleRng::derive(uint64_t root_seed, uint64_t a, uint64_t b) {
  uint64_t h = mix(root_seed + kGamma);
  h = mix(h ^ (a + kGamma));
  h = mix(h ^ (b + kGamma));
  return h;
}

uint64_t SampleRng::next_u64() {
  uint64_t z = (state_ += kGamma);
  return mix(z);
}

double SampleRng::uniform(double lo, double hi) {
  double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

int64_t SampleRng::uniform_int(int64_t lo, int64_t hi) {
  uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
  return lo + static_cast<int64_t>(next_u64() % span);
}

}  // namespace scriptorium
