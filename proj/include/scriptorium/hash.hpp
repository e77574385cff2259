#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace scriptorium {

// FNV-1a, used for content digests in manifests and provenance blocks.
class Fnv1a {
 public:
  void update(const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  void update_u64(uint64_t v) { update(&v, sizeof(v)); }
  void update_str(const std::string& s) { update(s.data(), s.size()); }
  uint64_t digest() const { return state_; }

 private:
  uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline uint64_t fnv1a(const void* data, size_t len) {
  Fnv1a h;
  h.update(data, len);
  return h.digest();
}

inline std::string hex_digest(uint64_t value) {
  static const char* k = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = k[value & 0xf];
    value >>= 4;
  }
  return out;
}

}  // namespace scriptorium
