#pragma once

#include <cstdint>
#include <string>

#include "certirand/bitstring.hpp"

namespace certirand {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_str(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

// Counter-based deterministic generator. A stream is (key, counter); the key
// is derived from a root seed by domain-separation labels, so every device and
// the referee draw from independent, replayable streams. Not cryptographic.
class RngStream {
 public:
  RngStream() : key_(0) {}
  explicit RngStream(std::uint64_t key) : key_(key) {}

  static RngStream derive(std::uint64_t root, const std::string& label, std::uint64_t index = 0) {
    std::uint64_t k = detail::splitmix64(root ^ detail::hash_str(label));
    k = detail::splitmix64(k ^ (0xA5A5A5A5A5A5A5A5ULL + index));
    return RngStream(k);
  }

  RngStream derive_child(const std::string& label, std::uint64_t index = 0) const {
    return derive(key_, label, index);
  }

  std::uint64_t next_u64() {
    std::uint64_t v = detail::splitmix64(key_ ^ detail::splitmix64(counter_));
    ++counter_;
    return v;
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool next_bit() { return next_u64() >> 63; }

  // Uniform in [0, bound) by rejection; bound >= 1.
  std::uint64_t next_below(std::uint64_t bound) {
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % bound;
  }

  BitString next_bits(std::size_t nbits) {
    BitString out(nbits);
    for (std::size_t i = 0; i < nbits; i += 64) {
      std::uint64_t w = next_u64();
      std::size_t take = nbits - i < 64 ? nbits - i : 64;
      for (std::size_t j = 0; j < take; ++j) out.set(i + j, (w >> (63 - j)) & 1);
    }
    return out;
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace certirand
