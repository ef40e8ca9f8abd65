#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "certirand/errors.hpp"

namespace certirand {

// Ordered bit sequence. Bit 0 is the first (leftmost) bit; within a byte bits
// are stored MSB-first, so "A1" parses to 1010 0001 and bit 0 of it is 1.
class BitString {
 public:
  BitString() = default;
  explicit BitString(std::size_t nbits) : nbits_(nbits), bytes_((nbits + 7) / 8, 0) {}

  static BitString from_hex(const std::string& hex) {
    BitString out;
    out.nbits_ = hex.size() * 4;
    out.bytes_.assign((out.nbits_ + 7) / 8, 0);
    for (std::size_t i = 0; i < hex.size(); ++i) {
      char c = hex[i];
      int v;
      if (c >= '0' && c <= '9') v = c - '0';
      else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
      else if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
      else fail(errc::input_error, "bad hex digit in bit string");
      out.bytes_[i / 2] |= static_cast<std::uint8_t>(i % 2 == 0 ? v << 4 : v);
    }
    return out;
  }

  // Trailing pad bits of the final nibble are zero.
  std::string to_hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out;
    std::size_t nibbles = (nbits_ + 3) / 4;
    out.reserve(nibbles);
    for (std::size_t i = 0; i < nibbles; ++i) {
      std::uint8_t byte = bytes_[i / 2];
      out.push_back(digits[i % 2 == 0 ? byte >> 4 : byte & 0xF]);
    }
    return out;
  }

  static BitString zeros(std::size_t nbits) { return BitString(nbits); }

  std::size_t size() const { return nbits_; }
  bool empty() const { return nbits_ == 0; }

  bool get(std::size_t i) const { return (bytes_[i >> 3] >> (7 - (i & 7))) & 1; }

  void set(std::size_t i, bool v) {
    std::uint8_t mask = static_cast<std::uint8_t>(1u << (7 - (i & 7)));
    if (v) bytes_[i >> 3] |= mask;
    else bytes_[i >> 3] &= static_cast<std::uint8_t>(~mask);
  }

  void push_back(bool v) {
    if (nbits_ % 8 == 0) bytes_.push_back(0);
    ++nbits_;
    set(nbits_ - 1, v);
  }

  BitString slice(std::size_t start, std::size_t len) const {
    require(start + len <= nbits_, errc::input_error, "slice out of range");
    BitString out(len);
    for (std::size_t i = 0; i < len; ++i) out.set(i, get(start + i));
    return out;
  }

  // MSB-first integer value of bits [start, start+len).
  std::uint64_t uint_at(std::size_t start, std::size_t len) const {
    require(len <= 64 && start + len <= nbits_, errc::input_error, "uint_at out of range");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < len; ++i) v = (v << 1) | static_cast<std::uint64_t>(get(start + i));
    return v;
  }

  std::size_t popcount() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < nbits_; ++i) n += get(i);
    return n;
  }

  BitString operator^(const BitString& other) const {
    require(nbits_ == other.nbits_, errc::input_error, "xor length mismatch");
    BitString out(nbits_);
    for (std::size_t i = 0; i < bytes_.size(); ++i)
      out.bytes_[i] = static_cast<std::uint8_t>(bytes_[i] ^ other.bytes_[i]);
    return out;
  }

  bool operator==(const BitString& other) const {
    return nbits_ == other.nbits_ && bytes_ == other.bytes_;
  }
  bool operator!=(const BitString& other) const { return !(*this == other); }

  std::string to_string01() const {
    std::string s;
    s.reserve(nbits_);
    for (std::size_t i = 0; i < nbits_; ++i) s.push_back(get(i) ? '1' : '0');
    return s;
  }

  static BitString from_string01(const std::string& s) {
    BitString out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      require(s[i] == '0' || s[i] == '1', errc::input_error, "bad 0/1 string");
      out.set(i, s[i] == '1');
    }
    return out;
  }

 private:
  std::size_t nbits_ = 0;
  std::vector<std::uint8_t> bytes_;
};

// Sequential MSB-first reader over a BitString, tracking consumption.
class BitReader {
 public:
  explicit BitReader(const BitString& bits) : bits_(&bits) {}

  std::size_t remaining() const { return bits_->size() - pos_; }
  std::size_t consumed() const { return pos_; }

  bool read_bit() {
    require(remaining() >= 1, errc::input_error, "bit reader exhausted");
    return bits_->get(pos_++);
  }

  std::uint64_t read_uint(std::size_t len) {
    require(remaining() >= len, errc::input_error, "bit reader exhausted");
    std::uint64_t v = bits_->uint_at(pos_, len);
    pos_ += len;
    return v;
  }

 private:
  const BitString* bits_;
  std::size_t pos_ = 0;
};

}  // namespace certirand
