#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "certirand/errors.hpp"

namespace certirand {

// One CHSH-structured round, packed to a byte (plus the test flag).
class RoundLog {
 public:
  void append(bool test_round, int in_a, int in_b, int out_a, int out_b) {
    std::uint8_t p = static_cast<std::uint8_t>((test_round << 4) | (in_a << 3) | (in_b << 2) |
                                               (out_a << 1) | out_b);
    packed_.push_back(p);
  }

  std::size_t size() const { return packed_.size(); }
  bool test_round(std::size_t i) const { return (packed_[i] >> 4) & 1; }
  int in_a(std::size_t i) const { return (packed_[i] >> 3) & 1; }
  int in_b(std::size_t i) const { return (packed_[i] >> 2) & 1; }
  int out_a(std::size_t i) const { return (packed_[i] >> 1) & 1; }
  int out_b(std::size_t i) const { return packed_[i] & 1; }

 private:
  std::vector<std::uint8_t> packed_;
};

struct MessageRecord {
  enum class Kind { to_device, from_device, device_to_device, note };
  std::uint64_t seq = 0;
  Kind kind = Kind::note;
  int device = 0;        // endpoint the message was sent to / received from
  int about_device = 0;  // whose input/output the payload names
  std::uint64_t round = 0;
  std::string field;
  std::uint64_t value = 0;
};

// Append-only record of one protocol run. Honest referee<->device messages are
// derived from the round log on demand; extra_messages holds only anomalies
// (or forgeries injected by tests).
struct Transcript {
  std::string protocol;  // "protocol-b", "vv", "ruv", "cluster", "infinite"
  std::string consts_text;
  std::string strategy_desc;
  std::string seed_hex;
  std::size_t seed_bits = 0;
  std::uint64_t rng_root = 0;
  int dev_a_index = 0;
  int dev_b_index = 0;

  RoundLog rounds;
  std::vector<MessageRecord> extra_messages;
  std::vector<std::string> flags;
  std::vector<std::pair<std::string, std::string>> summary;

  void flag(const std::string& f) { flags.push_back(f); }

  void put(const std::string& key, const std::string& value) { summary.emplace_back(key, value); }
  void put_u64(const std::string& key, std::uint64_t v) { put(key, std::to_string(v)); }
  void put_double(const std::string& key, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    put(key, buf);
  }

  const std::string* find(const std::string& key) const {
    for (const auto& [k, v] : summary)
      if (k == key) return &v;
    return nullptr;
  }

  std::string get(const std::string& key) const {
    const std::string* v = find(key);
    require(v != nullptr, errc::input_error, "transcript summary missing key: " + key);
    return *v;
  }

  std::uint64_t get_u64(const std::string& key) const { return std::stoull(get(key)); }
  double get_double(const std::string& key) const { return std::stod(get(key)); }

  // Round-derived referee<->device messages plus recorded anomalies, in order.
  template <typename Fn>
  void for_each_message(Fn&& fn) const {
    std::uint64_t seq = 0;
    for (std::size_t i = 0; i < rounds.size(); ++i) {
      fn(MessageRecord{seq++, MessageRecord::Kind::to_device, dev_a_index, dev_a_index, i, "input",
                       static_cast<std::uint64_t>(rounds.in_a(i))});
      fn(MessageRecord{seq++, MessageRecord::Kind::to_device, dev_b_index, dev_b_index, i, "input",
                       static_cast<std::uint64_t>(rounds.in_b(i))});
      fn(MessageRecord{seq++, MessageRecord::Kind::from_device, dev_a_index, dev_a_index, i,
                       "output", static_cast<std::uint64_t>(rounds.out_a(i))});
      fn(MessageRecord{seq++, MessageRecord::Kind::from_device, dev_b_index, dev_b_index, i,
                       "output", static_cast<std::uint64_t>(rounds.out_b(i))});
    }
    for (const MessageRecord& m : extra_messages) {
      MessageRecord copy = m;
      copy.seq = seq++;
      fn(copy);
    }
  }
};

}  // namespace certirand
