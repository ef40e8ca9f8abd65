#pragma once

#include <stdexcept>
#include <string>

namespace certirand {

enum class errc {
  invalid_seed_length,
  invalid_probability,
  invalid_input,
  input_error,
  config_error,
  capacity_error,
  protocol_error,
  non_signaling_violation,
  dim_mismatch,
  label_not_found,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::invalid_seed_length: return "invalid-seed-length";
    case errc::invalid_probability: return "invalid-probability";
    case errc::invalid_input: return "invalid-input";
    case errc::input_error: return "input-error";
    case errc::config_error: return "config-error";
    case errc::capacity_error: return "capacity-error";
    case errc::protocol_error: return "protocol-error";
    case errc::non_signaling_violation: return "non-signaling-violation";
    case errc::dim_mismatch: return "dim-mismatch";
    case errc::label_not_found: return "label-not-found";
  }
  return "unknown";
}

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

inline void require(bool cond, errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace certirand
