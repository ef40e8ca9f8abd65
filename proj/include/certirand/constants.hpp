#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "certirand/errors.hpp"

namespace certirand {

enum class LogBase { two, natural };
enum class ConstantsMode { paper, test };

inline double log_in_base(double x, LogBase base) {
  return base == LogBase::two ? std::log2(x) : std::log(x);
}

// Global constants shared by every sub-protocol of a run. Paper mode pins the
// published constraints; test mode admits desk-scale values and flags the ones
// that leave the published ranges.
struct ProtocolConstants {
  ConstantsMode mode = ConstantsMode::test;
  std::uint64_t alpha = 2;      // block exponent, paper: ceil(16*kappa_star^2)
  double gamma = 0.5;           // Protocol-B exponent constant
  double kappa_star = 1.1;      // rigidity constant, > 1
  std::uint64_t big_c = 1;      // Appendix-C C, paper: ceil(100*alpha)
  double k1 = 1.0;              // Protocol-B seed constant K1
  double k4 = 1.0;              // extractor seed constant K4
  double c_prime = 1.0;         // C' (eps_VV / Theorem on VV)
  double c_dprime = 1.0;        // C'' (eps_EC)
  LogBase log_base = LogBase::two;

  bool gamma_out_of_paper_range() const { return !(gamma > 0.0 && gamma < 1.0); }

  void validate() const {
    require(kappa_star > 1.0, errc::config_error, "kappa_star must exceed 1");
    require(alpha >= 2, errc::config_error, "alpha must be an integer >= 2");
    require(gamma > 0.0, errc::config_error, "gamma must be positive");
    require(k1 > 0.0 && k4 > 0.0, errc::config_error, "K1 and K4 must be positive");
    require(big_c >= 1, errc::config_error, "C must be a positive integer");
    require(c_prime > 0.0 && c_dprime > 0.0, errc::config_error, "C' and C'' must be positive");
    if (mode == ConstantsMode::paper) {
      require(!gamma_out_of_paper_range(), errc::config_error, "paper mode: gamma must lie in (0,1)");
      require(gamma <= 1.0 / (10.0 + 8.0 * static_cast<double>(alpha)), errc::config_error,
              "paper mode: gamma must satisfy gamma <= 1/(10+8*alpha)");
      require(alpha == static_cast<std::uint64_t>(std::ceil(16.0 * kappa_star * kappa_star)),
              errc::config_error, "paper mode: alpha must equal ceil(16*kappa_star^2)");
      require(big_c == static_cast<std::uint64_t>(std::ceil(100.0 * static_cast<double>(alpha))),
              errc::config_error, "paper mode: C must equal ceil(100*alpha)");
    }
  }

  static ProtocolConstants paper_defaults() {
    ProtocolConstants c;
    c.mode = ConstantsMode::paper;
    c.kappa_star = 1.1;
    c.alpha = 20;  // ceil(16 * 1.1^2) = ceil(19.36)
    c.gamma = 1.0 / (10.0 + 8.0 * 20.0);
    c.big_c = 2000;  // ceil(100 * alpha)
    c.k1 = 1.0;
    c.k4 = 1.0;
    c.validate();
    return c;
  }
};

// Flat `key = value` file; '#' starts a comment; unknown keys are errors.
inline ProtocolConstants parse_constants(std::istream& in) {
  ProtocolConstants c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto strip = [](std::string s) {
      std::size_t b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      std::size_t e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    std::string stripped = strip(line);
    if (stripped.empty()) continue;
    std::size_t eq = stripped.find('=');
    require(eq != std::string::npos, errc::config_error,
            "constants file line " + std::to_string(lineno) + ": expected key = value");
    std::string key = strip(stripped.substr(0, eq));
    std::string value = strip(stripped.substr(eq + 1));
    require(!key.empty() && !value.empty(), errc::config_error,
            "constants file line " + std::to_string(lineno) + ": empty key or value");

    auto as_double = [&](const char* name) {
      try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        require(used == value.size(), errc::config_error, std::string("bad number for ") + name);
        return v;
      } catch (const error&) {
        throw;
      } catch (...) {
        fail(errc::config_error, std::string("bad number for ") + name);
      }
    };
    auto as_uint = [&](const char* name) {
      double v = as_double(name);
      require(v >= 0 && v == std::floor(v), errc::config_error,
              std::string(name) + " must be a nonnegative integer");
      return static_cast<std::uint64_t>(v);
    };

    if (key == "mode") {
      if (value == "paper") c.mode = ConstantsMode::paper;
      else if (value == "test") c.mode = ConstantsMode::test;
      else fail(errc::config_error, "mode must be paper or test");
    } else if (key == "alpha") c.alpha = as_uint("alpha");
    else if (key == "gamma") c.gamma = as_double("gamma");
    else if (key == "kappa_star") c.kappa_star = as_double("kappa_star");
    else if (key == "big_c") c.big_c = as_uint("big_c");
    else if (key == "k1") c.k1 = as_double("k1");
    else if (key == "k4") c.k4 = as_double("k4");
    else if (key == "c_prime") c.c_prime = as_double("c_prime");
    else if (key == "c_dprime") c.c_dprime = as_double("c_dprime");
    else if (key == "log_base") {
      if (value == "two") c.log_base = LogBase::two;
      else if (value == "natural") c.log_base = LogBase::natural;
      else fail(errc::config_error, "log_base must be two or natural");
    } else {
      fail(errc::config_error, "unknown constants key: " + key);
    }
  }
  c.validate();
  return c;
}

inline ProtocolConstants load_constants(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), errc::config_error, "cannot open constants file: " + path);
  return parse_constants(in);
}

inline std::string constants_to_text(const ProtocolConstants& c) {
  std::ostringstream out;
  out << "mode = " << (c.mode == ConstantsMode::paper ? "paper" : "test") << "\n"
      << "alpha = " << c.alpha << "\n"
      << "gamma = " << c.gamma << "\n"
      << "kappa_star = " << c.kappa_star << "\n"
      << "big_c = " << c.big_c << "\n"
      << "k1 = " << c.k1 << "\n"
      << "k4 = " << c.k4 << "\n"
      << "c_prime = " << c.c_prime << "\n"
      << "c_dprime = " << c.c_dprime << "\n"
      << "log_base = " << (c.log_base == LogBase::two ? "two" : "natural") << "\n";
  return out.str();
}

}  // namespace certirand
