#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "certirand/constants.hpp"
#include "certirand/errors.hpp"

namespace certirand {

inline constexpr double kTsirelson = 0.85355339059327373;  // cos^2(pi/8)
inline constexpr std::size_t kMinVvSeedBits = 8;
inline constexpr std::size_t kMinRuvSeedBits = 16;

namespace detail {

// Largest r with r^k <= n, computed exactly (float guess, integer verify).
inline std::uint64_t iroot(std::uint64_t n, unsigned k) {
  if (n == 0) return 0;
  if (k == 1) return n;
  auto pow_le = [&](std::uint64_t r, std::uint64_t bound) {
    unsigned __int128 acc = 1;
    for (unsigned i = 0; i < k; ++i) {
      acc *= r;
      if (acc > bound) return false;
    }
    return true;
  };
  auto guess = static_cast<std::uint64_t>(
      std::floor(std::pow(static_cast<double>(n), 1.0 / static_cast<double>(k))));
  std::uint64_t r = guess > 2 ? guess - 2 : 0;
  while (pow_le(r + 1, n)) ++r;
  return r;
}

inline std::uint64_t isqrt(std::uint64_t n) { return iroot(n, 2); }

}  // namespace detail

// Appendix-C quantities for one VV invocation on an s-bit seed. Magnitudes can
// exceed what a desk run can realize; `fits` flags carry that instead of the
// values overflowing.
struct VvParams {
  std::size_t s = 0;
  std::size_t s1_len = 0;
  std::size_t s2_len = 0;

  double h_log2 = 0.0;      // gamma * (floor(s/2)/K1)^(1/3)
  std::uint64_t h = 0;      // floor(2^h_log2) when it fits
  bool h_fits = false;

  std::uint64_t n = 0;      // Protocol-B output length (= rounds played)
  double n_log2 = 0.0;
  bool n_fits = false;

  std::uint64_t d = 0;      // Appendix-C extractor seed allotment
  std::uint64_t v = 0;      // VV output length, floor(h/2)
  double epsilon = 0.0;     // extractor error, 1/h

  bool d_within_s2 = false;       // d <= floor(s/2)
  bool v_seeds_next_ruv = false;  // v >= 16
  bool gamma_flagged = false;     // gamma outside (0,1), test mode only

  bool feasible() const { return h_fits && n_fits && d_within_s2 && v_seeds_next_ruv; }
};

inline VvParams vv_params(std::size_t s, const ProtocolConstants& consts) {
  require(s >= kMinVvSeedBits, errc::invalid_seed_length,
          "VV seed must be at least 8 bits, got " + std::to_string(s));
  consts.validate();
  VvParams p;
  p.s = s;
  p.s1_len = p.s2_len = s / 2;
  p.gamma_flagged = consts.gamma_out_of_paper_range();

  long double half = static_cast<long double>(p.s1_len);
  p.h_log2 = static_cast<double>(consts.gamma * std::cbrt(static_cast<double>(half) / consts.k1));
  p.h_fits = p.h_log2 < 62.0;
  if (p.h_fits) {
    p.h = static_cast<std::uint64_t>(std::floor(std::exp2(static_cast<long double>(p.h_log2))));
    p.v = p.h / 2;
    p.epsilon = 1.0 / static_cast<double>(p.h);

    // n = ceil(10 log2^2 t) * ceil(C t log2^2 t), t = h^(1/gamma) from the floored h
    long double t = exp2l(log2l(static_cast<long double>(p.h)) / consts.gamma);
    long double lg2 = log2l(t);
    long double lhs = ceill(10.0L * lg2 * lg2);
    long double rhs = ceill(static_cast<long double>(consts.big_c) * t * lg2 * lg2);
    long double n_ld = lhs * rhs;
    p.n_log2 = static_cast<double>(log2l(n_ld));
    p.n_fits = n_ld < 0x1p62L;
    if (p.n_fits) p.n = static_cast<std::uint64_t>(n_ld);
  } else {
    p.n_log2 = p.h_log2;  // dominated by t = 2^(h_log2/gamma); only the flag matters
    p.n_fits = false;
  }

  long double d_ld = ceill(static_cast<long double>(consts.k4 / consts.k1) *
                                static_cast<long double>(consts.gamma) * consts.gamma * consts.gamma *
                                static_cast<long double>(p.s1_len));
  p.d = d_ld < 0x1p62L ? static_cast<std::uint64_t>(d_ld) : UINT64_MAX;
  p.d_within_s2 = p.d <= p.s2_len;
  p.v_seeds_next_ruv = p.h_fits && p.v >= kMinRuvSeedBits;
  return p;
}

// Block/sub-block geometry and success threshold for one RUV invocation.
struct RuvParams {
  std::size_t s = 0;
  std::uint64_t n_games = 0;       // N = floor(s/4)
  std::uint64_t t = 0;             // floor(N^(1/alpha))
  std::uint64_t num_blocks = 0;    // floor(N/t)
  std::uint64_t sub_block_len = 0; // floor(sqrt(t))
  std::uint64_t subs_per_block = 0;
  std::uint64_t r = 0;             // floor((s/4)^(1/(2 alpha)))
  double nu = 0.0;
  double zeta = 0.0;
  double win_threshold = 0.0;
  bool t_constraint_ok = false;    // Theorem 2.8 needs t > 85
  LogBase log_base = LogBase::two;
};

inline RuvParams ruv_params(std::size_t s, const ProtocolConstants& consts) {
  require(s >= kMinRuvSeedBits, errc::invalid_seed_length,
          "RUV seed must be at least 16 bits, got " + std::to_string(s));
  consts.validate();
  RuvParams p;
  p.s = s;
  p.log_base = consts.log_base;
  p.n_games = s / 4;
  unsigned alpha = static_cast<unsigned>(consts.alpha);
  p.t = detail::iroot(p.n_games, alpha);
  p.num_blocks = p.t == 0 ? 0 : p.n_games / p.t;
  p.sub_block_len = detail::isqrt(p.t);
  p.subs_per_block = p.sub_block_len;
  p.r = detail::iroot(p.n_games, 2 * alpha);
  p.t_constraint_ok = p.t > 85;

  double n = static_cast<double>(p.n_games);
  double logn = log_in_base(n, consts.log_base);
  p.zeta = consts.kappa_star * std::pow(static_cast<double>(p.t), -consts.kappa_star);
  p.nu = (12.0 / std::sqrt(2.0)) * std::sqrt(logn) * static_cast<double>(p.t) / std::pow(n, 0.25);
  p.win_threshold = kTsirelson * n - std::sqrt(n * logn) / (2.0 * std::sqrt(2.0));
  return p;
}

// One VV->RUV stage of the expansion chain on an s-bit seed. out_realized is
// the authoritative next-seed length (the RUV slice); out_paper_r is the
// paper's r(v(s)) bookkeeping value, which can differ by rounding.
struct GStage {
  std::size_t s_in = 0;
  VvParams vv;
  bool ruv_defined = false;
  RuvParams ruv;
  std::uint64_t out_realized = 0;
  std::uint64_t out_paper_r = 0;
  bool feasible = false;
  std::string why_infeasible;
};

inline GStage g_stage(std::size_t s, const ProtocolConstants& consts) {
  GStage st;
  st.s_in = s;
  st.vv = vv_params(s, consts);
  if (!st.vv.h_fits || !st.vv.n_fits) {
    st.why_infeasible = "VV parameter magnitudes overflow desk scale";
    return st;
  }
  if (!st.vv.d_within_s2) {
    st.why_infeasible = "Appendix-C extractor seed allotment d exceeds |S2|";
    return st;
  }
  if (st.vv.v < kMinRuvSeedBits) {
    st.why_infeasible = "VV output too short to seed RUV (v < 16)";
    return st;
  }
  st.ruv_defined = true;
  st.ruv = ruv_params(static_cast<std::size_t>(st.vv.v), consts);
  st.out_realized = st.ruv.sub_block_len;
  st.out_paper_r = st.ruv.r;
  if (st.out_realized < kMinVvSeedBits) {
    st.why_infeasible = "RUV slice too short to seed the next VV (< 8)";
    return st;
  }
  st.feasible = true;
  return st;
}

// g(s) = r(v(s)); g_iter composes the realized chain k times, carrying a
// feasibility flag instead of failing.
struct GChain {
  std::vector<GStage> stages;
  bool feasible = false;
  std::uint64_t out_bits = 0;  // realized output of the last attempted stage
};

inline GChain g_iter(std::size_t k, std::size_t m, const ProtocolConstants& consts) {
  require(k >= 1, errc::invalid_input, "g_iter needs k >= 1");
  GChain chain;
  std::size_t s = m;
  for (std::size_t i = 0; i < k; ++i) {
    GStage st = g_stage(s, consts);
    chain.stages.push_back(st);
    chain.out_bits = st.out_realized;
    if (!st.feasible) {
      // the final stage only needs to produce *something*; its output need not
      // re-seed another VV
      bool last = i + 1 == k;
      bool terminal_ok = last && st.ruv_defined && st.out_realized >= 1;
      chain.feasible = terminal_ok;
      return chain;
    }
    s = static_cast<std::size_t>(st.out_realized);
  }
  chain.feasible = true;
  return chain;
}

inline GStage g_of(std::size_t s, const ProtocolConstants& consts) { return g_stage(s, consts); }

struct ClampedBound {
  double raw = 0.0;
  double value = 0.0;  // clamped to [0, 1]
  bool clamped = false;
};

inline ClampedBound clamp_bound(double raw) {
  ClampedBound b;
  b.raw = raw;
  b.value = raw;
  if (raw > 1.0) {
    b.value = 1.0;
    b.clamped = true;
  } else if (raw < 0.0) {
    b.value = 0.0;
    b.clamped = true;
  }
  return b;
}

struct ErrorBounds {
  ClampedBound eps_vv;
  ClampedBound eps_ruv;
  ClampedBound eps_ec;
};

// eps_VV(m) = sqrt(3 exp(-C' m^(1/3)))
// eps_RUV(m, lambda) = sqrt(192 (m/4)^(-1/(8 alpha)) / lambda)
// eps_EC(m, lambda) = exp(-C'' m^(1/3)) / lambda
inline ErrorBounds error_bounds(double m, double lambda, const ProtocolConstants& consts) {
  require(m >= 1.0, errc::invalid_input, "error_bounds needs m >= 1");
  require(lambda > 0.0 && lambda <= 1.0, errc::invalid_probability,
          "lambda must lie in (0, 1]");
  ErrorBounds b;
  double croot = std::cbrt(m);
  b.eps_vv = clamp_bound(std::sqrt(3.0 * std::exp(-consts.c_prime * croot)));
  double expo = -1.0 / (8.0 * static_cast<double>(consts.alpha));
  b.eps_ruv = clamp_bound(std::sqrt(192.0 * std::pow(m / 4.0, expo) / lambda));
  b.eps_ec = clamp_bound(std::exp(-consts.c_dprime * croot) / lambda);
  return b;
}

// Theorem-4.2 error accounting. delta(1) = eps_EC(m_1, p_1),
// delta(i) = eps_EC(m_i, p_i) + delta(i-1)/p_i. The recursion runs on raw
// (unclamped) bounds; clamped views ride along for display.
struct LedgerRow {
  double m = 0.0;
  double p = 1.0;
  bool p_measured = false;
  ClampedBound eps_vv;
  ClampedBound eps_ruv;
  ClampedBound eps_ec;
  double delta = 0.0;
};

struct ErrorLedger {
  std::vector<LedgerRow> rows;
  double lambda = 1.0;        // product of the p_i
  double closed_bound = 0.0;  // 2 eps_1 / lambda
  double final_bound = 0.0;   // 2 delta(k)
};

inline ErrorLedger delta_ledger(const std::vector<std::pair<double, double>>& history,
                                const ProtocolConstants& consts) {
  require(!history.empty(), errc::invalid_input, "delta_ledger needs a nonempty history");
  ErrorLedger ledger;
  double delta_prev = 0.0;
  for (std::size_t i = 0; i < history.size(); ++i) {
    auto [m, p] = history[i];
    require(p > 0.0 && p <= 1.0, errc::invalid_probability,
            "pass probabilities must lie in (0, 1]");
    LedgerRow row;
    row.m = m;
    row.p = p;
    ErrorBounds b = error_bounds(m, p, consts);
    row.eps_vv = b.eps_vv;
    row.eps_ruv = b.eps_ruv;
    row.eps_ec = b.eps_ec;
    row.delta = i == 0 ? b.eps_ec.raw : b.eps_ec.raw + delta_prev / p;
    delta_prev = row.delta;
    ledger.lambda *= p;
    ledger.rows.push_back(row);
  }
  ledger.closed_bound = 2.0 * ledger.rows.front().eps_ec.raw / ledger.lambda;
  ledger.final_bound = 2.0 * ledger.rows.back().delta;
  return ledger;
}

}  // namespace certirand
