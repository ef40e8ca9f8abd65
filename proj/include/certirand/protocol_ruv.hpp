#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "certirand/bitstring.hpp"
#include "certirand/devices.hpp"
#include "certirand/errors.hpp"
#include "certirand/params.hpp"
#include "certirand/transcript.hpp"

namespace certirand {

struct GamesResult {
  BitString x;      // device A outputs
  BitString y;      // device B outputs
  std::uint64_t w;  // rounds with x_i XOR y_i = a_i AND b_i
  bool device_fault = false;
  std::string fault;
};

// N sequential CHSH games, strictly one round at a time; per round device A
// sees only a_i and device B only b_i. Non-signaling violations stay fatal;
// other device faults abort with a cause.
inline GamesResult run_games(DeviceEndpoint& dev_a, DeviceEndpoint& dev_b, const BitString& a,
                             const BitString& b, Transcript& transcript) {
  require(a.size() == b.size(), errc::input_error, "input strings must have equal length");
  std::size_t n = a.size();
  GamesResult res{BitString(n), BitString(n), 0, false, ""};
  for (std::size_t i = 0; i < n; ++i) {
    int a_in = a.get(i), b_in = b.get(i);
    int out_a = 0, out_b = 0;
    try {
      out_a = dev_a.play_round(a_in);
      out_b = dev_b.play_round(b_in);
    } catch (const error& e) {
      if (e.code() == errc::non_signaling_violation) throw;
      res.device_fault = true;
      res.fault = e.what();
      return res;
    }
    transcript.rounds.append(false, a_in, b_in, out_a, out_b);
    res.x.set(i, out_a);
    res.y.set(i, out_b);
    res.w += chsh_win(a_in, b_in, out_a, out_b);
  }
  return res;
}

inline bool check_threshold(std::uint64_t w, const RuvParams& params) {
  return static_cast<double>(w) >= params.win_threshold;
}

struct SubBlockChoice {
  std::uint64_t block = 1;      // i, 1-based
  std::uint64_t sub_block = 1;  // j, 1-based
  BitString z;
  bool fallback_used = false;   // modulo reduction on the final chunk
  bool aborted = false;         // S2 exhausted before any complete chunk
  std::size_t s2_consumed = 0;
};

// (i, j) drawn uniformly from [num_blocks] x [subs_per_block] by reading
// ceil(log2(K))-bit chunks of S2 big-endian with rejection sampling; if S2
// runs out the last complete chunk is reduced mod K and flagged. z is the
// j-th sub-block of the i-th block of x (1-based, row-major, blocks spaced t).
inline SubBlockChoice select_sub_block(const BitString& x, const BitString& s2,
                                       const RuvParams& params) {
  require(x.size() >= params.t * params.num_blocks, errc::input_error,
          "output register shorter than the block partition");
  SubBlockChoice choice;
  std::uint64_t k = params.num_blocks * params.subs_per_block;
  require(k >= 1, errc::input_error, "empty block geometry");
  std::uint64_t index = 0;
  if (k > 1) {
    std::size_t w = 0;
    while ((1ull << w) < k) ++w;
    if (s2.size() < w) {
      choice.aborted = true;
      return choice;
    }
    bool accepted = false;
    std::uint64_t last_chunk = 0;
    std::size_t pos = 0;
    while (pos + w <= s2.size()) {
      last_chunk = s2.uint_at(pos, w);
      pos += w;
      if (last_chunk < k) {
        accepted = true;
        break;
      }
    }
    choice.s2_consumed = pos;
    if (accepted) {
      index = last_chunk;
    } else {
      index = last_chunk % k;
      choice.fallback_used = true;
    }
  }
  choice.block = index / params.subs_per_block + 1;
  choice.sub_block = index % params.subs_per_block + 1;
  std::size_t start = static_cast<std::size_t>((choice.block - 1) * params.t +
                                               (choice.sub_block - 1) * params.sub_block_len);
  choice.z = x.slice(start, static_cast<std::size_t>(params.sub_block_len));
  return choice;
}

struct RuvRun {
  RuvParams params;
  BitString s1, s2, a, b;
  BitString x, y;
  std::uint64_t w = 0;
  bool aborted = false;
  std::string abort_cause;
  std::uint64_t chosen_block = 0;
  std::uint64_t chosen_sub = 0;
  std::optional<BitString> z;
  bool selection_fallback = false;
  std::size_t seed_consumed = 0;
  Transcript transcript;
};

inline RuvRun run_ruv(DeviceEndpoint& dev_a, DeviceEndpoint& dev_b, const BitString& seed,
                      const ProtocolConstants& consts) {
  require(seed.size() >= kMinRuvSeedBits, errc::invalid_seed_length,
          "RUV seed must be at least 16 bits");
  RuvRun run;
  run.params = ruv_params(seed.size(), consts);
  if (consts.mode == ConstantsMode::paper && !run.params.t_constraint_ok)
    fail(errc::config_error,
         "paper mode refuses to run RUV with t = " + std::to_string(run.params.t) + " <= 85");

  run.transcript.protocol = "ruv";
  run.transcript.consts_text = constants_to_text(consts);
  run.transcript.seed_hex = seed.to_hex();
  run.transcript.seed_bits = seed.size();
  run.transcript.dev_a_index = dev_a.id().index;
  run.transcript.dev_b_index = dev_b.id().index;
  run.transcript.strategy_desc =
      dev_a.strategy().describe() + "/" + dev_b.strategy().describe();
  if (!run.params.t_constraint_ok) run.transcript.flag("t-constraint-void");
  run.transcript.put("log_base", run.params.log_base == LogBase::two ? "two" : "natural");

  std::size_t s1_len = seed.size() / 2;
  run.s1 = seed.slice(0, s1_len);
  run.s2 = seed.slice(seed.size() - s1_len, s1_len);
  std::size_t n = static_cast<std::size_t>(run.params.n_games);
  run.a = run.s1.slice(0, n);
  run.b = run.s1.slice(run.s1.size() - n, n);

  GamesResult games = run_games(dev_a, dev_b, run.a, run.b, run.transcript);
  if (games.device_fault) {
    run.aborted = true;
    run.abort_cause = "device-fault: " + games.fault;
    run.transcript.put("abort_cause", run.abort_cause);
    return run;
  }
  run.x = games.x;
  run.y = games.y;
  run.w = games.w;
  run.transcript.put_u64("w", run.w);
  run.transcript.put_double("win_threshold", run.params.win_threshold);

  if (!check_threshold(run.w, run.params)) {
    run.aborted = true;
    run.abort_cause = "ruv-threshold";
    run.transcript.put("decision", "abort");
    run.transcript.put("abort_cause", run.abort_cause);
    return run;
  }
  run.transcript.put("decision", "pass");

  SubBlockChoice choice = select_sub_block(run.x, run.s2, run.params);
  if (choice.aborted) {
    run.aborted = true;
    run.abort_cause = "selection-seed-exhausted";
    run.transcript.put("abort_cause", run.abort_cause);
    return run;
  }
  run.chosen_block = choice.block;
  run.chosen_sub = choice.sub_block;
  run.z = choice.z;
  run.selection_fallback = choice.fallback_used;
  if (choice.fallback_used) run.transcript.flag("selection-modulo-fallback");
  run.seed_consumed = 2 * n + choice.s2_consumed;

  run.transcript.put_u64("chosen_block", run.chosen_block);
  run.transcript.put_u64("chosen_sub", run.chosen_sub);
  run.transcript.put_u64("z_bits", run.z->size());
  run.transcript.put("z_hex", run.z->to_hex());
  run.transcript.put_u64("r_paper", run.params.r);
  run.transcript.put_u64("seed_consumed", run.seed_consumed);
  return run;
}

}  // namespace certirand
