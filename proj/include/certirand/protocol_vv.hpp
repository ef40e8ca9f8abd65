#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "certirand/bitstring.hpp"
#include "certirand/devices.hpp"
#include "certirand/errors.hpp"
#include "certirand/extractor.hpp"
#include "certirand/params.hpp"
#include "certirand/transcript.hpp"

namespace certirand {

// Desk-scale ceiling on simulable Protocol-B rounds; larger n flags infeasible.
inline constexpr std::uint64_t kMaxSimulatedRounds = 1ull << 26;

struct ProtocolBConfig {
  double test_density = 1.0 / 16.0;  // fraction of rounds that are test rounds
  double margin = 0.05;              // abort when test wins/n_test < cos^2(pi/8) - margin
  std::size_t selector_bits = 64;    // S1 prefix keying the test-position permutation
};

struct BResult {
  std::optional<BitString> y;  // device A's n output bits on success
  bool aborted = false;
  std::string cause;
  std::uint64_t test_rounds = 0;
  std::uint64_t test_wins = 0;
  double win_fraction = 0.0;
  double threshold = 0.0;
  std::size_t s1_consumed = 0;
  bool zero_test_rounds = false;
};

// Entropy-generation phase behind an interface: this paper leans on an
// external construction for Protocol B, so the default shape (rare seeded test
// rounds among fixed-input rounds, win-rate threshold on test rounds) is
// swappable. The defaults are placeholders and are flagged in transcripts.
class EntropySource {
 public:
  virtual ~EntropySource() = default;
  virtual BResult generate(DeviceEndpoint& dev_a, DeviceEndpoint& dev_b, const BitString& s1,
                           const VvParams& params, const ProtocolBConfig& cfg,
                           Transcript& transcript) = 0;
};

// Seed layout, documented bit-exactly:
//   - with n_test > 0: the first min(selector_bits, |S1|) bits key the
//     pseudorandom choice of test-round positions (partial Fisher-Yates);
//     the following 2*n_test bits supply the test-round inputs in round
//     order (device A's bit first). Exhaustion is a config error.
//   - non-test rounds use fixed inputs (0,0).
class SeededTestRoundSource final : public EntropySource {
 public:
  BResult generate(DeviceEndpoint& dev_a, DeviceEndpoint& dev_b, const BitString& s1,
                   const VvParams& params, const ProtocolBConfig& cfg,
                   Transcript& transcript) override {
    require(cfg.test_density >= 0.0 && cfg.test_density <= 1.0, errc::config_error,
            "test-round density must lie in [0,1]");
    BResult res;
    std::uint64_t n = params.n;
    std::uint64_t n_test =
        static_cast<std::uint64_t>(std::floor(static_cast<double>(n) * cfg.test_density));
    res.test_rounds = n_test;
    res.threshold = kTsirelson - cfg.margin;

    BitReader reader(s1);
    std::vector<std::uint64_t> test_positions;
    if (n_test > 0) {
      std::size_t key_bits = std::min<std::size_t>(cfg.selector_bits, s1.size());
      std::uint64_t key = 0;
      for (std::size_t i = 0; i < key_bits; ++i) key = (key << 1) | reader.read_bit();
      if (reader.remaining() < 2 * n_test)
        fail(errc::config_error,
             "seed exhaustion: test-round density too high for |S1| = " +
                 std::to_string(s1.size()) + " (need " + std::to_string(2 * n_test) +
                 " input bits)");
      RngStream selector(detail::splitmix64(key));
      std::vector<std::uint64_t> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      for (std::uint64_t i = 0; i < n_test; ++i) {
        std::uint64_t j = i + selector.next_below(n - i);
        std::swap(idx[i], idx[j]);
      }
      test_positions.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
      std::sort(test_positions.begin(), test_positions.end());
    } else {
      res.zero_test_rounds = true;
      transcript.flag("protocol-b-zero-test-rounds");
    }

    BitString y(n);
    std::size_t next_test = 0;
    for (std::uint64_t round = 0; round < n; ++round) {
      bool is_test = next_test < test_positions.size() && test_positions[next_test] == round;
      int a_in = 0, b_in = 0;
      if (is_test) {
        ++next_test;
        a_in = reader.read_bit();
        b_in = reader.read_bit();
      }
      int out_a = 0, out_b = 0;
      try {
        out_a = dev_a.play_round(a_in);
        out_b = dev_b.play_round(b_in);
      } catch (const error& e) {
        if (e.code() == errc::non_signaling_violation) throw;  // fatal by contract
        res.aborted = true;
        res.cause = std::string("device-fault: ") + e.what();
        res.s1_consumed = reader.consumed();
        return res;
      }
      transcript.rounds.append(is_test, a_in, b_in, out_a, out_b);
      y.set(round, out_a);
      if (is_test) res.test_wins += chsh_win(a_in, b_in, out_a, out_b);
    }
    res.s1_consumed = reader.consumed();

    if (n_test > 0) {
      res.win_fraction = static_cast<double>(res.test_wins) / static_cast<double>(n_test);
      if (res.win_fraction < res.threshold) {
        res.aborted = true;
        res.cause = "protocol-b-threshold";
        return res;
      }
    }
    res.y = std::move(y);
    return res;
  }
};

struct VvRun {
  VvParams params;
  BitString s1, s2;
  std::optional<BitString> y;  // Protocol-B output
  std::optional<BitString> x;  // extracted output, v bits
  bool aborted = false;
  std::string abort_cause;
  std::optional<ExtractorSpec> extractor;
  std::size_t seed_consumed = 0;
  Transcript transcript;
};

inline BResult run_protocol_b(DeviceEndpoint& dev_a, DeviceEndpoint& dev_b, const BitString& s1,
                              const VvParams& params, const ProtocolBConfig& cfg,
                              Transcript& transcript, EntropySource* source = nullptr) {
  SeededTestRoundSource default_source;
  EntropySource& src = source ? *source : static_cast<EntropySource&>(default_source);
  BResult res = src.generate(dev_a, dev_b, s1, params, cfg, transcript);
  transcript.put_u64("b_rounds", params.n);
  transcript.put_u64("b_test_rounds", res.test_rounds);
  transcript.put_u64("b_test_wins", res.test_wins);
  transcript.put_double("b_threshold", res.threshold);
  transcript.put("b_aborted", res.aborted ? "true" : "false");
  if (res.aborted) transcript.put("b_abort_cause", res.cause);
  return res;
}

// VV sub-protocol: split the seed into halves S1, S2; run Protocol B on S1;
// on success extract with n = n(s), r = v(s), eps = 1/h(s) (Appendix-C
// functions of the full seed length) using S2's first d bits as extractor seed.
inline VvRun run_vv(DeviceEndpoint& dev_a, DeviceEndpoint& dev_b, const BitString& seed,
                    const ProtocolConstants& consts, const ProtocolBConfig& cfg = {},
                    EntropySource* source = nullptr) {
  require(seed.size() >= kMinVvSeedBits, errc::invalid_seed_length,
          "VV seed must be at least 8 bits");
  VvRun run;
  run.params = vv_params(seed.size(), consts);
  run.transcript.protocol = "vv";
  run.transcript.consts_text = constants_to_text(consts);
  run.transcript.seed_hex = seed.to_hex();
  run.transcript.seed_bits = seed.size();
  run.transcript.dev_a_index = dev_a.id().index;
  run.transcript.dev_b_index = dev_b.id().index;
  run.transcript.strategy_desc =
      dev_a.strategy().describe() + "/" + dev_b.strategy().describe();
  if (run.params.gamma_flagged) run.transcript.flag("gamma-outside-paper-range");

  run.s1 = seed.slice(0, run.params.s1_len);
  run.s2 = seed.slice(seed.size() - run.params.s2_len, run.params.s2_len);

  auto abort_infeasible = [&](const std::string& why) {
    run.aborted = true;
    run.abort_cause = "infeasible-parameters: " + why;
    run.transcript.flag("infeasible-parameters");
    run.transcript.put("abort_cause", run.abort_cause);
    return run;
  };

  if (!run.params.h_fits || !run.params.n_fits)
    return abort_infeasible("h or n overflows desk scale");
  if (run.params.n > kMaxSimulatedRounds)
    return abort_infeasible("n = " + std::to_string(run.params.n) + " rounds exceeds desk cap");
  if (!run.params.d_within_s2)
    return abort_infeasible("Appendix-C d = " + std::to_string(run.params.d) + " > |S2| = " +
                            std::to_string(run.params.s2_len));

  BResult b = run_protocol_b(dev_a, dev_b, run.s1, run.params, cfg, run.transcript, source);
  if (b.aborted) {
    run.aborted = true;
    run.abort_cause = b.cause;
    run.transcript.put("abort_cause", run.abort_cause);
    return run;
  }
  run.y = b.y;

  SolveOptions opts;
  opts.max_seed_bits = run.params.s2_len;
  opts.allow_degenerate = consts.mode == ConstantsMode::test;
  ExtractorSpec spec;
  try {
    spec = solve_spec(static_cast<std::size_t>(run.params.n),
                      static_cast<std::size_t>(run.params.v), run.params.epsilon, opts);
  } catch (const error& e) {
    return abort_infeasible(std::string("extractor seed d > |S2|: ") + e.what());
  }
  if (spec.degenerate) run.transcript.flag("degenerate-weak-design");
  run.extractor = spec;

  BitString ext_seed = run.s2.slice(0, spec.d);
  run.x = extract(*run.y, ext_seed, spec);
  run.seed_consumed = b.s1_consumed + spec.d;

  run.transcript.put_u64("extractor_d", spec.d);
  run.transcript.put_u64("extractor_r", spec.r);
  run.transcript.put_double("extractor_epsilon", spec.epsilon);
  run.transcript.put_double("extractor_c0", spec.c0);
  run.transcript.put("extractor_degenerate", spec.degenerate ? "true" : "false");
  run.transcript.put("entropy_budget_ok",
                     entropy_budget_ok(static_cast<double>(run.params.h), spec.r, spec.epsilon)
                         ? "true"
                         : "false");
  run.transcript.put_u64("claimed_h", run.params.h);
  run.transcript.put_u64("seed_consumed", run.seed_consumed);
  run.transcript.put_u64("output_bits", run.x->size());
  run.transcript.put("output_hex", run.x->to_hex());
  return run;
}

}  // namespace certirand
