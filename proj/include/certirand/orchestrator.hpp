#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "certirand/bitstring.hpp"
#include "certirand/devices.hpp"
#include "certirand/errors.hpp"
#include "certirand/params.hpp"
#include "certirand/protocol_ruv.hpp"
#include "certirand/protocol_vv.hpp"
#include "certirand/transcript.hpp"

namespace certirand {

struct ClusterStrategySet {
  std::vector<std::pair<Role, Strategy>> roles;
  SpawnOptions spawn;

  static ClusterStrategySet uniform(const Strategy& s) {
    ClusterStrategySet set;
    set.roles = {{Role::vv_a, s}, {Role::vv_b, s}, {Role::ruv_a, s}, {Role::ruv_b, s}};
    return set;
  }

  std::string describe() const {
    std::string out;
    for (const auto& [role, strat] : roles) {
      if (!out.empty()) out += ",";
      out += std::string(role_name(role)) + "=" + strat.describe();
    }
    return out;
  }
};

struct RunConfig {
  ProtocolBConfig b;
  std::uint64_t rng_root = 0xC0FFEEULL;
  std::size_t estimate_reps = 0;  // 0: record p_i = 1.0 labeled "assumed"
  bool fresh_devices = false;     // respawn endpoints every iteration
};

// One ClusterExpansion: Y <- VV(D1,D2,S); Z <- RUV(E1,E2,Y); abort propagation.
struct ClusterRun {
  int cluster = 0;
  BitString input_seed;
  VvRun vv_run;
  std::optional<RuvRun> ruv_run;
  std::optional<BitString> output;
  bool aborted = false;
  std::string abort_cause;
};

inline ClusterRun cluster_expansion(Cluster& cluster, const BitString& seed,
                                    const ProtocolConstants& consts, const RunConfig& cfg) {
  ClusterRun run;
  run.cluster = cluster.cluster_id;
  run.input_seed = seed;
  run.vv_run = run_vv(cluster.by_role(Role::vv_a), cluster.by_role(Role::vv_b), seed, consts,
                      cfg.b);
  if (run.vv_run.aborted) {
    run.aborted = true;
    run.abort_cause = "vv: " + run.vv_run.abort_cause;
    return run;
  }
  run.ruv_run =
      run_ruv(cluster.by_role(Role::ruv_a), cluster.by_role(Role::ruv_b), *run.vv_run.x, consts);
  if (run.ruv_run->aborted) {
    run.aborted = true;
    run.abort_cause = "ruv: " + run.ruv_run->abort_cause;
    return run;
  }
  run.output = run.ruv_run->z;
  return run;
}

struct ExpansionState {
  std::size_t k_requested = 0;
  std::size_t iterations_completed = 0;
  BitString current_seed;
  std::vector<ClusterRun> cluster_runs;
  ErrorLedger ledger;
  std::vector<bool> p_measured;
  bool halted = false;
  std::string halt_cause;
  GChain preflight;
  ProtocolConstants consts;
  RunConfig cfg;
  std::string strategy_desc;
};

namespace detail {

// Completeness estimate for one ClusterExpansion at this seed length, measured
// on freshly spawned replica endpoints so the protocol devices keep their own
// memory untouched.
inline double estimate_pass_rate(const ClusterStrategySet& strat, std::size_t seed_bits,
                                 const ProtocolConstants& consts, const RunConfig& cfg,
                                 std::uint64_t salt) {
  if (cfg.estimate_reps == 0) return 1.0;
  RngStream seeds = RngStream::derive(cfg.rng_root, "estimate-seeds", salt);
  std::size_t passes = 0;
  for (std::size_t rep = 0; rep < cfg.estimate_reps; ++rep) {
    QuantumBackend backend;
    Cluster replica = spawn_cluster(0, strat.roles, backend,
                                    RngStream::derive(cfg.rng_root, "estimate", salt).key() + rep,
                                    strat.spawn);
    ClusterRun run = cluster_expansion(replica, seeds.next_bits(seed_bits), consts, cfg);
    passes += !run.aborted;
  }
  double reps = static_cast<double>(cfg.estimate_reps);
  double rate = static_cast<double>(passes) / reps;
  return rate > 0.0 ? rate : 1.0 / (reps + 1.0);  // ledger needs p in (0,1]
}

}  // namespace detail

// InfiniteExpansion run for k iterations: X_1 <- S; X_{i+1} <- ClusterExpansion
// (cluster i mod 2, X_i); halts on abort or on an infeasible parameter chain
// (detected before any device interaction).
inline ExpansionState infinite_expansion(const ClusterStrategySet& strat0,
                                         const ClusterStrategySet& strat1, const BitString& seed,
                                         std::size_t k, const ProtocolConstants& consts,
                                         const RunConfig& cfg = {}) {
  require(k >= 1, errc::invalid_input, "need at least one iteration");
  ExpansionState state;
  state.k_requested = k;
  state.current_seed = seed;
  state.consts = consts;
  state.cfg = cfg;
  state.strategy_desc = "c0{" + strat0.describe() + "} c1{" + strat1.describe() + "}";

  state.preflight = g_iter(k, seed.size(), consts);
  if (!state.preflight.feasible) {
    state.halted = true;
    std::size_t bad = state.preflight.stages.size();
    state.halt_cause = "infeasible parameter chain at stage " + std::to_string(bad) + ": " +
                       state.preflight.stages.back().why_infeasible;
    return state;
  }

  QuantumBackend backend;
  std::optional<Cluster> clusters[2];
  auto cluster_for = [&](std::size_t iteration) -> Cluster& {
    int idx = static_cast<int>(iteration % 2);  // iteration i uses cluster i mod 2
    const ClusterStrategySet& strat = idx == 0 ? strat0 : strat1;
    if (!clusters[idx] || cfg.fresh_devices) {
      std::uint64_t salt = cfg.fresh_devices ? iteration * 2 + static_cast<std::uint64_t>(idx) : idx;
      clusters[idx] = spawn_cluster(idx, strat.roles, backend, cfg.rng_root + salt, strat.spawn);
    }
    return *clusters[idx];
  };

  std::vector<std::pair<double, double>> history;
  for (std::size_t i = 1; i <= k; ++i) {
    Cluster& cluster = cluster_for(i);
    const ClusterStrategySet& strat = cluster.cluster_id == 0 ? strat0 : strat1;
    double p_hat = detail::estimate_pass_rate(strat, state.current_seed.size(), consts, cfg, i);
    ClusterRun run = cluster_expansion(cluster, state.current_seed, consts, cfg);
    bool aborted = run.aborted;
    std::string cause = run.abort_cause;
    state.cluster_runs.push_back(std::move(run));
    if (aborted) {
      state.halted = true;
      state.halt_cause = "iteration " + std::to_string(i) + " aborted (" + cause + ")";
      break;
    }
    history.emplace_back(static_cast<double>(state.cluster_runs.back().input_seed.size()), p_hat);
    state.p_measured.push_back(cfg.estimate_reps > 0);
    state.current_seed = *state.cluster_runs.back().output;
    state.iterations_completed = i;
  }
  if (!history.empty()) {
    state.ledger = delta_ledger(history, consts);
    for (std::size_t i = 0; i < state.ledger.rows.size(); ++i)
      state.ledger.rows[i].p_measured = state.p_measured[i];
  }
  return state;
}

// ---- reporting and persistence ----------------------------------------------

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// Pseudo-transcript carrying run-level expansion data so that reports are a
// pure function of a transcript bundle.
inline Transcript expansion_transcript(const ExpansionState& state) {
  Transcript t;
  t.protocol = "infinite";
  t.consts_text = constants_to_text(state.consts);
  t.strategy_desc = state.strategy_desc;
  t.seed_bits = 0;
  t.put_u64("k_requested", state.k_requested);
  t.put_u64("iterations_completed", state.iterations_completed);
  t.put("halted", state.halted ? "true" : "false");
  if (state.halted) t.put("halt_cause", state.halt_cause);
  for (std::size_t i = 0; i < state.preflight.stages.size(); ++i) {
    const GStage& st = state.preflight.stages[i];
    std::string p = "preflight." + std::to_string(i + 1) + ".";
    t.put_u64(p + "seed_bits", st.s_in);
    t.put_u64(p + "vv_n", st.vv.n_fits ? st.vv.n : 0);
    t.put_u64(p + "vv_v", st.vv.v);
    t.put_u64(p + "ruv_n_games", st.ruv_defined ? st.ruv.n_games : 0);
    t.put_u64(p + "out_realized", st.out_realized);
    t.put(p + "feasible", st.feasible ? "yes" : "no: " + st.why_infeasible);
  }
  t.put_u64("ledger_rows", state.ledger.rows.size());
  for (std::size_t i = 0; i < state.ledger.rows.size(); ++i) {
    const LedgerRow& row = state.ledger.rows[i];
    std::string p = "ledger." + std::to_string(i + 1) + ".";
    t.put_double(p + "m", row.m);
    t.put_double(p + "p", row.p);
    t.put(p + "p_source", row.p_measured ? "measured" : "assumed");
    t.put_double(p + "eps_vv", row.eps_vv.raw);
    t.put_double(p + "eps_ruv", row.eps_ruv.raw);
    t.put_double(p + "eps_ec", row.eps_ec.raw);
    t.put_double(p + "delta", row.delta);
  }
  if (!state.ledger.rows.empty()) {
    t.put_double("lambda", state.ledger.lambda);
    t.put_double("closed_bound", state.ledger.closed_bound);
    t.put_double("final_bound", state.ledger.final_bound);
  }
  if (state.iterations_completed == state.k_requested) {
    t.put_u64("final_output_bits", state.current_seed.size());
    t.put("final_output_hex", state.current_seed.to_hex());
  }
  return t;
}

struct TranscriptBundle {
  std::string kind;  // "vv" | "ruv" | "infinite"
  std::vector<Transcript> transcripts;
};

inline std::string report(const TranscriptBundle& bundle) {
  std::ostringstream out;
  out << "certirand report (" << bundle.kind << ")\n";
  for (const Transcript& t : bundle.transcripts) {
    out << "== " << t.protocol;
    if (t.seed_bits > 0) out << " seed_bits=" << t.seed_bits;
    if (!t.strategy_desc.empty()) out << " strategy=" << t.strategy_desc;
    out << " rounds=" << t.rounds.size() << "\n";
    for (const auto& [k, v] : t.summary) out << "  " << k << " = " << v << "\n";
    if (!t.flags.empty()) {
      out << "  flags:";
      for (const std::string& f : t.flags) out << " " << f;
      out << "\n";
    }
  }
  return out.str();
}

inline TranscriptBundle bundle_of(const ExpansionState& state) {
  TranscriptBundle bundle;
  bundle.kind = "infinite";
  bundle.transcripts.push_back(expansion_transcript(state));
  for (const ClusterRun& run : state.cluster_runs) {
    bundle.transcripts.push_back(run.vv_run.transcript);
    if (run.ruv_run) bundle.transcripts.push_back(run.ruv_run->transcript);
  }
  return bundle;
}

// JSON-lines transcript: one header record, one record per round, one summary.
inline void write_transcript_jsonl(const Transcript& t, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  require(f != nullptr, errc::input_error, "cannot open for writing: " + path);
  nlohmann::json header{{"type", "header"},
                        {"protocol", t.protocol},
                        {"consts", t.consts_text},
                        {"strategy", t.strategy_desc},
                        {"seed_hex", t.seed_hex},
                        {"seed_bits", t.seed_bits},
                        {"rng_root", t.rng_root},
                        {"dev_a", t.dev_a_index},
                        {"dev_b", t.dev_b_index},
                        {"flags", t.flags}};
  std::string line = header.dump();
  std::fprintf(f, "%s\n", line.c_str());
  std::uint64_t running_wins = 0;
  for (std::size_t i = 0; i < t.rounds.size(); ++i) {
    bool counted = t.protocol == "ruv" || t.rounds.test_round(i);
    if (counted)
      running_wins += chsh_win(t.rounds.in_a(i), t.rounds.in_b(i), t.rounds.out_a(i),
                               t.rounds.out_b(i));
    std::fprintf(f,
                 "{\"type\":\"round\",\"i\":%zu,\"t\":%d,\"a\":%d,\"b\":%d,\"x\":%d,\"y\":%d,"
                 "\"rw\":%llu}\n",
                 i, t.rounds.test_round(i) ? 1 : 0, t.rounds.in_a(i), t.rounds.in_b(i),
                 t.rounds.out_a(i), t.rounds.out_b(i),
                 static_cast<unsigned long long>(running_wins));
  }
  nlohmann::json summary{{"type", "summary"}};
  nlohmann::json kv = nlohmann::json::array();
  for (const auto& [k, v] : t.summary) kv.push_back({k, v});
  summary["kv"] = kv;
  line = summary.dump();
  std::fprintf(f, "%s\n", line.c_str());
  std::fclose(f);
}

inline Transcript read_transcript_jsonl(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), errc::input_error, "cannot open transcript: " + path);
  Transcript t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    std::string type = j.at("type");
    if (type == "header") {
      t.protocol = j.at("protocol");
      t.consts_text = j.at("consts");
      t.strategy_desc = j.at("strategy");
      t.seed_hex = j.at("seed_hex");
      t.seed_bits = j.at("seed_bits");
      t.rng_root = j.at("rng_root");
      t.dev_a_index = j.at("dev_a");
      t.dev_b_index = j.at("dev_b");
      for (const auto& f : j.at("flags")) t.flags.push_back(f);
    } else if (type == "round") {
      t.rounds.append(j.at("t").get<int>() != 0, j.at("a"), j.at("b"), j.at("x"), j.at("y"));
    } else if (type == "summary") {
      for (const auto& pair : j.at("kv")) t.put(pair.at(0), pair.at(1));
    }
  }
  return t;
}

struct PersistedRun {
  std::string kind;
  std::vector<std::string> transcript_files;  // relative, in bundle order
};

inline void persist_bundle(const TranscriptBundle& bundle, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json config{{"kind", bundle.kind}};
  nlohmann::json files = nlohmann::json::array();
  for (std::size_t i = 0; i < bundle.transcripts.size(); ++i) {
    std::string name = "transcript-" + std::to_string(i) + "-" + bundle.transcripts[i].protocol +
                       ".jsonl";
    write_transcript_jsonl(bundle.transcripts[i], dir + "/" + name);
    files.push_back(name);
  }
  config["transcripts"] = files;
  std::ofstream cfg(dir + "/config.json");
  cfg << config.dump(2) << "\n";
  std::ofstream rep(dir + "/report.txt", std::ios::binary);
  rep << report(bundle);
}

inline TranscriptBundle load_bundle(const std::string& dir) {
  std::ifstream cfg(dir + "/config.json");
  require(cfg.good(), errc::input_error, "cannot open " + dir + "/config.json");
  nlohmann::json config = nlohmann::json::parse(cfg);
  TranscriptBundle bundle;
  bundle.kind = config.at("kind");
  for (const auto& name : config.at("transcripts"))
    bundle.transcripts.push_back(read_transcript_jsonl(dir + "/" + name.get<std::string>()));
  return bundle;
}

struct ReplayResult {
  bool ok = true;
  std::vector<std::string> mismatches;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      mismatches.push_back(what);
    }
  }
};

// Recompute every decision a transcript records and compare against the
// recorded values; regenerate the report and compare byte-for-byte.
inline ReplayResult replay(const std::string& dir) {
  ReplayResult res;
  TranscriptBundle bundle = load_bundle(dir);
  for (const Transcript& t : bundle.transcripts) {
    if (t.protocol == "ruv") {
      std::istringstream consts_in(t.consts_text);
      ProtocolConstants consts = parse_constants(consts_in);
      RuvParams params = ruv_params(t.seed_bits, consts);
      std::uint64_t w = 0;
      BitString x(t.rounds.size());
      for (std::size_t i = 0; i < t.rounds.size(); ++i) {
        w += chsh_win(t.rounds.in_a(i), t.rounds.in_b(i), t.rounds.out_a(i), t.rounds.out_b(i));
        x.set(i, t.rounds.out_a(i));
      }
      res.expect(w == t.get_u64("w"), "ruv: recomputed w differs");
      res.expect(params.win_threshold == t.get_double("win_threshold"),
                 "ruv: recomputed threshold differs");
      bool pass = static_cast<double>(w) >= params.win_threshold;
      res.expect((t.get("decision") == "pass") == pass, "ruv: recomputed decision differs");
      if (pass && t.find("z_hex")) {
        BitString seed = BitString::from_hex(t.seed_hex);
        std::size_t s1_len = t.seed_bits / 2;
        BitString s2 = seed.slice(t.seed_bits - s1_len, s1_len);
        SubBlockChoice choice = select_sub_block(x, s2, params);
        res.expect(choice.block == t.get_u64("chosen_block"), "ruv: chosen block differs");
        res.expect(choice.sub_block == t.get_u64("chosen_sub"), "ruv: chosen sub-block differs");
        res.expect(choice.z.to_hex() == t.get("z_hex"), "ruv: z slice differs");
      }
    } else if (t.protocol == "vv" && t.find("output_hex")) {
      std::istringstream consts_in(t.consts_text);
      ProtocolConstants consts = parse_constants(consts_in);
      VvParams params = vv_params(t.seed_bits, consts);
      BitString y(t.rounds.size());
      for (std::size_t i = 0; i < t.rounds.size(); ++i) y.set(i, t.rounds.out_a(i));
      SolveOptions opts;
      opts.max_seed_bits = params.s2_len;
      opts.allow_degenerate = consts.mode == ConstantsMode::test;
      ExtractorSpec spec = solve_spec(static_cast<std::size_t>(params.n),
                                      static_cast<std::size_t>(params.v), params.epsilon, opts);
      BitString seed = BitString::from_hex(t.seed_hex);
      BitString s2 = seed.slice(t.seed_bits - params.s2_len, params.s2_len);
      BitString out = extract(y, s2.slice(0, spec.d), spec);
      res.expect(out.to_hex() == t.get("output_hex"), "vv: re-extracted output differs");
    }
    if (t.protocol == "infinite" && t.get_u64("ledger_rows") > 0) {
      std::istringstream consts_in(t.consts_text);
      ProtocolConstants consts = parse_constants(consts_in);
      std::vector<std::pair<double, double>> hist;
      for (std::size_t i = 1; i <= t.get_u64("ledger_rows"); ++i) {
        std::string p = "ledger." + std::to_string(i) + ".";
        hist.emplace_back(t.get_double(p + "m"), t.get_double(p + "p"));
      }
      ErrorLedger ledger = delta_ledger(hist, consts);
      for (std::size_t i = 0; i < ledger.rows.size(); ++i) {
        std::string p = "ledger." + std::to_string(i + 1) + ".";
        res.expect(ledger.rows[i].delta == t.get_double(p + "delta"),
                   "ledger: recomputed delta differs at row " + std::to_string(i + 1));
      }
      res.expect(ledger.closed_bound == t.get_double("closed_bound"),
                 "ledger: closed bound differs");
      res.expect(ledger.final_bound == t.get_double("final_bound"), "ledger: final bound differs");
    }
  }

  std::ifstream rep(dir + "/report.txt", std::ios::binary);
  require(rep.good(), errc::input_error, "missing report.txt in " + dir);
  std::stringstream persisted;
  persisted << rep.rdbuf();
  res.expect(persisted.str() == report(bundle), "regenerated report differs byte-for-byte");
  return res;
}

}  // namespace certirand
