#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "certirand/lemma_suite.hpp"
#include "certirand/orchestrator.hpp"
#include "certirand/run_config.hpp"

using namespace certirand;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitAbort = 2;

ProtocolConstants consts_from(const std::string& path) {
  if (!path.empty()) return load_constants(path);
  const char* env = std::getenv("CERTIRAND_CONSTS");
  if (env && *env) return load_constants(env);
  return ProtocolConstants{};  // test-mode defaults
}

void print_params_table(std::size_t s, const ProtocolConstants& consts, bool as_json) {
  VvParams vv = vv_params(s, consts);
  std::optional<RuvParams> ruv;
  if (s >= kMinRuvSeedBits) ruv = ruv_params(s, consts);
  GStage g = g_of(s, consts);

  if (as_json) {
    nlohmann::json j{{"s", s},
                     {"vv",
                      {{"s1_len", vv.s1_len},
                       {"s2_len", vv.s2_len},
                       {"h", vv.h},
                       {"h_log2", vv.h_log2},
                       {"h_fits", vv.h_fits},
                       {"n", vv.n},
                       {"n_fits", vv.n_fits},
                       {"d", vv.d},
                       {"v", vv.v},
                       {"epsilon", vv.epsilon},
                       {"d_within_s2", vv.d_within_s2},
                       {"gamma_flagged", vv.gamma_flagged}}},
                     {"g",
                      {{"out_realized", g.out_realized},
                       {"out_paper_r", g.out_paper_r},
                       {"feasible", g.feasible},
                       {"why_infeasible", g.why_infeasible}}}};
    if (ruv)
      j["ruv"] = {{"n_games", ruv->n_games},
                  {"t", ruv->t},
                  {"num_blocks", ruv->num_blocks},
                  {"sub_block_len", ruv->sub_block_len},
                  {"subs_per_block", ruv->subs_per_block},
                  {"r", ruv->r},
                  {"nu", ruv->nu},
                  {"zeta", ruv->zeta},
                  {"win_threshold", ruv->win_threshold},
                  {"t_constraint_ok", ruv->t_constraint_ok}};
    std::cout << j.dump(2) << "\n";
    return;
  }

  auto row = [](const std::string& k, const std::string& v) {
    std::cout << "  " << std::left << std::setw(18) << k << " " << v << "\n";
  };
  std::cout << "parameters for s = " << s << "\n";
  std::cout << "VV (Appendix C)\n";
  row("s1_len = s2_len", std::to_string(vv.s1_len));
  row("h", vv.h_fits ? std::to_string(vv.h) : "2^" + std::to_string(vv.h_log2) + " (overflow)");
  row("n", vv.n_fits ? std::to_string(vv.n) : "overflow");
  row("d", std::to_string(vv.d) + (vv.d_within_s2 ? "" : "  [exceeds |S2|]"));
  row("v", std::to_string(vv.v));
  row("epsilon", std::to_string(vv.epsilon));
  if (vv.gamma_flagged) row("flag", "gamma outside (0,1)");
  if (ruv) {
    std::cout << "RUV\n";
    row("N", std::to_string(ruv->n_games));
    row("t", std::to_string(ruv->t) + (ruv->t_constraint_ok ? " (> 85)" : " (<= 85, flagged)"));
    row("blocks x subs", std::to_string(ruv->num_blocks) + " x " +
                             std::to_string(ruv->subs_per_block));
    row("sub_block_len", std::to_string(ruv->sub_block_len));
    row("r", std::to_string(ruv->r));
    row("win_threshold", std::to_string(ruv->win_threshold));
    row("nu", std::to_string(ruv->nu));
    row("zeta", std::to_string(ruv->zeta));
  }
  std::cout << "g(s)\n";
  row("realized", std::to_string(g.out_realized));
  row("paper r(v(s))", std::to_string(g.out_paper_r));
  row("feasible", g.feasible ? "yes" : "no (" + g.why_infeasible + ")");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), errc::input_error, "cannot open: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string s = ss.str();
  std::string out;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
  return out;
}

RunSetup setup_from(const std::string& strategy_arg) {
  if (strategy_arg.rfind("file:", 0) == 0) return load_run_setup(strategy_arg.substr(5));
  RunSetup setup;
  Strategy s = Strategy::parse(strategy_arg);
  setup.cluster0 = ClusterStrategySet::uniform(s);
  setup.cluster1 = ClusterStrategySet::uniform(s);
  return setup;
}

int run_vv_command(const std::string& seed_hex, const std::string& strategy,
                   const std::string& consts_path, const std::string& out_dir, double density,
                   double margin) {
  ProtocolConstants consts = consts_from(consts_path);
  RunSetup setup = setup_from(strategy);
  setup.cfg.b.test_density = density >= 0 ? density : setup.cfg.b.test_density;
  setup.cfg.b.margin = margin >= 0 ? margin : setup.cfg.b.margin;

  QuantumBackend backend;
  Cluster cluster = spawn_cluster(0, setup.cluster0.roles, backend, setup.cfg.rng_root,
                                  setup.cluster0.spawn);
  BitString seed = BitString::from_hex(seed_hex);
  VvRun run = run_vv(cluster.by_role(Role::vv_a), cluster.by_role(Role::vv_b), seed, consts,
                     setup.cfg.b);
  TranscriptBundle bundle{"vv", {run.transcript}};
  std::cout << report(bundle);
  if (!out_dir.empty()) persist_bundle(bundle, out_dir);
  if (run.aborted) {
    std::cerr << "aborted: " << run.abort_cause << "\n";
    return kExitAbort;
  }
  std::cout << "output: " << run.x->to_hex() << " (" << run.x->size() << " bits)\n";
  return kExitOk;
}

int run_ruv_command(const std::string& seed_hex, const std::string& strategy,
                    const std::string& consts_path, const std::string& out_dir) {
  ProtocolConstants consts = consts_from(consts_path);
  RunSetup setup = setup_from(strategy);
  QuantumBackend backend;
  Cluster cluster = spawn_cluster(0, setup.cluster0.roles, backend, setup.cfg.rng_root,
                                  setup.cluster0.spawn);
  BitString seed = BitString::from_hex(seed_hex);
  RuvRun run = run_ruv(cluster.by_role(Role::ruv_a), cluster.by_role(Role::ruv_b), seed, consts);
  TranscriptBundle bundle{"ruv", {run.transcript}};
  std::cout << report(bundle);
  if (!out_dir.empty()) persist_bundle(bundle, out_dir);
  if (run.aborted) {
    std::cerr << "aborted: " << run.abort_cause << "\n";
    return kExitAbort;
  }
  std::cout << "output: " << run.z->to_hex() << " (" << run.z->size() << " bits)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"certirand: a desk-scale device-independent randomness expansion laboratory"};
  app.require_subcommand(1);

  // params
  auto* params_cmd = app.add_subcommand("params", "print the parameter table for a seed length");
  std::size_t params_s = 2048;
  std::string params_consts;
  bool params_json = false;
  params_cmd->add_option("--s", params_s, "seed length in bits")->required();
  params_cmd->add_option("--consts", params_consts, "constants file");
  params_cmd->add_flag("--json", params_json, "machine-readable output");

  // extract
  auto* extract_cmd = app.add_subcommand("extract", "run the quantum-proof extractor");
  std::size_t ext_n = 0, ext_r = 0;
  double ext_eps = 0.0;
  std::string ext_source, ext_seed_hex, ext_mode = "parity";
  bool ext_degenerate = false;
  extract_cmd->add_option("--n", ext_n, "source length in bits")->required();
  extract_cmd->add_option("--r", ext_r, "output length in bits")->required();
  extract_cmd->add_option("--epsilon", ext_eps, "extractor error")->required();
  extract_cmd->add_option("--source", ext_source, "file holding the source as hex")->required();
  extract_cmd->add_option("--seed", ext_seed_hex, "seed as hex")->required();
  extract_cmd->add_option("--mode", ext_mode, "one-bit mode: parity | rsh");
  extract_cmd->add_flag("--allow-degenerate", ext_degenerate,
                        "permit flagged degenerate designs");

  // run-vv / run-ruv
  auto* vv_cmd = app.add_subcommand("run-vv", "run the VV sub-protocol");
  std::string vv_seed, vv_strategy = "ideal", vv_consts, vv_out;
  double vv_density = -1.0, vv_margin = -1.0;
  vv_cmd->add_option("--seed", vv_seed, "seed as hex")->required();
  vv_cmd->add_option("--strategy", vv_strategy, "ideal|zeros|noisy:p|det:a,b|file:<config>");
  vv_cmd->add_option("--consts", vv_consts, "constants file");
  vv_cmd->add_option("--out", vv_out, "transcript directory");
  vv_cmd->add_option("--density", vv_density, "test-round density");
  vv_cmd->add_option("--margin", vv_margin, "test-round margin");

  auto* ruv_cmd = app.add_subcommand("run-ruv", "run the RUV sub-protocol");
  std::string ruv_seed, ruv_strategy = "ideal", ruv_consts, ruv_out;
  ruv_cmd->add_option("--seed", ruv_seed, "seed as hex")->required();
  ruv_cmd->add_option("--strategy", ruv_strategy, "ideal|zeros|noisy:p|det:a,b|file:<config>");
  ruv_cmd->add_option("--consts", ruv_consts, "constants file");
  ruv_cmd->add_option("--out", ruv_out, "transcript directory");

  // run-infinite
  auto* inf_cmd = app.add_subcommand("run-infinite", "run the InfiniteExpansion composition");
  std::string inf_seed, inf_consts, inf_strategies, inf_out;
  std::size_t inf_rounds = 1, inf_reps = 0;
  bool inf_fresh = false;
  inf_cmd->add_option("--seed", inf_seed, "seed as hex")->required();
  inf_cmd->add_option("--rounds", inf_rounds, "iterations k")->required();
  inf_cmd->add_option("--consts", inf_consts, "constants file");
  inf_cmd->add_option("--strategies", inf_strategies, "run config file");
  inf_cmd->add_option("--out", inf_out, "transcript directory");
  inf_cmd->add_flag("--fresh-devices", inf_fresh, "discard devices between iterations");
  inf_cmd->add_option("--estimate-reps", inf_reps, "pass-rate estimation repetitions");

  // verify-lemmas
  auto* lem_cmd = app.add_subcommand("verify-lemmas", "numerically check the lemma suite");
  int lem_trials = 1000, lem_dims = 2;
  std::string lem_seed = "17", lem_matrix, lem_a = "A", lem_b = "B";
  lem_cmd->add_option("--trials", lem_trials, "instances per suite");
  lem_cmd->add_option("--dims", lem_dims, "per-factor dimension of the generic suites (2..4)");
  lem_cmd->add_option("--seed", lem_seed, "rng seed (hex or decimal)");
  lem_cmd->add_option("--matrix", lem_matrix, "ad-hoc Pinsker check on a matrix file");
  lem_cmd->add_option("--a", lem_a, "first bipartition label for --matrix");
  lem_cmd->add_option("--b", lem_b, "second bipartition label for --matrix");

  // replay
  auto* replay_cmd = app.add_subcommand("replay", "re-verify a persisted transcript directory");
  std::string replay_dir;
  replay_cmd->add_option("dir", replay_dir, "transcript directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*params_cmd) {
      print_params_table(params_s, consts_from(params_consts), params_json);
      return kExitOk;
    }
    if (*extract_cmd) {
      SolveOptions opts;
      opts.allow_degenerate = ext_degenerate;
      opts.one_bit = ext_mode == "rsh" ? OneBitMode::rs_hadamard : OneBitMode::parity_of_selected;
      ExtractorSpec spec = solve_spec(ext_n, ext_r, ext_eps, opts);
      BitString source = BitString::from_hex(read_text_file(ext_source)).slice(0, ext_n);
      BitString seed = BitString::from_hex(ext_seed_hex);
      require(seed.size() >= spec.d, errc::input_error,
              "seed too short: need " + std::to_string(spec.d) + " bits");
      BitString out = extract(source, seed.slice(0, spec.d), spec);
      std::cout << out.to_hex() << "\n";
      std::cerr << "d=" << spec.d << " t_w=" << spec.design.set_size
                << (spec.degenerate ? " (degenerate design)" : "") << "\n";
      return kExitOk;
    }
    if (*vv_cmd) return run_vv_command(vv_seed, vv_strategy, vv_consts, vv_out, vv_density, vv_margin);
    if (*ruv_cmd) return run_ruv_command(ruv_seed, ruv_strategy, ruv_consts, ruv_out);
    if (*inf_cmd) {
      ProtocolConstants consts = consts_from(inf_consts);
      RunSetup setup = inf_strategies.empty() ? RunSetup{} : load_run_setup(inf_strategies);
      setup.cfg.fresh_devices = inf_fresh || setup.cfg.fresh_devices;
      if (inf_reps > 0) setup.cfg.estimate_reps = inf_reps;
      BitString seed = BitString::from_hex(inf_seed);
      ExpansionState state =
          infinite_expansion(setup.cluster0, setup.cluster1, seed, inf_rounds, consts, setup.cfg);
      TranscriptBundle bundle = bundle_of(state);
      std::cout << report(bundle);
      if (!inf_out.empty()) persist_bundle(bundle, inf_out);
      if (state.halted) {
        std::cerr << "halted: " << state.halt_cause << "\n";
        return kExitAbort;
      }
      std::cout << "final output (" << state.current_seed.size()
                << " bits): " << state.current_seed.to_hex() << "\n";
      return kExitOk;
    }
    if (*lem_cmd) {
      if (!lem_matrix.empty()) {
        std::ifstream in(lem_matrix);
        require(in.good(), errc::input_error, "cannot open matrix file: " + lem_matrix);
        qi::DensityMatrix dm = qi::parse_matrix_text(in);
        dm.validate();
        qi::InequalityCheck c = qi::check_pinsker(dm, {lem_a}, {lem_b});
        std::cout << "pinsker lhs=" << c.lhs << " rhs=" << c.rhs
                  << " holds=" << (c.holds ? "yes" : "no") << "\n";
        return c.holds ? kExitOk : kExitAbort;
      }
      std::uint64_t seed = std::stoull(lem_seed, nullptr, 0);
      bool all_ok = true;
      for (const qi::SuiteResult& res : qi::run_lemma_suites(lem_trials, seed, lem_dims)) {
        all_ok &= res.passed();
        std::cout << std::left << std::setw(32) << res.name << (res.passed() ? "PASS" : "FAIL")
                  << "  trials=" << res.trials << " violations=" << res.violations
                  << " worst_margin=" << res.worst_margin << "\n";
      }
      return all_ok ? kExitOk : kExitAbort;
    }
    if (*replay_cmd) {
      ReplayResult res = replay(replay_dir);
      if (res.ok) {
        std::cout << "replay OK: transcripts reproduce every recorded decision\n";
        return kExitOk;
      }
      for (const std::string& m : res.mismatches) std::cerr << "mismatch: " << m << "\n";
      return kExitAbort;
    }
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
