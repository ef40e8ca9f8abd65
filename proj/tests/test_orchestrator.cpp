#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "certirand/orchestrator.hpp"

using namespace certirand;

namespace {

ProtocolConstants tiny_consts() {
  ProtocolConstants c;
  c.gamma = 5.0;
  c.k1 = 1024.0;
  c.k4 = 0.01;
  return c;
}

// the acceptance composition constants: a fixed point of the realized chain at
// 16-bit seeds (v = h/2 ~ 3.2e5, N ~ 8.1e4, t = 285, z = 16)
ProtocolConstants chain_consts() {
  ProtocolConstants c;
  c.gamma = 3.0;
  c.k1 = 0.03;
  c.k4 = 0.001;
  return c;
}

RunConfig chain_cfg() {
  RunConfig cfg;
  cfg.b.test_density = 0.0;  // 16-bit seeds cannot fund test-round inputs
  return cfg;
}

RunConfig tiny_cfg() {
  RunConfig cfg;
  cfg.b.test_density = 0.25;
  cfg.b.margin = 0.06;
  return cfg;
}

std::string temp_dir(const std::string& name) {
  std::string dir = (std::filesystem::temp_directory_path() / name).string();
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("the 16-bit chain is a fixed point under the composition constants") {
  GChain chain = g_iter(3, 16, chain_consts());
  CHECK(chain.feasible);
  REQUIRE(chain.stages.size() == 3);
  for (const GStage& st : chain.stages) {
    CHECK(st.s_in == 16);
    CHECK(st.out_realized == 16);
    CHECK(st.vv.n > 100000);
    CHECK(st.vv.n < 2000000);
    CHECK(st.ruv.n_games > 50000);
    CHECK(st.ruv.n_games < 150000);
  }
}

TEST_CASE("vv abort short-circuits the cluster: no ruv rounds exist") {
  QuantumBackend backend;
  Cluster c = spawn_cluster(0,
                            {{Role::vv_a, Strategy::parse("constant:0")},
                             {Role::vv_b, Strategy::parse("constant:1")},
                             {Role::ruv_a, Strategy::ideal()},
                             {Role::ruv_b, Strategy::ideal()}},
                            backend, 501);
  RunConfig cfg = tiny_cfg();
  BitString seed = RngStream::derive(502, "orc-vvabort").next_bits(2048);
  ClusterRun run = cluster_expansion(c, seed, tiny_consts(), cfg);
  CHECK(run.aborted);
  CHECK(run.abort_cause.rfind("vv:", 0) == 0);
  CHECK_FALSE(run.ruv_run.has_value());
  CHECK_FALSE(run.output.has_value());
}

TEST_CASE("ideal cluster expansion outputs the ruv slice") {
  QuantumBackend backend;
  Cluster c = spawn_cluster(0,
                            {{Role::vv_a, Strategy::ideal()},
                             {Role::vv_b, Strategy::ideal()},
                             {Role::ruv_a, Strategy::ideal()},
                             {Role::ruv_b, Strategy::ideal()}},
                            backend, 503);
  RunConfig cfg = tiny_cfg();
  BitString seed = RngStream::derive(505, "orc-ideal").next_bits(2048);
  ClusterRun run = cluster_expansion(c, seed, tiny_consts(), cfg);
  REQUIRE_FALSE(run.aborted);
  REQUIRE(run.ruv_run.has_value());
  CHECK(*run.output == *run.ruv_run->z);
  CHECK(run.output->size() == run.ruv_run->params.sub_block_len);
}

TEST_CASE("preflight halts infeasible chains before any device runs") {
  ClusterStrategySet ideal = ClusterStrategySet::uniform(Strategy::ideal());
  BitString seed = RngStream::derive(506, "orc-preflight").next_bits(2048);
  // k=2 from s=2048 at the tiny constants: stage 1 emits 1 bit, below the VV floor
  ExpansionState state = infinite_expansion(ideal, ideal, seed, 2, tiny_consts());
  CHECK(state.halted);
  CHECK(state.cluster_runs.empty());
  CHECK(state.halt_cause.find("infeasible") != std::string::npos);
  // a single iteration is terminal and allowed to emit its 1-bit slice
  ExpansionState one = infinite_expansion(ideal, ideal, seed, 1, tiny_consts(), tiny_cfg());
  if (!one.halted) {
    CHECK(one.iterations_completed == 1);
    CHECK(one.current_seed.size() == 1);
  }
}

TEST_CASE("iteration i runs on cluster i mod 2 and the ledger matches") {
  ClusterStrategySet ideal = ClusterStrategySet::uniform(Strategy::ideal());
  BitString seed = BitString::from_hex("b7c3");  // 16 bits
  ExpansionState state = infinite_expansion(ideal, ideal, seed, 3, chain_consts(), chain_cfg());
  REQUIRE_FALSE(state.halted);
  REQUIRE(state.cluster_runs.size() == 3);
  CHECK(state.cluster_runs[0].cluster == 1);
  CHECK(state.cluster_runs[1].cluster == 0);
  CHECK(state.cluster_runs[2].cluster == 1);
  CHECK(state.iterations_completed == 3);

  // realized per-iteration output lengths equal the params-module chain
  GChain chain = g_iter(3, 16, chain_consts());
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(state.cluster_runs[i].output->size() == chain.stages[i].out_realized);

  // the only datum flowing between iterations is X_{i+1}
  for (std::size_t i = 1; i < 3; ++i)
    CHECK(state.cluster_runs[i].vv_run.transcript.seed_hex ==
          state.cluster_runs[i - 1].output->to_hex());

  // ledger recomputability
  REQUIRE(state.ledger.rows.size() == 3);
  std::vector<std::pair<double, double>> hist;
  for (const LedgerRow& row : state.ledger.rows) hist.emplace_back(row.m, row.p);
  ErrorLedger recomputed = delta_ledger(hist, chain_consts());
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(recomputed.rows[i].delta == state.ledger.rows[i].delta);
  CHECK(recomputed.final_bound == state.ledger.final_bound);
  CHECK(state.ledger.final_bound == 2.0 * state.ledger.rows.back().delta);
}

TEST_CASE("k=1 equals a single cluster expansion") {
  ClusterStrategySet ideal = ClusterStrategySet::uniform(Strategy::ideal());
  BitString seed = BitString::from_hex("a4f1");
  RunConfig cfg = chain_cfg();
  ExpansionState state = infinite_expansion(ideal, ideal, seed, 1, chain_consts(), cfg);
  REQUIRE_FALSE(state.halted);

  // replicate iteration 1 by hand: cluster index 1, same rng derivation
  QuantumBackend backend;
  Cluster c = spawn_cluster(1, ideal.roles, backend, cfg.rng_root + 1, ideal.spawn);
  ClusterRun manual = cluster_expansion(c, seed, chain_consts(), cfg);
  REQUIRE_FALSE(manual.aborted);
  CHECK(*manual.output == state.current_seed);
}

TEST_CASE("an adversarial cluster aborts iteration 2 with a partial ledger") {
  ClusterStrategySet ideal = ClusterStrategySet::uniform(Strategy::ideal());
  ClusterStrategySet adversarial = ideal;
  // identity tables win only 1 of 4 input pairs, far below the RUV threshold
  adversarial.roles[2].second = Strategy::parse("det:0,1");
  adversarial.roles[3].second = Strategy::parse("det:0,1");

  // iteration 1 -> cluster 1 (ideal), iteration 2 -> cluster 0 (adversarial)
  BitString seed = BitString::from_hex("5ce2");
  ExpansionState state =
      infinite_expansion(adversarial, ideal, seed, 3, chain_consts(), chain_cfg());
  CHECK(state.halted);
  CHECK(state.halt_cause.find("iteration 2") != std::string::npos);
  CHECK(state.halt_cause.find("ruv-threshold") != std::string::npos);
  CHECK(state.iterations_completed == 1);
  CHECK(state.cluster_runs.size() == 2);
  CHECK(state.ledger.rows.size() == 1);
}

TEST_CASE("ledger eps_ec at m=1000, lambda=1 is e^-10") {
  ErrorLedger led = delta_ledger({{1000.0, 1.0}}, tiny_consts());
  CHECK(led.rows[0].eps_ec.raw == doctest::Approx(4.5399929762e-5).epsilon(1e-9));
}

TEST_CASE("report is a pure function of the transcript bundle") {
  ClusterStrategySet ideal = ClusterStrategySet::uniform(Strategy::ideal());
  BitString seed = BitString::from_hex("77aa");
  ExpansionState state = infinite_expansion(ideal, ideal, seed, 2, chain_consts(), chain_cfg());
  REQUIRE_FALSE(state.halted);
  TranscriptBundle bundle = bundle_of(state);
  std::string a = report(bundle), b = report(bundle);
  CHECK(a == b);
  CHECK(a.find("infinite") != std::string::npos);

  std::string dir = temp_dir("certirand-orch-report");
  persist_bundle(bundle, dir);
  TranscriptBundle loaded = load_bundle(dir);
  CHECK(report(loaded) == a);
  std::filesystem::remove_all(dir);
}

TEST_CASE("replay verifies a persisted run and catches tampering") {
  ClusterStrategySet ideal = ClusterStrategySet::uniform(Strategy::ideal());
  BitString seed = BitString::from_hex("c2d9");
  ExpansionState state = infinite_expansion(ideal, ideal, seed, 2, chain_consts(), chain_cfg());
  REQUIRE_FALSE(state.halted);
  std::string dir = temp_dir("certirand-orch-replay");
  persist_bundle(bundle_of(state), dir);
  ReplayResult ok = replay(dir);
  CHECK(ok.ok);
  CHECK(ok.mismatches.empty());

  // flip the recorded w in the first ruv transcript
  std::string victim;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().string().find("ruv") != std::string::npos) victim = entry.path().string();
  REQUIRE_FALSE(victim.empty());
  std::ifstream in(victim);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  auto pos = content.find("[\"w\",\"");
  REQUIRE(pos != std::string::npos);
  content[pos + 6] = content[pos + 6] == '1' ? '2' : '1';
  std::ofstream out(victim, std::ios::binary);
  out << content;
  out.close();
  ReplayResult bad = replay(dir);
  CHECK_FALSE(bad.ok);
  std::filesystem::remove_all(dir);
}

TEST_CASE("fresh-devices mode respawns endpoints and still completes") {
  ClusterStrategySet ideal = ClusterStrategySet::uniform(Strategy::ideal());
  BitString seed = BitString::from_hex("9e01");
  RunConfig cfg = chain_cfg();
  cfg.fresh_devices = true;
  ExpansionState state = infinite_expansion(ideal, ideal, seed, 3, chain_consts(), cfg);
  CHECK_FALSE(state.halted);
  CHECK(state.iterations_completed == 3);
}

TEST_CASE("measured pass-rate estimation labels ledger rows") {
  ClusterStrategySet ideal = ClusterStrategySet::uniform(Strategy::ideal());
  BitString seed = BitString::from_hex("3c4d");
  RunConfig cfg = chain_cfg();
  cfg.estimate_reps = 3;
  ExpansionState state = infinite_expansion(ideal, ideal, seed, 1, chain_consts(), cfg);
  REQUIRE_FALSE(state.halted);
  REQUIRE(state.ledger.rows.size() == 1);
  CHECK(state.ledger.rows[0].p_measured);
  CHECK(state.ledger.rows[0].p > 0.0);
  CHECK(state.ledger.rows[0].p <= 1.0);
}

TEST_CASE("empty-run report carries the halt diagnosis") {
  ClusterStrategySet ideal = ClusterStrategySet::uniform(Strategy::ideal());
  BitString seed = RngStream::derive(508, "orc-empty").next_bits(2048);
  ExpansionState state = infinite_expansion(ideal, ideal, seed, 2, tiny_consts());
  REQUIRE(state.halted);
  std::string rep = report(bundle_of(state));
  CHECK(rep.find("halted = true") != std::string::npos);
  CHECK(rep.find("iterations_completed = 0") != std::string::npos);
}
