#include "doctest.h"

#include <cmath>
#include <map>

#include "certirand/protocol_ruv.hpp"

using namespace certirand;

namespace {

ProtocolConstants test_consts() { return ProtocolConstants{}; }  // alpha=2, test mode

Cluster ruv_cluster(QuantumBackend& backend, const Strategy& pair, std::uint64_t root) {
  return spawn_cluster(0,
                       {{Role::vv_a, Strategy::ideal()},
                        {Role::vv_b, Strategy::ideal()},
                        {Role::ruv_a, pair},
                        {Role::ruv_b, pair}},
                       backend, root);
}

}  // namespace

TEST_CASE("a single game with inputs (1,1) and outputs (0,1) is a win") {
  QuantumBackend backend;
  Cluster c = spawn_cluster(0,
                            {{Role::vv_a, Strategy::ideal()},
                             {Role::vv_b, Strategy::ideal()},
                             {Role::ruv_a, Strategy::parse("constant:0")},
                             {Role::ruv_b, Strategy::parse("constant:1")}},
                            backend, 401);
  Transcript t;
  GamesResult res = run_games(c.by_role(Role::ruv_a), c.by_role(Role::ruv_b),
                              BitString::from_string01("1"), BitString::from_string01("1"), t);
  CHECK(res.w == 1);  // 0 xor 1 = 1 and 1
  CHECK(t.rounds.size() == 1);
}

TEST_CASE("all-zeros devices win exactly the rounds without joint-1 inputs") {
  QuantumBackend backend;
  Cluster c = ruv_cluster(backend, Strategy::all_zeros(), 402);
  RngStream rng = RngStream::derive(403, "ruv-zeros");
  BitString a = rng.next_bits(4096), b = rng.next_bits(4096);
  Transcript t;
  GamesResult res = run_games(c.by_role(Role::ruv_a), c.by_role(Role::ruv_b), a, b, t);
  std::uint64_t expect = 0;
  for (std::size_t i = 0; i < 4096; ++i) expect += !(a.get(i) && b.get(i));
  CHECK(res.w == expect);
  CHECK(std::abs(static_cast<double>(res.w) / 4096.0 - 0.75) < 0.03);
}

TEST_CASE("ideal devices at N=4096 land on the Tsirelson rate") {
  QuantumBackend backend;
  Cluster c = ruv_cluster(backend, Strategy::ideal(), 404);
  RngStream rng = RngStream::derive(405, "ruv-ideal");
  BitString a = rng.next_bits(4096), b = rng.next_bits(4096);
  Transcript t;
  GamesResult res = run_games(c.by_role(Role::ruv_a), c.by_role(Role::ruv_b), a, b, t);
  CHECK(std::abs(static_cast<double>(res.w) / 4096.0 - kTsirelson) < 0.02);
}

TEST_CASE("threshold boundary at N=4096 sits between 3417 and 3418") {
  RuvParams p = ruv_params(4 * 4096, test_consts());
  CHECK_FALSE(check_threshold(3417, p));
  CHECK(check_threshold(3418, p));
  CHECK(check_threshold(static_cast<std::uint64_t>(std::ceil(kTsirelson * 4096.0)), p));
}

TEST_CASE("w = N passes for every sampled geometry") {
  for (std::size_t s = 16; s <= (1u << 16); s = s * 2 + 5) {
    RuvParams p = ruv_params(s, test_consts());
    if (p.n_games >= 2) CHECK(check_threshold(p.n_games, p));
  }
}

TEST_CASE("sub-block selection with a single choice consumes nothing") {
  ProtocolConstants c = test_consts();
  RuvParams p = ruv_params(16, c);  // N=4, t=2, one block of one sub-block
  CHECK(p.num_blocks * p.subs_per_block >= 1);
  BitString x = BitString::from_string01("1010");
  if (p.num_blocks * p.subs_per_block == 1) {
    SubBlockChoice choice = select_sub_block(x, BitString::zeros(8), p);
    CHECK(choice.block == 1);
    CHECK(choice.sub_block == 1);
    CHECK(choice.s2_consumed == 0);
  }
}

TEST_CASE("the stated indexing convention: (i=2, j=1) takes bits 5..6 of x") {
  RuvParams p = ruv_params(64, test_consts());  // N=16, t=4, sub-blocks of 2
  REQUIRE(p.t == 4);
  REQUIRE(p.sub_block_len == 2);
  REQUIRE(p.num_blocks == 4);
  BitString x = BitString::from_string01("0000110000000000");
  // index (i-1)*subs + (j-1) = 2 selects (i=2, j=1); 3-bit chunks, first = 010
  BitString s2 = BitString::from_string01("01000000000000000000000000000000");
  SubBlockChoice choice = select_sub_block(x, s2, p);
  CHECK(choice.block == 2);
  CHECK(choice.sub_block == 1);
  CHECK(choice.z.to_string01() == "11");  // 1-based bits 5 and 6
  CHECK_FALSE(choice.fallback_used);
}

TEST_CASE("selection is uniform over the block grid (chi-square at 1e-3)") {
  RuvParams p = ruv_params(1024, test_consts());  // N=256, 16 blocks x 4 subs = 64 cells
  REQUIRE(p.num_blocks * p.subs_per_block == 64);
  BitString x = BitString::zeros(256);
  RngStream rng = RngStream::derive(406, "ruv-uniform");
  std::map<std::pair<std::uint64_t, std::uint64_t>, int> counts;
  const int samples = 100000;
  for (int i = 0; i < samples; ++i) {
    SubBlockChoice choice = select_sub_block(x, rng.next_bits(512), p);
    counts[{choice.block, choice.sub_block}]++;
  }
  double expect = static_cast<double>(samples) / 64.0;
  double chi2 = 0.0;
  for (std::uint64_t i = 1; i <= p.num_blocks; ++i)
    for (std::uint64_t j = 1; j <= p.subs_per_block; ++j) {
      double o = counts[{i, j}];
      chi2 += (o - expect) * (o - expect) / expect;
    }
  CHECK(chi2 < 106.8);  // df = 63, significance 1e-3
}

TEST_CASE("selection falls back to modulo reduction when all chunks reject") {
  RuvParams p;
  p.n_games = 20;
  p.t = 5;
  p.num_blocks = 4;
  p.sub_block_len = 2;
  p.subs_per_block = 2;  // K = 8... use K=5 geometry instead
  p.num_blocks = 5;
  p.subs_per_block = 1;  // K = 5, 3-bit chunks
  p.t = 4;
  p.sub_block_len = 2;
  BitString x = BitString::zeros(20);
  BitString s2 = BitString::from_string01("111111");  // two chunks, both >= 5
  SubBlockChoice choice = select_sub_block(x, s2, p);
  CHECK(choice.fallback_used);
  CHECK(choice.block == 7 % 5 + 1);

  SubBlockChoice starved = select_sub_block(x, BitString::from_string01("11"), p);
  CHECK(starved.aborted);
}

TEST_CASE("run_ruv composes: pass, slice law, replay consistency") {
  QuantumBackend backend;
  Cluster c = ruv_cluster(backend, Strategy::ideal(), 407);
  BitString seed = RngStream::derive(408, "ruv-run").next_bits(16384);
  RuvRun run = run_ruv(c.by_role(Role::ruv_a), c.by_role(Role::ruv_b), seed, test_consts());
  REQUIRE_FALSE(run.aborted);
  CHECK(run.params.n_games == 4096);
  CHECK(run.z->size() == run.params.sub_block_len);

  // output slice law, recomputed from the recorded indices
  std::size_t start = static_cast<std::size_t>((run.chosen_block - 1) * run.params.t +
                                               (run.chosen_sub - 1) * run.params.sub_block_len);
  CHECK(*run.z == run.x.slice(start, static_cast<std::size_t>(run.params.sub_block_len)));

  // replay consistency: w, decision and inputs all recomputable from the log
  std::uint64_t w = 0;
  for (std::size_t i = 0; i < run.transcript.rounds.size(); ++i) {
    CHECK(run.transcript.rounds.in_a(i) == static_cast<int>(run.a.get(i)));
    CHECK(run.transcript.rounds.in_b(i) == static_cast<int>(run.b.get(i)));
    w += chsh_win(run.transcript.rounds.in_a(i), run.transcript.rounds.in_b(i),
                  run.transcript.rounds.out_a(i), run.transcript.rounds.out_b(i));
  }
  CHECK(w == run.w);
  CHECK(check_threshold(w, run.params));
  CHECK(run.transcript.get_u64("w") == w);

  // input privacy: the audit sees only own-input messages
  CHECK(audit_transcript(run.transcript).clean());
}

TEST_CASE("classical devices abort the threshold check") {
  QuantumBackend backend;
  Cluster c = ruv_cluster(backend, Strategy::all_zeros(), 409);
  BitString seed = RngStream::derive(410, "ruv-classical").next_bits(16384);
  RuvRun run = run_ruv(c.by_role(Role::ruv_a), c.by_role(Role::ruv_b), seed, test_consts());
  CHECK(run.aborted);
  CHECK(run.abort_cause == "ruv-threshold");
  CHECK_FALSE(run.z.has_value());
  CHECK(run.transcript.get("decision") == "abort");
}

TEST_CASE("a non-fatal device fault aborts the games with a cause") {
  QuantumBackend backend;
  DeviceEndpoint a({1, 0, Role::ruv_a}, Strategy::ideal(), backend, RngStream::derive(9, "fa"));
  DeviceEndpoint b({1, 0, Role::ruv_b}, Strategy::ideal(), backend, RngStream::derive(9, "fb"));
  auto src = std::make_shared<PairSource>(backend, 1, 1);
  a.attach_pair_source(src, 0);
  b.attach_pair_source(src, 0);  // both consume the same qubit: double measurement
  Transcript t;
  GamesResult res = run_games(a, b, BitString::zeros(4), BitString::zeros(4), t);
  CHECK(res.device_fault);
  CHECK(res.fault.find("protocol-error") != std::string::npos);
}

TEST_CASE("paper mode refuses to run below the rigidity threshold") {
  QuantumBackend backend;
  Cluster c = ruv_cluster(backend, Strategy::ideal(), 411);
  ProtocolConstants paper = ProtocolConstants::paper_defaults();
  BitString seed = RngStream::derive(412, "ruv-paper").next_bits(1024);
  CHECK_THROWS_AS(run_ruv(c.by_role(Role::ruv_a), c.by_role(Role::ruv_b), seed, paper), error);
}

TEST_CASE("t-constraint flag is recorded in test mode") {
  QuantumBackend backend;
  Cluster c = ruv_cluster(backend, Strategy::ideal(), 413);
  BitString seed = RngStream::derive(414, "ruv-flag").next_bits(1024);
  RuvRun run = run_ruv(c.by_role(Role::ruv_a), c.by_role(Role::ruv_b), seed, test_consts());
  bool flagged = false;
  for (const std::string& f : run.transcript.flags) flagged |= f == "t-constraint-void";
  CHECK(flagged);
}

TEST_CASE("determinism: identical seeds give identical ruv runs") {
  std::string digests[2];
  for (int rep = 0; rep < 2; ++rep) {
    QuantumBackend backend;
    Cluster c = ruv_cluster(backend, Strategy::noisy(0.02), 415);
    BitString seed = RngStream::derive(416, "ruv-det").next_bits(4096);
    RuvRun run = run_ruv(c.by_role(Role::ruv_a), c.by_role(Role::ruv_b), seed, test_consts());
    digests[rep] = std::to_string(run.w) + "/" + run.x.to_hex() + "/" +
                   (run.z ? run.z->to_hex() : std::string("-"));
  }
  CHECK(digests[0] == digests[1]);
}
