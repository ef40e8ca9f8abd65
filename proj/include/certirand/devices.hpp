#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "certirand/errors.hpp"
#include "certirand/qsim.hpp"
#include "certirand/rng.hpp"
#include "certirand/transcript.hpp"

namespace certirand {

enum class Role { vv_a, vv_b, ruv_a, ruv_b };

inline const char* role_name(Role r) {
  switch (r) {
    case Role::vv_a: return "vv_a";
    case Role::vv_b: return "vv_b";
    case Role::ruv_a: return "ruv_a";
    case Role::ruv_b: return "ruv_b";
  }
  return "?";
}

inline int role_ordinal(Role r) { return static_cast<int>(r); }

struct DeviceId {
  int index = 1;  // 1..8 (9 is reserved for the passive eavesdropper)
  int cluster = 0;
  Role role = Role::vv_a;
};

inline bool chsh_win(int a_in, int b_in, int out_a, int out_b) {
  return (out_a ^ out_b) == (a_in & b_in);
}

// Deterministic table/automaton; no general code execution.
struct ScriptProgram {
  enum class Kind { constant, table, automaton };
  Kind kind = Kind::constant;
  int constant_out = 0;
  std::array<int, 2> table{0, 0};
  // automaton: transition[state][input] -> {next_state, output}
  std::vector<std::array<std::pair<int, int>, 2>> transitions;
  int start_state = 0;

  int step(int input, int& state) const {
    switch (kind) {
      case Kind::constant: return constant_out;
      case Kind::table: return table[input];
      case Kind::automaton: {
        auto [next, out] = transitions[static_cast<std::size_t>(state)][input];
        state = next;
        return out;
      }
    }
    return 0;
  }

  static ScriptProgram parse_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), errc::config_error, "cannot open script file: " + path);
    ScriptProgram prog;
    std::string kind;
    in >> kind;
    if (kind == "constant") {
      prog.kind = Kind::constant;
      in >> prog.constant_out;
    } else if (kind == "table") {
      prog.kind = Kind::table;
      in >> prog.table[0] >> prog.table[1];
    } else if (kind == "automaton") {
      prog.kind = Kind::automaton;
      std::size_t states;
      in >> states >> prog.start_state;
      prog.transitions.resize(states);
      for (std::size_t s = 0; s < states; ++s)
        for (int b = 0; b < 2; ++b)
          in >> prog.transitions[s][b].first >> prog.transitions[s][b].second;
    } else {
      fail(errc::config_error, "unknown script kind: " + kind);
    }
    require(!in.fail(), errc::config_error, "malformed script file: " + path);
    return prog;
  }
};

struct Strategy {
  enum class Kind { ideal_chsh, classical_deterministic, noisy_ideal, scripted };
  Kind kind = Kind::ideal_chsh;
  std::array<int, 2> table{0, 0};  // classical_deterministic
  double noise = 0.0;              // noisy_ideal
  ScriptProgram script;

  bool quantum() const { return kind == Kind::ideal_chsh || kind == Kind::noisy_ideal; }

  static Strategy ideal() { return Strategy{}; }
  static Strategy deterministic(int out0, int out1) {
    Strategy s;
    s.kind = Kind::classical_deterministic;
    s.table = {out0, out1};
    return s;
  }
  static Strategy noisy(double p) {
    require(p >= 0.0 && p <= 1.0, errc::config_error, "noise must lie in [0,1]");
    Strategy s;
    s.kind = Kind::noisy_ideal;
    s.noise = p;
    return s;
  }
  static Strategy scripted(ScriptProgram prog) {
    Strategy s;
    s.kind = Kind::scripted;
    s.script = std::move(prog);
    return s;
  }
  static Strategy all_zeros() { return deterministic(0, 0); }

  // "ideal" | "zeros" | "det:0,1" | "noisy:0.01" | "constant:1" | "script:<path>"
  static Strategy parse(const std::string& spec) {
    if (spec == "ideal") return ideal();
    if (spec == "zeros") return all_zeros();
    auto colon = spec.find(':');
    std::string head = spec.substr(0, colon);
    std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (head == "noisy") return noisy(std::stod(rest));
    if (head == "det") {
      auto comma = rest.find(',');
      require(comma != std::string::npos, errc::config_error, "det strategy needs out0,out1");
      return deterministic(std::stoi(rest.substr(0, comma)), std::stoi(rest.substr(comma + 1)));
    }
    if (head == "constant") {
      ScriptProgram prog;
      prog.kind = ScriptProgram::Kind::constant;
      prog.constant_out = std::stoi(rest);
      return scripted(prog);
    }
    if (head == "script") return scripted(ScriptProgram::parse_file(rest));
    fail(errc::config_error, "unknown strategy spec: " + spec);
  }

  std::string describe() const {
    switch (kind) {
      case Kind::ideal_chsh: return "ideal";
      case Kind::classical_deterministic:
        return "det:" + std::to_string(table[0]) + "," + std::to_string(table[1]);
      case Kind::noisy_ideal: {
        std::ostringstream os;
        os << "noisy:" << noise;
        return os.str();
      }
      case Kind::scripted: return "scripted";
    }
    return "?";
  }
};

// Lazily batched EPR supply for one device pair. Round k consumes pair k; the
// two endpoints index the shared sequence without communicating.
class PairSource {
 public:
  PairSource(QuantumBackend& backend, int owner_a, int owner_b)
      : backend_(&backend), owner_a_(owner_a), owner_b_(owner_b),
        batch_pairs_(backend.register_cap() / 2) {}

  std::pair<QuantumRegister*, std::size_t> qubit_for(std::uint64_t round, int side) {
    std::size_t reg_idx = static_cast<std::size_t>(round / batch_pairs_);
    while (registers_.size() <= reg_idx)
      registers_.push_back(&backend_->allocate_epr_pairs(batch_pairs_, owner_a_, owner_b_));
    std::size_t pair_in_reg = static_cast<std::size_t>(round % batch_pairs_);
    return {registers_[reg_idx], 2 * pair_in_reg + static_cast<std::size_t>(side)};
  }

 private:
  QuantumBackend* backend_;
  int owner_a_, owner_b_;
  std::size_t batch_pairs_;
  std::vector<QuantumRegister*> registers_;
};

// Angle tables of the ideal CHSH strategy (X-Z plane).
inline double ideal_angle(Role role, int input) {
  bool a_side = role == Role::vv_a || role == Role::ruv_a;
  if (a_side) return input == 0 ? 0.0 : M_PI / 2.0;
  return input == 0 ? M_PI / 4.0 : -M_PI / 4.0;
}

class DeviceEndpoint {
 public:
  DeviceEndpoint(DeviceId id, Strategy strategy, QuantumBackend& backend, RngStream rng)
      : id_(id), strategy_(std::move(strategy)), backend_(&backend), rng_(rng),
        script_state_(strategy_.script.start_state) {}

  const DeviceId& id() const { return id_; }
  const Strategy& strategy() const { return strategy_; }

  void attach_pair_source(std::shared_ptr<PairSource> src, int side) {
    pairs_ = std::move(src);
    side_ = side;
  }

  // Output produced from the local input, local RNG, and owned qubits only.
  int play_round(int input) {
    int out = 0;
    switch (strategy_.kind) {
      case Strategy::Kind::classical_deterministic:
        out = strategy_.table[input];
        break;
      case Strategy::Kind::scripted:
        out = strategy_.script.step(input, script_state_);
        break;
      case Strategy::Kind::noisy_ideal:
      case Strategy::Kind::ideal_chsh: {
        auto [reg, qubit] = pairs_->qubit_for(round_, side_);
        if (strategy_.kind == Strategy::Kind::noisy_ideal)
          backend_->depolarize(*reg, qubit, strategy_.noise, rng_);
        MeasurementRequest req{qubit, ideal_angle(id_.role, input), id_.index};
        out = backend_->measure(*reg, req, rng_);
        break;
      }
    }
    ++round_;
    input_history_.push_back(static_cast<std::uint8_t>(input));
    return out;
  }

  std::uint64_t rounds_played() const { return round_; }
  const std::vector<std::uint8_t>& input_history() const { return input_history_; }

 private:
  DeviceId id_;
  Strategy strategy_;
  QuantumBackend* backend_;
  RngStream rng_;
  std::shared_ptr<PairSource> pairs_;
  int side_ = 0;
  std::uint64_t round_ = 0;
  int script_state_ = 0;
  std::vector<std::uint8_t> input_history_;  // unbounded device memory
};

// Passive ninth endpoint: holds purifying qubits, receives no messages.
class EveEndpoint {
 public:
  static constexpr int kIndex = 9;
  void hold(QuantumRegister* reg, std::size_t qubit) { held_.emplace_back(reg, qubit); }

  std::vector<int> measure_all(QuantumBackend& backend, double angle, RngStream& rng) {
    std::vector<int> outs;
    for (auto [reg, qubit] : held_)
      outs.push_back(backend.measure(*reg, MeasurementRequest{qubit, angle, kIndex}, rng));
    return outs;
  }

  std::size_t holdings() const { return held_.size(); }

 private:
  std::vector<std::pair<QuantumRegister*, std::size_t>> held_;
};

struct SpawnOptions {
  bool with_eavesdropper = false;
  // roles whose devices get one purifying EPR half handed to Eve at spawn
  std::vector<Role> eve_entangled_roles;
  // adversarial spawn-time requests: shared EPR pairs across arbitrary device
  // subsets; honest strategies never touch them
  std::vector<std::pair<Role, Role>> shared_entanglement;
};

struct Cluster {
  int cluster_id = 0;
  std::array<std::unique_ptr<DeviceEndpoint>, 4> endpoints;  // by role ordinal
  std::unique_ptr<EveEndpoint> eve;

  DeviceEndpoint& by_role(Role r) { return *endpoints[static_cast<std::size_t>(role_ordinal(r))]; }
};

inline Cluster spawn_cluster(int cluster_id, const std::vector<std::pair<Role, Strategy>>& strategies,
                             QuantumBackend& backend, std::uint64_t rng_root,
                             const SpawnOptions& opts = {}) {
  require(cluster_id == 0 || cluster_id == 1, errc::config_error, "cluster id must be 0 or 1");
  require(strategies.size() == 4, errc::config_error, "a cluster needs exactly four strategies");
  std::array<bool, 4> seen{};
  Cluster cluster;
  cluster.cluster_id = cluster_id;
  for (const auto& [role, strat] : strategies) {
    int ord = role_ordinal(role);
    require(!seen[static_cast<std::size_t>(ord)], errc::config_error,
            std::string("duplicate role in cluster: ") + role_name(role));
    seen[static_cast<std::size_t>(ord)] = true;
    DeviceId id{cluster_id * 4 + ord + 1, cluster_id, role};
    RngStream rng = RngStream::derive(rng_root, "device", static_cast<std::uint64_t>(id.index));
    cluster.endpoints[static_cast<std::size_t>(ord)] =
        std::make_unique<DeviceEndpoint>(id, strat, backend, rng);
  }
  // pre-allocate entanglement only between referee-designated pairs
  auto pair_up = [&](Role ra, Role rb) {
    DeviceEndpoint& a = cluster.by_role(ra);
    DeviceEndpoint& b = cluster.by_role(rb);
    if (a.strategy().quantum() || b.strategy().quantum()) {
      auto src = std::make_shared<PairSource>(backend, a.id().index, b.id().index);
      a.attach_pair_source(src, 0);
      b.attach_pair_source(src, 1);
    }
  };
  pair_up(Role::vv_a, Role::vv_b);
  pair_up(Role::ruv_a, Role::ruv_b);

  for (auto [ra, rb] : opts.shared_entanglement) {
    require(ra != rb, errc::config_error, "shared entanglement needs two distinct devices");
    backend.allocate_epr_pairs(1, cluster.by_role(ra).id().index,
                               cluster.by_role(rb).id().index);
  }

  if (opts.with_eavesdropper) {
    cluster.eve = std::make_unique<EveEndpoint>();
    for (Role r : opts.eve_entangled_roles) {
      DeviceEndpoint& dev = cluster.by_role(r);
      QuantumRegister& reg = backend.allocate_epr_pairs(1, dev.id().index, EveEndpoint::kIndex);
      cluster.eve->hold(&reg, 1);  // the device never touches its half: it purifies
    }
  }
  return cluster;
}

struct AuditViolation {
  std::uint64_t seq = 0;
  std::string description;
};

struct AuditReport {
  std::vector<AuditViolation> violations;
  std::uint64_t messages_checked = 0;
  bool clean() const { return violations.empty(); }
};

// Mechanical non-signaling discipline check: every message to or from a device
// names only that device's own inputs/outputs, and no device-to-device channel
// records exist.
inline AuditReport audit_transcript(const Transcript& transcript) {
  AuditReport report;
  transcript.for_each_message([&](const MessageRecord& m) {
    ++report.messages_checked;
    if (m.kind == MessageRecord::Kind::device_to_device) {
      report.violations.push_back(
          {m.seq, "device-to-device channel record at round " + std::to_string(m.round)});
      return;
    }
    if (m.kind == MessageRecord::Kind::note) return;
    if (m.about_device != m.device) {
      report.violations.push_back(
          {m.seq, "message for device " + std::to_string(m.device) + " references device " +
                      std::to_string(m.about_device) + "'s " + m.field + " at round " +
                      std::to_string(m.round)});
    }
    if (m.device == EveEndpoint::kIndex) {
      report.violations.push_back({m.seq, "eavesdropper endpoint received a protocol message"});
    }
  });
  return report;
}

}  // namespace certirand
