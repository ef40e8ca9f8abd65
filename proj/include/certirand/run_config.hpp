#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "certirand/errors.hpp"
#include "certirand/orchestrator.hpp"

namespace certirand {

// Run configuration file: flat `key = value` lines.
//   strategy.cluster0.vv_a = ideal | zeros | det:0,1 | noisy:0.01 |
//                            constant:0 | script:<path>
//   protocol.b.density / protocol.b.margin / protocol.b.selector_bits
//   run.rng_root / run.estimate_reps / run.fresh_devices
//   eavesdropper.cluster0 = true ; eavesdropper.cluster0.roles = ruv_a,ruv_b
struct RunSetup {
  ClusterStrategySet cluster0 = ClusterStrategySet::uniform(Strategy::ideal());
  ClusterStrategySet cluster1 = ClusterStrategySet::uniform(Strategy::ideal());
  RunConfig cfg;
};

inline Role parse_role(const std::string& name) {
  if (name == "vv_a") return Role::vv_a;
  if (name == "vv_b") return Role::vv_b;
  if (name == "ruv_a") return Role::ruv_a;
  if (name == "ruv_b") return Role::ruv_b;
  fail(errc::config_error, "unknown role: " + name);
}

inline RunSetup parse_run_setup(std::istream& in) {
  RunSetup setup;
  std::string line;
  int lineno = 0;
  auto strip = [](std::string s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string stripped = strip(line);
    if (stripped.empty()) continue;
    std::size_t eq = stripped.find('=');
    require(eq != std::string::npos, errc::config_error,
            "run config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = strip(stripped.substr(0, eq));
    std::string value = strip(stripped.substr(eq + 1));

    if (key.rfind("strategy.", 0) == 0) {
      std::string rest = key.substr(9);
      std::size_t dot = rest.find('.');
      require(dot != std::string::npos, errc::config_error, "bad strategy key: " + key);
      std::string cluster = rest.substr(0, dot);
      Role role = parse_role(rest.substr(dot + 1));
      ClusterStrategySet& set = cluster == "cluster0" ? setup.cluster0
                                : cluster == "cluster1"
                                    ? setup.cluster1
                                    : (fail(errc::config_error, "bad cluster name: " + cluster),
                                       setup.cluster0);
      for (auto& [r, s] : set.roles)
        if (r == role) s = Strategy::parse(value);
    } else if (key == "protocol.b.density") {
      setup.cfg.b.test_density = std::stod(value);
    } else if (key == "protocol.b.margin") {
      setup.cfg.b.margin = std::stod(value);
    } else if (key == "protocol.b.selector_bits") {
      setup.cfg.b.selector_bits = static_cast<std::size_t>(std::stoul(value));
    } else if (key == "run.rng_root") {
      setup.cfg.rng_root = std::stoull(value, nullptr, 0);
    } else if (key == "run.estimate_reps") {
      setup.cfg.estimate_reps = static_cast<std::size_t>(std::stoul(value));
    } else if (key == "run.fresh_devices") {
      setup.cfg.fresh_devices = value == "true" || value == "1";
    } else if (key == "eavesdropper.cluster0") {
      setup.cluster0.spawn.with_eavesdropper = value == "true" || value == "1";
    } else if (key == "eavesdropper.cluster1") {
      setup.cluster1.spawn.with_eavesdropper = value == "true" || value == "1";
    } else if (key == "entangle.cluster0" || key == "entangle.cluster1") {
      // comma-separated role pairs, e.g. "vv_a:ruv_b,vv_b:ruv_a"
      SpawnOptions& spawn =
          key.find("cluster0") != std::string::npos ? setup.cluster0.spawn : setup.cluster1.spawn;
      std::istringstream pairs(value);
      std::string tok;
      while (std::getline(pairs, tok, ',')) {
        auto colon = tok.find(':');
        require(colon != std::string::npos, errc::config_error, "bad entangle pair: " + tok);
        spawn.shared_entanglement.emplace_back(parse_role(tok.substr(0, colon)),
                                               parse_role(tok.substr(colon + 1)));
      }
    } else if (key == "eavesdropper.cluster0.roles" || key == "eavesdropper.cluster1.roles") {
      SpawnOptions& spawn =
          key.find("cluster0") != std::string::npos ? setup.cluster0.spawn : setup.cluster1.spawn;
      std::istringstream roles(value);
      std::string tok;
      while (std::getline(roles, tok, ',')) spawn.eve_entangled_roles.push_back(parse_role(tok));
    } else {
      fail(errc::config_error, "unknown run config key: " + key);
    }
  }
  return setup;
}

inline RunSetup load_run_setup(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), errc::config_error, "cannot open run config: " + path);
  return parse_run_setup(in);
}

}  // namespace certirand
