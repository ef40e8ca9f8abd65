#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "certirand/errors.hpp"
#include "certirand/rng.hpp"

namespace certirand {

using cd = std::complex<double>;

// Measurement basis cos(theta) Z + sin(theta) X; outcome 0 is the +1 eigenvector.
struct MeasurementRequest {
  std::size_t qubit = 0;
  double angle = 0.0;
  int requester = 0;  // DeviceId index (0 = referee/test harness)
};

// Pure-state register. The only state-producing operation is EPR allocation
// and the only evolutions are single-qubit measurement and depolarization, so
// the global state stays a tensor product of <=2-qubit factors and is stored
// that way. Qubit k of pair i is qubit 2i+k; owner_a holds the even qubits.
class QuantumRegister {
 public:
  QuantumRegister(std::size_t num_qubits, int owner_even, int owner_odd)
      : owners_(num_qubits), consumed_(num_qubits, false), factor_of_(num_qubits) {
    require(num_qubits % 2 == 0, errc::input_error, "EPR register needs an even qubit count");
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (std::size_t i = 0; i < num_qubits / 2; ++i) {
      Factor f;
      f.qubits = {2 * i, 2 * i + 1};
      f.amps = {inv_sqrt2, 0.0, 0.0, inv_sqrt2};  // (|00> + |11>)/sqrt(2)
      factor_of_[2 * i] = factor_of_[2 * i + 1] = factors_.size();
      factors_.push_back(std::move(f));
      owners_[2 * i] = owner_even;
      owners_[2 * i + 1] = owner_odd;
    }
  }

  // Test-harness constructor for an arbitrary small pure state on one factor.
  QuantumRegister(std::vector<cd> amps, int owner) {
    std::size_t n = 0;
    while ((1u << n) < amps.size()) ++n;
    require((1u << n) == amps.size() && n >= 1 && n <= 2, errc::input_error,
            "explicit register must hold 1 or 2 qubits");
    Factor f;
    for (std::size_t q = 0; q < n; ++q) {
      f.qubits.push_back(q);
      owners_.push_back(owner);
      consumed_.push_back(false);
      factor_of_.push_back(0);
    }
    f.amps = std::move(amps);
    factors_.push_back(std::move(f));
  }

  std::size_t num_qubits() const { return owners_.size(); }
  int owner(std::size_t qubit) const { return owners_[qubit]; }
  bool is_consumed(std::size_t qubit) const { return consumed_[qubit]; }

  // Exact Z-basis probability of reading 0 on `qubit` (diagnostic, no collapse).
  double marginal_prob0(std::size_t qubit) const {
    const Factor& f = factors_[factor_of_[qubit]];
    std::size_t local = local_index(f, qubit);
    double p = 0.0;
    for (std::size_t idx = 0; idx < f.amps.size(); ++idx) {
      bool bit = (idx >> (f.qubits.size() - 1 - local)) & 1;
      if (!bit) p += std::norm(f.amps[idx]);
    }
    return p;
  }

  double norm_squared() const {
    double worst = 1.0;
    for (const Factor& f : factors_) {
      if (f.amps.empty()) continue;
      double s = 0.0;
      for (const cd& a : f.amps) s += std::norm(a);
      if (std::abs(s - 1.0) > std::abs(worst - 1.0)) worst = s;
    }
    return worst;
  }

  bool norm_ok(double tol = 1e-10) const { return std::abs(norm_squared() - 1.0) <= tol; }

  int measure(const MeasurementRequest& req, RngStream& rng) {
    require(req.qubit < num_qubits(), errc::input_error, "qubit index out of range");
    if (owners_[req.qubit] != req.requester)
      fail(errc::non_signaling_violation,
           "device " + std::to_string(req.requester) + " measured qubit owned by device " +
               std::to_string(owners_[req.qubit]));
    require(!consumed_[req.qubit], errc::protocol_error, "qubit already measured");

    Factor& f = factors_[factor_of_[req.qubit]];
    std::size_t local = local_index(f, req.qubit);
    double half = req.angle / 2.0;
    cd u[2][2] = {{std::cos(half), std::sin(half)},     // outcome 0: +1 eigenvector
                  {-std::sin(half), std::cos(half)}};   // outcome 1

    std::size_t nq = f.qubits.size();
    std::size_t rest = f.amps.size() >> 1;
    std::vector<cd> c0(rest), c1(rest);
    double p0 = 0.0, p1 = 0.0;
    for (std::size_t r = 0; r < rest; ++r) {
      std::size_t i0 = insert_bit(r, nq - 1 - local, 0);
      std::size_t i1 = insert_bit(r, nq - 1 - local, 1);
      c0[r] = std::conj(u[0][0]) * f.amps[i0] + std::conj(u[0][1]) * f.amps[i1];
      c1[r] = std::conj(u[1][0]) * f.amps[i0] + std::conj(u[1][1]) * f.amps[i1];
      p0 += std::norm(c0[r]);
      p1 += std::norm(c1[r]);
    }
    int outcome = rng.next_double() < p0 / (p0 + p1) ? 0 : 1;
    const std::vector<cd>& kept = outcome == 0 ? c0 : c1;
    double p = outcome == 0 ? p0 : p1;
    double scale = 1.0 / std::sqrt(p);

    consumed_[req.qubit] = true;
    if (nq == 1) {
      f.amps.clear();
      f.qubits.clear();
    } else {
      Factor reduced;
      reduced.qubits = f.qubits;
      reduced.qubits.erase(reduced.qubits.begin() + static_cast<std::ptrdiff_t>(local));
      reduced.amps.resize(rest);
      for (std::size_t r = 0; r < rest; ++r) reduced.amps[r] = kept[r] * scale;
      for (std::size_t q : reduced.qubits) factor_of_[q] = factor_of_[req.qubit];
      f = std::move(reduced);
    }
    return outcome;
  }

  void depolarize(std::size_t qubit, double p, RngStream& rng) {
    require(p >= 0.0 && p <= 1.0, errc::invalid_probability, "depolarize needs p in [0,1]");
    require(qubit < num_qubits() && !consumed_[qubit], errc::protocol_error,
            "depolarize on a consumed or missing qubit");
    if (p == 0.0 || rng.next_double() >= p) return;
    apply_pauli(qubit, rng.next_below(4));  // uniform over I, X, Y, Z
  }

 private:
  struct Factor {
    std::vector<std::size_t> qubits;  // global ids, position = significance (MSB first)
    std::vector<cd> amps;
  };

  static std::size_t local_index(const Factor& f, std::size_t qubit) {
    for (std::size_t i = 0; i < f.qubits.size(); ++i)
      if (f.qubits[i] == qubit) return i;
    fail(errc::input_error, "qubit not in factor");
  }

  static std::size_t insert_bit(std::size_t rest, std::size_t pos, std::size_t bit) {
    std::size_t low = rest & ((1u << pos) - 1);
    std::size_t high = rest >> pos;
    return (high << (pos + 1)) | (bit << pos) | low;
  }

  void apply_pauli(std::size_t qubit, std::uint64_t which) {
    if (which == 0) return;  // I
    Factor& f = factors_[factor_of_[qubit]];
    std::size_t local = local_index(f, qubit);
    std::size_t pos = f.qubits.size() - 1 - local;
    std::size_t rest = f.amps.size() >> 1;
    for (std::size_t r = 0; r < rest; ++r) {
      std::size_t i0 = insert_bit(r, pos, 0);
      std::size_t i1 = insert_bit(r, pos, 1);
      cd a0 = f.amps[i0], a1 = f.amps[i1];
      if (which == 1) {  // X
        f.amps[i0] = a1;
        f.amps[i1] = a0;
      } else if (which == 2) {  // Y
        f.amps[i0] = cd(0, -1) * a1;
        f.amps[i1] = cd(0, 1) * a0;
      } else {  // Z
        f.amps[i1] = -a1;
      }
    }
  }

  std::vector<Factor> factors_;
  std::vector<int> owners_;
  std::vector<bool> consumed_;
  std::vector<std::size_t> factor_of_;
};

// Single authority over all registers; measurement requests are serialized in
// call order, which in deterministic mode is the protocol round order.
class QuantumBackend {
 public:
  explicit QuantumBackend(std::size_t register_cap_qubits = 20)
      : register_cap_(register_cap_qubits) {}

  QuantumRegister& allocate_epr_pairs(std::size_t count, int owner_a, int owner_b) {
    require(count >= 1, errc::invalid_input, "need at least one EPR pair");
    require(2 * count <= register_cap_, errc::capacity_error,
            "register capacity exceeded: " + std::to_string(2 * count) + " qubits > cap " +
                std::to_string(register_cap_));
    registers_.push_back(std::make_unique<QuantumRegister>(2 * count, owner_a, owner_b));
    return *registers_.back();
  }

  int measure(QuantumRegister& reg, const MeasurementRequest& req, RngStream& rng) {
    try {
      return reg.measure(req, rng);
    } catch (const error& e) {
      if (e.code() == errc::non_signaling_violation) violations_.push_back(e.what());
      throw;
    }
  }

  void depolarize(QuantumRegister& reg, std::size_t qubit, double p, RngStream& rng) {
    reg.depolarize(qubit, p, rng);
  }

  std::size_t register_cap() const { return register_cap_; }
  const std::vector<std::string>& violations() const { return violations_; }
  std::size_t registers_allocated() const { return registers_.size(); }

 private:
  std::size_t register_cap_;
  std::vector<std::unique_ptr<QuantumRegister>> registers_;
  std::vector<std::string> violations_;
};

}  // namespace certirand
