#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "certirand/infotheory.hpp"
#include "certirand/rng.hpp"

namespace certirand {
namespace qi {

struct SuiteResult {
  std::string name;
  int trials = 0;
  int violations = 0;
  double worst_margin = 1e300;  // min over trials of (rhs - lhs) style slack
  bool passed() const { return violations == 0; }
};

inline SuiteResult pinsker_suite(int trials, RngStream rng, double tol = 1e-9, int dim = 2) {
  SuiteResult res{"pinsker", trials};
  for (int t = 0; t < trials; ++t) {
    DensityMatrix dm = random_density(rng, {{"A", dim}, {"B", dim}});
    InequalityCheck c = check_pinsker(dm, {"A"}, {"B"}, tol);
    res.violations += !c.holds;
    res.worst_margin = std::min(res.worst_margin, c.rhs - c.lhs);
  }
  return res;
}

inline SuiteResult chain_rule_suite(int trials, RngStream rng, double tol = 1e-9, int dim = 2) {
  SuiteResult res{"chain-rule", trials};
  for (int t = 0; t < trials; ++t) {
    DensityMatrix dm = random_density(rng, {{"A", dim}, {"B", dim}, {"C", dim}});
    Entropies joint = entropies(dm, {"A"}, {"B"}, {"C"});
    double i_a_bc = entropies(dm, {"A"}, {"B", "C"}).mutual_info;
    double err = std::abs(i_a_bc - (joint.mutual_info + *joint.conditional_mutual_info));
    res.violations += err > tol;
    res.worst_margin = std::min(res.worst_margin, tol - err);
  }
  return res;
}

inline SuiteResult conditioning_reduces_entropy_suite(int trials, RngStream rng,
                                                      double tol = 1e-9, int dim = 2) {
  SuiteResult res{"conditioning-reduces-entropy", trials};
  for (int t = 0; t < trials; ++t) {
    DensityMatrix dm = random_density(rng, {{"A", dim}, {"B", dim}});
    Entropies e = entropies(dm, {"A"}, {"B"});
    res.violations += e.conditional > e.h_a + tol;
    res.worst_margin = std::min(res.worst_margin, e.h_a - e.conditional);
  }
  return res;
}

inline SuiteResult data_processing_suite(int trials, RngStream rng, double tol = 1e-9,
                                         int dim = 2) {
  SuiteResult res{"data-processing", trials};
  for (int t = 0; t < trials; ++t) {
    DensityMatrix rho = random_density(rng, {{"A", dim}, {"B", dim}});
    DensityMatrix sigma = random_density(rng, {{"A", dim}, {"B", dim}});
    double full = trace_norm_dist(rho, sigma);
    double reduced =
        trace_norm_dist(partial_trace_keep(rho, {0}), partial_trace_keep(sigma, {0}));
    res.violations += reduced > full + tol;
    res.worst_margin = std::min(res.worst_margin, full - reduced);
  }
  return res;
}

inline SuiteResult lemma_b1_suite(int trials, RngStream rng, double tol = 1e-9) {
  SuiteResult res{"lemma-b1-conditioning", trials};
  for (int t = 0; t < trials; ++t) {
    CqState rho = random_cq(rng, "F", 2, "Q", 2);
    CqState sigma = random_cq(rng, "F", 2, "Q", 2);
    std::vector<int> event = {static_cast<int>(rng.next_below(2))};
    InequalityCheck c = conditioning_bound_check(rho, sigma, event, tol);
    res.violations += !c.holds;
    if (c.note.empty()) res.worst_margin = std::min(res.worst_margin, c.rhs - c.lhs);
  }
  return res;
}

inline SuiteResult lemma_b2_suite(int trials, RngStream rng) {
  SuiteResult res{"lemma-b2-construction", trials};
  for (int t = 0; t < trials; ++t) {
    // sigma: random cq on A1(2) x A2(2); rho: cqq whose A-marginal is a small
    // perturbation of sigma mixed with independent side information on B
    CqState sigma_cq = random_cq(rng, "A1", 2, "A2", 2);
    DensityMatrix sigma;
    sigma.factors = {{"A1", 2}, {"A2", 2}};
    sigma.m = sigma_cq.base.m;

    CqState noise_cq = random_cq(rng, "A1", 2, "A2", 2);
    DensityMatrix rho_b = random_density(rng, {{"B", 2}});
    double wmix = 0.02 * rng.next_double();
    DensityMatrix rho_a = sigma;
    rho_a.m = (1.0 - wmix) * sigma.m + wmix * noise_cq.base.m;
    DensityMatrix rho = tensor(rho_a, rho_b);

    double eps = trace_norm_dist(rho_a, sigma) + 1e-12;
    FidelityTrickResult r = fidelity_trick_construct(rho, sigma, eps);
    res.violations += !r.certified;
    res.worst_margin = std::min(res.worst_margin, r.certificate - r.distance);
  }
  return res;
}

// Proposition-5.6 shape at toy scale: a block of t = 4 classical bits as two
// sub-blocks of 2 bits next to a qubit E. States satisfying the hypothesis
// || rho_XE - U_t (x) rho_E || <= zeta are built by mixing the ideal state
// with cq noise; every sub-block must satisfy 2(sqrt(zeta) + t^(-1/8)).
inline SuiteResult prop56_suite(int trials, RngStream rng) {
  SuiteResult res{"prop-5.6-sub-blocks", trials};
  const double t_bits = 4.0;
  for (int t = 0; t < trials; ++t) {
    DensityMatrix rho_e = random_density(rng, {{"E", 2}});
    DensityMatrix ideal = tensor(
        tensor(DensityMatrix::uniform({{"X1", 4}}), DensityMatrix::uniform({{"X2", 4}})), rho_e);
    CqState noise = random_cq(rng, "X", 16, "E", 2);
    DensityMatrix noise_dm;
    noise_dm.factors = {{"X1", 4}, {"X2", 4}, {"E", 2}};
    noise_dm.m = noise.base.m;
    double wmix = 0.1 * rng.next_double();
    DensityMatrix rho;
    rho.factors = noise_dm.factors;
    rho.m = (1.0 - wmix) * ideal.m + wmix * noise_dm.m;

    DensityMatrix rho_e_actual = partial_trace_keep(rho, {2});
    DensityMatrix ideal_actual = tensor(
        tensor(DensityMatrix::uniform({{"X1", 4}}), DensityMatrix::uniform({{"X2", 4}})),
        rho_e_actual);
    double zeta = trace_norm_dist(rho, ideal_actual);
    double bound = 2.0 * (std::sqrt(zeta) + std::pow(t_bits, -1.0 / 8.0));

    for (int sub = 0; sub < 2; ++sub) {
      DensityMatrix sub_state = partial_trace_keep(rho, {sub, 2});
      DensityMatrix sub_ideal =
          tensor(DensityMatrix::uniform({{sub == 0 ? "X1" : "X2", 4}}), rho_e_actual);
      double dist = trace_norm_dist(sub_state, sub_ideal);
      res.violations += dist > bound;
      res.worst_margin = std::min(res.worst_margin, bound - dist);
    }
  }
  return res;
}

// dim sizes the per-factor dimension of the four generic suites; the B.1, B.2
// and Prop-5.6 constructions have fixed shapes.
inline std::vector<SuiteResult> run_lemma_suites(int trials, std::uint64_t seed, int dim = 2) {
  require(dim >= 2 && dim <= 4, errc::config_error, "suite factor dimension must be 2..4");
  std::vector<SuiteResult> out;
  out.push_back(pinsker_suite(trials, RngStream::derive(seed, "pinsker"), 1e-9, dim));
  out.push_back(chain_rule_suite(trials, RngStream::derive(seed, "chain"), 1e-9, dim));
  out.push_back(
      conditioning_reduces_entropy_suite(trials, RngStream::derive(seed, "cond"), 1e-9, dim));
  out.push_back(data_processing_suite(trials, RngStream::derive(seed, "dataproc"), 1e-9, dim));
  out.push_back(lemma_b1_suite(trials, RngStream::derive(seed, "b1")));
  out.push_back(lemma_b2_suite(trials, RngStream::derive(seed, "b2")));
  out.push_back(prop56_suite(trials, RngStream::derive(seed, "prop56")));
  return out;
}

}  // namespace qi
}  // namespace certirand
