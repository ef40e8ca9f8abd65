#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "certirand/errors.hpp"
#include "certirand/rng.hpp"

namespace certirand {

namespace qi {

using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

struct Factor {
  std::string label;
  int dim = 1;
};

// Density matrix over a labeled tensor factorization; factor 0 is the most
// significant index digit.
struct DensityMatrix {
  std::vector<Factor> factors;
  Mat m;

  int dim() const {
    int d = 1;
    for (const Factor& f : factors) d *= f.dim;
    return d;
  }

  int factor_index(const std::string& label) const {
    for (std::size_t i = 0; i < factors.size(); ++i)
      if (factors[i].label == label) return static_cast<int>(i);
    fail(errc::label_not_found, "no factor labeled " + label);
  }

  void validate(double tol = 1e-10) const {
    require(m.rows() == dim() && m.cols() == dim(), errc::dim_mismatch,
            "matrix size does not match factor dims");
    require((m - m.adjoint()).cwiseAbs().maxCoeff() <= tol, errc::input_error,
            "matrix is not Hermitian");
    require(std::abs(m.trace().real() - 1.0) <= tol && std::abs(m.trace().imag()) <= tol,
            errc::input_error, "trace is not 1");
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    require(es.eigenvalues().minCoeff() >= -tol, errc::input_error,
            "matrix has a negative eigenvalue");
  }

  static DensityMatrix pure(std::vector<Factor> factors, const Vec& psi) {
    DensityMatrix dm;
    dm.factors = std::move(factors);
    require(psi.size() == dm.dim(), errc::dim_mismatch, "state vector size mismatch");
    Vec normed = psi / psi.norm();
    dm.m = normed * normed.adjoint();
    return dm;
  }

  static DensityMatrix uniform(std::vector<Factor> factors) {
    DensityMatrix dm;
    dm.factors = std::move(factors);
    int d = dm.dim();
    dm.m = Mat::Identity(d, d) / static_cast<double>(d);
    return dm;
  }
};

inline DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
  DensityMatrix out;
  out.factors = a.factors;
  out.factors.insert(out.factors.end(), b.factors.begin(), b.factors.end());
  int da = a.dim(), db = b.dim();
  out.m = Mat(da * db, da * db);
  for (int i = 0; i < da; ++i)
    for (int j = 0; j < da; ++j) out.m.block(i * db, j * db, db, db) = a.m(i, j) * b.m;
  return out;
}

namespace detail {

inline std::vector<int> strides(const std::vector<Factor>& factors) {
  std::vector<int> s(factors.size());
  int acc = 1;
  for (std::size_t i = factors.size(); i-- > 0;) {
    s[i] = acc;
    acc *= factors[i].dim;
  }
  return s;
}

}  // namespace detail

// Partial trace keeping the listed factor positions (in their original order).
inline DensityMatrix partial_trace_keep(const DensityMatrix& dm, const std::vector<int>& keep) {
  std::vector<int> drop;
  for (int i = 0; i < static_cast<int>(dm.factors.size()); ++i)
    if (std::find(keep.begin(), keep.end(), i) == keep.end()) drop.push_back(i);

  DensityMatrix out;
  for (int i : keep) out.factors.push_back(dm.factors[static_cast<std::size_t>(i)]);
  int dk = out.dim();
  int dd = 1;
  for (int i : drop) dd *= dm.factors[static_cast<std::size_t>(i)].dim;
  auto st = detail::strides(dm.factors);

  auto full_index = [&](int kept_idx, int drop_idx) {
    int idx = 0;
    int rk = kept_idx;
    for (std::size_t p = keep.size(); p-- > 0;) {
      int d = dm.factors[static_cast<std::size_t>(keep[p])].dim;
      idx += (rk % d) * st[static_cast<std::size_t>(keep[p])];
      rk /= d;
    }
    int rd = drop_idx;
    for (std::size_t p = drop.size(); p-- > 0;) {
      int d = dm.factors[static_cast<std::size_t>(drop[p])].dim;
      idx += (rd % d) * st[static_cast<std::size_t>(drop[p])];
      rd /= d;
    }
    return idx;
  };

  out.m = Mat::Zero(dk, dk);
  for (int i = 0; i < dk; ++i)
    for (int j = 0; j < dk; ++j) {
      std::complex<double> sum = 0.0;
      for (int t = 0; t < dd; ++t) sum += dm.m(full_index(i, t), full_index(j, t));
      out.m(i, j) = sum;
    }
  return out;
}

inline DensityMatrix partial_trace_keep_labels(const DensityMatrix& dm,
                                               const std::vector<std::string>& labels) {
  std::vector<int> keep;
  for (const std::string& l : labels) keep.push_back(dm.factor_index(l));
  std::sort(keep.begin(), keep.end());
  return partial_trace_keep(dm, keep);
}

// Half the Schatten 1-norm of (rho - sigma); the operational distinguishing
// advantage, in [0, 1].
inline double trace_norm_dist(const DensityMatrix& rho, const DensityMatrix& sigma) {
  require(rho.dim() == sigma.dim() && rho.factors.size() == sigma.factors.size(),
          errc::dim_mismatch, "trace distance needs matching factorizations");
  for (std::size_t i = 0; i < rho.factors.size(); ++i)
    require(rho.factors[i].dim == sigma.factors[i].dim, errc::dim_mismatch,
            "trace distance needs matching factor dims");
  Mat diff = rho.m - sigma.m;
  diff = (diff + diff.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(diff, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().sum() / 2.0;
}

// cq-state: block-diagonal in the computational basis of one classical factor.
struct CqState {
  DensityMatrix base;
  std::string classical_label;

  int classical_dim() const {
    return base.factors[static_cast<std::size_t>(base.factor_index(classical_label))].dim;
  }

  void validate(double tol = 1e-10) const {
    base.validate(tol);
    int xi = base.factor_index(classical_label);
    require(xi == 0, errc::input_error, "classical factor must be the leading factor");
    int k = classical_dim();
    int rest = base.dim() / k;
    for (int x = 0; x < k; ++x)
      for (int xp = 0; xp < k; ++xp) {
        if (x == xp) continue;
        require(base.m.block(x * rest, xp * rest, rest, rest).cwiseAbs().maxCoeff() <= tol,
                errc::input_error, "state is not classical on " + classical_label);
      }
  }

  // p_x and p_x * rho_E^x blocks
  std::vector<double> probabilities() const {
    int k = classical_dim(), rest = base.dim() / k;
    std::vector<double> p(static_cast<std::size_t>(k));
    for (int x = 0; x < k; ++x)
      p[static_cast<std::size_t>(x)] = base.m.block(x * rest, x * rest, rest, rest).trace().real();
    return p;
  }

  Mat weighted_block(int x) const {
    int k = classical_dim(), rest = base.dim() / k;
    return base.m.block(x * rest, x * rest, rest, rest);
  }
};

// || rho_XE - U_X (x) rho_E ||_tr, the Definition-2.1 security distance.
inline double security_distance(const CqState& state) {
  state.validate();
  int k = state.classical_dim();
  DensityMatrix rho_e = partial_trace_keep(state.base, {1});
  DensityMatrix ideal = tensor(DensityMatrix::uniform({{state.classical_label, k}}), rho_e);
  return trace_norm_dist(state.base, ideal);
}

inline double entropy_bits(const Mat& rho, double eig_floor = 1e-12) {
  Eigen::SelfAdjointEigenSolver<Mat> es(rho, Eigen::EigenvaluesOnly);
  double h = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    double lambda = es.eigenvalues()(i);
    if (lambda > eig_floor) h -= lambda * std::log2(lambda);  // 0 log 0 = 0
  }
  return h;
}

struct Entropies {
  double von_neumann = 0.0;   // H of the whole state
  double h_a = 0.0;           // H(A)
  double h_b = 0.0;           // H(B)
  double conditional = 0.0;   // H(A|B)
  double mutual_info = 0.0;   // I(A:B)
  std::optional<double> conditional_mutual_info;  // I(A:C|B) when C given
};

// All in bits; eigenvalues below 1e-12 contribute 0 log 0 = 0.
inline Entropies entropies(const DensityMatrix& dm, const std::vector<std::string>& a_labels,
                           const std::vector<std::string>& b_labels,
                           const std::vector<std::string>& c_labels = {}) {
  Entropies e;
  e.von_neumann = entropy_bits(dm.m);
  auto join = [](std::vector<std::string> x, const std::vector<std::string>& y) {
    x.insert(x.end(), y.begin(), y.end());
    return x;
  };
  double h_ab = entropy_bits(partial_trace_keep_labels(dm, join(a_labels, b_labels)).m);
  e.h_a = entropy_bits(partial_trace_keep_labels(dm, a_labels).m);
  e.h_b = entropy_bits(partial_trace_keep_labels(dm, b_labels).m);
  e.conditional = h_ab - e.h_b;
  e.mutual_info = e.h_a - e.conditional;
  if (!c_labels.empty()) {
    // I(A:C|B) = H(A|B) - H(A|BC)
    double h_abc = entropy_bits(partial_trace_keep_labels(dm, join(join(a_labels, b_labels), c_labels)).m);
    double h_bc = entropy_bits(partial_trace_keep_labels(dm, join(b_labels, c_labels)).m);
    e.conditional_mutual_info = e.conditional - (h_abc - h_bc);
  }
  return e;
}

struct MinEntropyResult {
  double p_guess = 0.0;     // achieved by the returned POVM (primal)
  double dual_value = 0.0;  // certified upper bound on the optimum
  double gap = 0.0;
  double h_min = 0.0;       // -log2(p_guess)
  int iterations = 0;
  bool converged = false;
};

// Optimal-measurement solver for p_guess = max_POVM sum_x tr(M_x p_x rho_E^x):
// Jezek-Rehacek-Fiurasek alternating updates with a spectral dual certificate
// (any Y >= R_x for all x gives tr(Y) >= optimum).
inline MinEntropyResult min_entropy_cq(const CqState& state, double gap_tol = 1e-6,
                                       int max_iter = 20000) {
  state.validate();
  int k = state.classical_dim();
  int de = state.base.dim() / k;
  require(de <= 8, errc::capacity_error, "conditional system dimension above 8");

  std::vector<Mat> r(static_cast<std::size_t>(k));
  for (int x = 0; x < k; ++x) {
    Mat b = state.weighted_block(x);
    r[static_cast<std::size_t>(x)] = (b + b.adjoint()) / 2.0;
  }

  MinEntropyResult res;
  if (de == 1) {
    double best = 0.0;
    for (const Mat& rx : r) best = std::max(best, rx(0, 0).real());
    res.p_guess = res.dual_value = best;
    res.h_min = -std::log2(best);
    res.converged = true;
    return res;
  }

  std::vector<Mat> povm(static_cast<std::size_t>(k),
                        Mat::Identity(de, de) / static_cast<double>(k));
  auto primal_of = [&]() {
    double p = 0.0;
    for (int x = 0; x < k; ++x)
      p += (r[static_cast<std::size_t>(x)] * povm[static_cast<std::size_t>(x)]).trace().real();
    return p;
  };
  auto dual_of = [&]() {
    Mat y = Mat::Zero(de, de);
    for (int x = 0; x < k; ++x) y += r[static_cast<std::size_t>(x)] * povm[static_cast<std::size_t>(x)];
    y = (y + y.adjoint()) / 2.0;
    double mu = 0.0;
    for (int x = 0; x < k; ++x) {
      Eigen::SelfAdjointEigenSolver<Mat> es(r[static_cast<std::size_t>(x)] - y,
                                            Eigen::EigenvaluesOnly);
      mu = std::max(mu, es.eigenvalues().maxCoeff());
    }
    return y.trace().real() + mu * de;
  };

  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    res.p_guess = primal_of();
    res.dual_value = dual_of();
    res.gap = res.dual_value - res.p_guess;
    if (res.gap < gap_tol) {
      res.converged = true;
      break;
    }
    Mat lambda = Mat::Zero(de, de);
    for (int x = 0; x < k; ++x) {
      const Mat& rx = r[static_cast<std::size_t>(x)];
      lambda += rx * povm[static_cast<std::size_t>(x)] * rx;
    }
    lambda = (lambda + lambda.adjoint()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(lambda);
    Eigen::VectorXd ev = es.eigenvalues();
    double floor = std::max(ev.maxCoeff(), 1e-300) * 1e-14;
    Eigen::VectorXd inv_sqrt(ev.size());
    for (int i = 0; i < ev.size(); ++i)
      inv_sqrt(i) = ev(i) > floor ? 1.0 / std::sqrt(ev(i)) : 0.0;
    Mat lam_is = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().adjoint();

    Mat total = Mat::Zero(de, de);
    for (int x = 0; x < k; ++x) {
      const Mat& rx = r[static_cast<std::size_t>(x)];
      povm[static_cast<std::size_t>(x)] =
          lam_is * rx * povm[static_cast<std::size_t>(x)] * rx * lam_is;
      total += povm[static_cast<std::size_t>(x)];
    }
    // redistribute any support deficit so the POVM stays complete
    Mat deficit = Mat::Identity(de, de) - total;
    for (int x = 0; x < k; ++x)
      povm[static_cast<std::size_t>(x)] += deficit / static_cast<double>(k);
  }
  res.h_min = -std::log2(std::max(res.p_guess, 1e-300));
  return res;
}

// Lower bound on the smoothed min-entropy: best H_min over a finite family of
// admissible mixes toward the ideal state. A bound, not the exact optimum.
inline double smoothed_min_entropy_lower_bound(const CqState& state, double eps,
                                               int grid = 8) {
  double dist = security_distance(state);
  double w_max = dist <= 1e-15 ? 1.0 : std::min(1.0, eps / dist);
  int k = state.classical_dim();
  DensityMatrix rho_e = partial_trace_keep(state.base, {1});
  DensityMatrix ideal = tensor(DensityMatrix::uniform({{state.classical_label, k}}), rho_e);
  double best = 0.0;
  for (int g = 0; g <= grid; ++g) {
    double w = w_max * static_cast<double>(g) / static_cast<double>(grid);
    CqState mixed;
    mixed.base.factors = state.base.factors;
    mixed.base.m = (1.0 - w) * state.base.m + w * ideal.m;
    mixed.classical_label = state.classical_label;
    best = std::max(best, min_entropy_cq(mixed).h_min);
  }
  return best;
}

struct InequalityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  std::string note;
};

// Fact 2.2(4): ||rho_AB - rho_A (x) rho_B||_tr^2 <= 2 I(A:B), I in bits (base
// two recorded; the bits constant 2 dominates the nats-form constant).
inline InequalityCheck check_pinsker(const DensityMatrix& dm,
                                     const std::vector<std::string>& a_labels,
                                     const std::vector<std::string>& b_labels,
                                     double tol = 1e-9) {
  InequalityCheck c;
  c.note = "base-2 mutual information";
  DensityMatrix rho_a = partial_trace_keep_labels(dm, a_labels);
  DensityMatrix rho_b = partial_trace_keep_labels(dm, b_labels);
  double dist = trace_norm_dist(dm, tensor(rho_a, rho_b));
  c.lhs = dist * dist;
  c.rhs = 2.0 * entropies(dm, a_labels, b_labels).mutual_info;
  c.holds = c.lhs <= c.rhs + tol;
  return c;
}

// Lemma B.1: for cq states rho, sigma on F (x) Q and an event E on F,
// ||rho|E - sigma|E|| <= ||rho - sigma|| / max(Pr_rho(E), Pr_sigma(E)).
inline InequalityCheck conditioning_bound_check(const CqState& rho, const CqState& sigma,
                                                const std::vector<int>& event,
                                                double tol = 1e-9) {
  rho.validate();
  sigma.validate();
  require(rho.base.dim() == sigma.base.dim() && rho.classical_dim() == sigma.classical_dim(),
          errc::dim_mismatch, "states must share a shape");
  require(!event.empty(), errc::invalid_input, "empty event");
  int k = rho.classical_dim();
  int rest = rho.base.dim() / k;

  auto prob = [&](const CqState& s) {
    double p = 0.0;
    for (int f : event) p += s.weighted_block(f).trace().real();
    return p;
  };
  double p_rho = prob(rho), p_sigma = prob(sigma);
  require(p_rho > 1e-12 || p_sigma > 1e-12, errc::input_error,
          "event has zero probability under both states");

  InequalityCheck c;
  double dist = trace_norm_dist(rho.base, sigma.base);
  c.rhs = dist / std::max(p_rho, p_sigma);
  if (p_rho <= 1e-12 || p_sigma <= 1e-12) {
    c.holds = true;
    c.note = "one_sided_zero_probability";
    return c;
  }
  auto conditioned = [&](const CqState& s, double p) {
    DensityMatrix out;
    out.factors = s.base.factors;
    out.m = Mat::Zero(s.base.dim(), s.base.dim());
    for (int f : event)
      out.m.block(f * rest, f * rest, rest, rest) = s.weighted_block(f) / p;
    return out;
  };
  c.lhs = trace_norm_dist(conditioned(rho, p_rho), conditioned(sigma, p_sigma));
  c.holds = c.lhs <= c.rhs + tol;
  return c;
}

namespace detail {

inline Mat matrix_sqrt(const Mat& a) {
  Mat h = (a + a.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace detail

struct FidelityTrickResult {
  DensityMatrix tau;          // cqq on A1 (x) A2 (x) B
  double marginal_error = 0.0;  // || tau_A1A2 - sigma_A1A2 ||_tr
  double distance = 0.0;        // || rho - tau ||_tr
  double certificate = 0.0;     // sqrt(eps) + slack
  bool certified = false;
};

// Lemma B.2 construction, step for step as the proof prescribes: purify both
// A-marginals, align the purifications with the Uhlmann unitary, carry sigma's
// purification through the isometry that maps rho's purification into the
// A(x)B(x)R space, trace out R, and dephase A1.
inline FidelityTrickResult fidelity_trick_construct(const DensityMatrix& rho_a1a2b,
                                                    const DensityMatrix& sigma_a1a2, double eps,
                                                    double slack = 1e-6) {
  require(rho_a1a2b.factors.size() == 3, errc::input_error, "rho must have factors A1, A2, B");
  require(sigma_a1a2.factors.size() == 2, errc::input_error, "sigma must have factors A1, A2");
  require(rho_a1a2b.dim() <= 64, errc::capacity_error, "total dimension above 64");
  int da1 = rho_a1a2b.factors[0].dim, da2 = rho_a1a2b.factors[1].dim;
  int db = rho_a1a2b.factors[2].dim;
  require(sigma_a1a2.factors[0].dim == da1 && sigma_a1a2.factors[1].dim == da2,
          errc::dim_mismatch, "sigma shape mismatch");
  int da = da1 * da2;

  DensityMatrix rho_a = partial_trace_keep(rho_a1a2b, {0, 1});
  require(trace_norm_dist(rho_a, sigma_a1a2) <= eps + 1e-9, errc::input_error,
          "precondition ||rho_A1A2 - sigma_A1A2|| <= eps violated");

  // Uhlmann pair: |psi> = vec(sqrt(rho_A)), |phi> = vec(sqrt(sigma_A) W) with
  // W the polar unitary maximizing <psi|phi> = tr(sqrt(rho) sqrt(sigma) W).
  Mat sr = detail::matrix_sqrt(rho_a.m);
  Mat ss = detail::matrix_sqrt(sigma_a1a2.m);
  Eigen::JacobiSVD<Mat> svd(sr * ss, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat w = svd.matrixV() * svd.matrixU().adjoint();
  Mat phi_mat = ss * w;  // |phi> = sum_ij (phi_mat)_ij |i>_A |j>_Q

  Vec psi(da * da), phi(da * da);
  for (int i = 0; i < da; ++i)
    for (int j = 0; j < da; ++j) {
      psi(i * da + j) = sr(i, j);
      phi(i * da + j) = phi_mat(i, j);
    }

  // |theta> = sum_k sqrt(l_k) |v_k>_{AB} |k>_R purifies rho_A1A2B; R is sized
  // so that dim(B)*dim(R) covers both the rank and dim(Q) = da.
  Eigen::SelfAdjointEigenSolver<Mat> es_ab(rho_a1a2b.m);
  int rank_ab = 0;
  for (int i = 0; i < es_ab.eigenvalues().size(); ++i)
    rank_ab += es_ab.eigenvalues()(i) > 1e-14;
  int dr = std::max(rank_ab, (da + db - 1) / db);
  int dbr = db * dr;
  Vec theta = Vec::Zero(da * dbr);
  {
    int slot = 0;
    for (int i = es_ab.eigenvalues().size() - 1; i >= 0; --i) {
      double lambda = es_ab.eigenvalues()(i);
      if (lambda < 1e-14) continue;
      for (int a = 0; a < da; ++a)
        for (int b = 0; b < db; ++b)
          theta(a * dbr + b * dr + slot) = std::sqrt(lambda) * es_ab.eigenvectors()(a * db + b, i);
      ++slot;
    }
  }

  // Both |psi> (in A(x)Q) and |theta> (in A(x)BR) purify rho_A, so their
  // Schmidt partners define an isometry V: Q -> BR with |theta> = (1(x)V)|psi>.
  Eigen::SelfAdjointEigenSolver<Mat> esa(rho_a.m);
  std::vector<Vec> q_cols, br_cols;
  for (int i = 0; i < da; ++i) {
    double lambda = esa.eigenvalues()(i);
    if (lambda < 1e-12) continue;
    Vec a_vec = esa.eigenvectors().col(i);
    Vec q = Vec::Zero(da), br = Vec::Zero(dbr);
    for (int a = 0; a < da; ++a) {
      for (int j = 0; j < da; ++j) q(j) += std::conj(a_vec(a)) * psi(a * da + j);
      for (int j = 0; j < dbr; ++j) br(j) += std::conj(a_vec(a)) * theta(a * dbr + j);
    }
    q_cols.push_back(q / std::sqrt(lambda));
    br_cols.push_back(br / std::sqrt(lambda));
  }
  // isometric extension to all of Q by Gram-Schmidt on both sides
  auto orthogonalize = [](const std::vector<Vec>& basis, const Vec& v) {
    Vec r = v;
    for (const Vec& b : basis) r -= b * (b.adjoint() * v)(0);
    return r;
  };
  for (int cand = 0; static_cast<int>(q_cols.size()) < da && cand < da; ++cand) {
    Vec q_new = orthogonalize(q_cols, Vec::Unit(da, cand));
    if (q_new.norm() < 1e-8) continue;
    q_new.normalize();
    for (int bc = 0; bc < dbr; ++bc) {
      Vec br_new = orthogonalize(br_cols, Vec::Unit(dbr, bc));
      if (br_new.norm() < 1e-8) continue;
      br_new.normalize();
      q_cols.push_back(q_new);
      br_cols.push_back(br_new);
      break;
    }
  }
  Mat v_iso = Mat::Zero(dbr, da);
  for (std::size_t i = 0; i < q_cols.size(); ++i) v_iso += br_cols[i] * q_cols[i].adjoint();

  // tau' = (1 (x) V) |phi><phi| (1 (x) V)^dagger, traced over R
  Vec tau_vec = Vec::Zero(da * dbr);
  for (int a = 0; a < da; ++a)
    for (int m = 0; m < dbr; ++m) {
      std::complex<double> acc = 0.0;
      for (int j = 0; j < da; ++j) acc += v_iso(m, j) * phi(a * da + j);
      tau_vec(a * dbr + m) = acc;
    }
  Mat tau_ab = Mat::Zero(da * db, da * db);
  for (int ab = 0; ab < da * db; ++ab)
    for (int ab2 = 0; ab2 < da * db; ++ab2) {
      std::complex<double> acc = 0.0;
      for (int rr = 0; rr < dr; ++rr)
        acc += tau_vec(ab * dr + rr) * std::conj(tau_vec(ab2 * dr + rr));
      tau_ab(ab, ab2) = acc;
    }

  // dephase A1 so the result is a cqq-state
  FidelityTrickResult out;
  out.tau.factors = {{"A1", da1}, {"A2", da2}, {"B", db}};
  out.tau.m = Mat::Zero(da * db, da * db);
  int rest = da2 * db;
  for (int x = 0; x < da1; ++x)
    out.tau.m.block(x * rest, x * rest, rest, rest) = tau_ab.block(x * rest, x * rest, rest, rest);

  DensityMatrix tau_marg = partial_trace_keep(out.tau, {0, 1});
  out.marginal_error = trace_norm_dist(tau_marg, sigma_a1a2);
  out.distance = trace_norm_dist(rho_a1a2b, out.tau);
  out.certificate = std::sqrt(std::max(eps, 0.0)) + slack;
  out.certified = out.marginal_error <= 1e-8 && out.distance <= out.certificate;
  return out;
}

// ---- random state generators -----------------------------------------------

inline std::complex<double> gaussian(RngStream& rng) {
  double u1 = std::max(rng.next_double(), 1e-300);
  double u2 = rng.next_double();
  double r = std::sqrt(-2.0 * std::log(u1));
  return {r * std::cos(2.0 * M_PI * u2), r * std::sin(2.0 * M_PI * u2)};
}

inline DensityMatrix random_density(RngStream& rng, std::vector<Factor> factors) {
  DensityMatrix dm;
  dm.factors = std::move(factors);
  int d = dm.dim();
  Mat g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = gaussian(rng);
  dm.m = g * g.adjoint();
  dm.m /= dm.m.trace().real();
  return dm;
}

inline CqState random_cq(RngStream& rng, const std::string& x_label, int k,
                         const std::string& e_label, int de) {
  std::vector<double> p(static_cast<std::size_t>(k));
  double total = 0.0;
  for (double& v : p) {
    v = -std::log(std::max(rng.next_double(), 1e-300));
    total += v;
  }
  CqState cq;
  cq.classical_label = x_label;
  cq.base.factors = {{x_label, k}, {e_label, de}};
  cq.base.m = Mat::Zero(k * de, k * de);
  for (int x = 0; x < k; ++x) {
    DensityMatrix block = random_density(rng, {{e_label, de}});
    cq.base.m.block(x * de, x * de, de, de) = (p[static_cast<std::size_t>(x)] / total) * block.m;
  }
  return cq;
}

// ---- plain-text complex matrix format ---------------------------------------
//
//   dims: A:2 B:2
//   (re,im) (re,im) ...
//
inline DensityMatrix parse_matrix_text(std::istream& in) {
  std::string head;
  std::getline(in, head);
  require(head.rfind("dims:", 0) == 0, errc::input_error, "matrix text must start with dims:");
  DensityMatrix dm;
  {
    std::istringstream hs(head.substr(5));
    std::string tok;
    while (hs >> tok) {
      auto colon = tok.find(':');
      require(colon != std::string::npos, errc::input_error, "bad dims token: " + tok);
      dm.factors.push_back({tok.substr(0, colon), std::stoi(tok.substr(colon + 1))});
    }
  }
  int d = dm.dim();
  dm.m = Mat(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      std::string tok;
      require(static_cast<bool>(in >> tok), errc::input_error, "matrix text truncated");
      require(tok.front() == '(' && tok.back() == ')', errc::input_error,
              "entries must look like (re,im)");
      auto comma = tok.find(',');
      dm.m(i, j) = {std::stod(tok.substr(1, comma - 1)),
                    std::stod(tok.substr(comma + 1, tok.size() - comma - 2))};
    }
  return dm;
}

inline std::string matrix_to_text(const DensityMatrix& dm) {
  std::ostringstream out;
  out << "dims:";
  for (const Factor& f : dm.factors) out << " " << f.label << ":" << f.dim;
  out << "\n";
  for (int i = 0; i < dm.dim(); ++i) {
    for (int j = 0; j < dm.dim(); ++j) {
      if (j) out << " ";
      out << "(" << dm.m(i, j).real() << "," << dm.m(i, j).imag() << ")";
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace qi
}  // namespace certirand
