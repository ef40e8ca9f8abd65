#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "certirand/bitstring.hpp"
#include "certirand/errors.hpp"

namespace certirand {

namespace gf {

// Small Galois field GF(p^k), q <= 64, with precomputed tables. Elements are
// encoded as base-p digit vectors packed into an integer in [0, q).
class Field {
 public:
  explicit Field(std::uint64_t q) : q_(q) {
    std::uint64_t p = smallest_prime_factor(q);
    std::uint64_t k = 0, t = q;
    while (t > 1) {
      require(t % p == 0, errc::config_error, std::to_string(q) + " is not a prime power");
      t /= p;
      ++k;
    }
    p_ = p;
    k_ = k;
    require(q <= 64, errc::config_error, "field size above 64 not supported");
    build_tables();
  }

  static bool is_prime_power(std::uint64_t q) {
    if (q < 2) return false;
    std::uint64_t p = smallest_prime_factor(q);
    while (q % p == 0) q /= p;
    return q == 1;
  }

  std::uint64_t size() const { return q_; }
  std::uint64_t add(std::uint64_t a, std::uint64_t b) const { return add_[a * q_ + b]; }
  std::uint64_t mul(std::uint64_t a, std::uint64_t b) const { return mul_[a * q_ + b]; }

  // Horner evaluation of a polynomial given by coefficients (constant first).
  std::uint64_t eval(const std::vector<std::uint64_t>& coeffs, std::uint64_t x) const {
    std::uint64_t acc = 0;
    for (std::size_t i = coeffs.size(); i-- > 0;) acc = add(mul(acc, x), coeffs[i]);
    return acc;
  }

 private:
  static std::uint64_t smallest_prime_factor(std::uint64_t n) {
    for (std::uint64_t d = 2; d * d <= n; ++d)
      if (n % d == 0) return d;
    return n;
  }

  std::vector<std::uint64_t> digits(std::uint64_t v) const {
    std::vector<std::uint64_t> d(k_);
    for (std::uint64_t i = 0; i < k_; ++i) {
      d[i] = v % p_;
      v /= p_;
    }
    return d;
  }

  std::uint64_t pack(const std::vector<std::uint64_t>& d) const {
    std::uint64_t v = 0;
    for (std::size_t i = d.size(); i-- > 0;) v = v * p_ + d[i];
    return v;
  }

  // Monic irreducible polynomials used for the extension fields we support,
  // packed like field elements but with k+1 digits.
  std::uint64_t irreducible() const {
    static const std::map<std::pair<std::uint64_t, std::uint64_t>, std::uint64_t> table = {
        {{2, 2}, 0b111}, {{2, 3}, 0b1011}, {{2, 4}, 0b10011}, {{2, 5}, 0b100101},
        {{2, 6}, 0b1000011},
        {{3, 2}, 10},   // x^2 + 1
        {{3, 3}, 34},   // x^3 + 2x + 1
        {{5, 2}, 31},   // x^2 + x + 1
        {{7, 2}, 59},   // x^2 + x + 3
    };
    auto it = table.find({p_, k_});
    require(it != table.end(), errc::config_error,
            "no irreducible polynomial registered for GF(" + std::to_string(q_) + ")");
    return it->second;
  }

  void build_tables() {
    add_.resize(q_ * q_);
    mul_.resize(q_ * q_);
    std::vector<std::uint64_t> irred;
    if (k_ > 1) {
      std::uint64_t enc = irreducible();
      for (std::uint64_t i = 0; i <= k_; ++i) {
        irred.push_back(enc % p_);
        enc /= p_;
      }
    }
    for (std::uint64_t a = 0; a < q_; ++a) {
      auto da = digits(a);
      for (std::uint64_t b = 0; b < q_; ++b) {
        auto db = digits(b);
        std::vector<std::uint64_t> s(k_);
        for (std::uint64_t i = 0; i < k_; ++i) s[i] = (da[i] + db[i]) % p_;
        add_[a * q_ + b] = pack(s);

        std::vector<std::uint64_t> prod(2 * k_ - 1, 0);
        for (std::uint64_t i = 0; i < k_; ++i)
          for (std::uint64_t j = 0; j < k_; ++j) prod[i + j] = (prod[i + j] + da[i] * db[j]) % p_;
        if (k_ > 1) {
          for (std::size_t deg = prod.size(); deg-- > k_;) {
            std::uint64_t coef = prod[deg];
            if (coef == 0) continue;
            prod[deg] = 0;
            // subtract coef * x^(deg-k) * irred
            for (std::uint64_t i = 0; i <= k_; ++i) {
              std::uint64_t idx = deg - k_ + i;
              prod[idx] = (prod[idx] + coef * (p_ - irred[i] % p_)) % p_;
            }
          }
        } else {
          prod[0] %= p_;
        }
        prod.resize(k_);
        mul_[a * q_ + b] = pack(prod);
      }
    }
  }

  std::uint64_t q_, p_ = 2, k_ = 1;
  std::vector<std::uint64_t> add_, mul_;
};

}  // namespace gf

// Polynomial-evaluation weak design: set i is the graph {(a, p_i(a))} of the
// i-th degree-<c polynomial over GF(t_w), flattened into a universe of t_w^2
// seed-bit positions. Proper designs keep c <= t_w so sets are distinct and
// overlaps at most c-1; the degenerate fallback (c > t_w) repeats sets and is
// only for flagged test-scale runs.
struct WeakDesign {
  std::uint64_t num_sets = 0;   // r
  std::uint64_t set_size = 0;   // t_w = q
  std::uint64_t universe = 0;   // d = q^2
  std::uint64_t degree = 0;     // c
  bool degenerate = false;
  double overlap_bound = 0.0;
  std::vector<std::vector<std::uint32_t>> sets;
};

inline std::uint64_t design_degree_for(std::uint64_t r, std::uint64_t q) {
  std::uint64_t c = 1;
  unsigned __int128 cap = q;
  while (cap < r) {
    cap *= q;
    ++c;
    require(c <= 64, errc::config_error, "design degree overflow");
  }
  return c;
}

inline double measured_overlap_bound(const std::vector<std::vector<std::uint32_t>>& sets,
                                     std::size_t upto) {
  double worst = 1.0;
  for (std::size_t i = 1; i < std::min(sets.size(), upto); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < i; ++j) {
      std::size_t inter = 0;
      for (std::uint32_t v : sets[i])
        inter += static_cast<std::size_t>(
            std::find(sets[j].begin(), sets[j].end(), v) != sets[j].end());
      sum += std::exp2(static_cast<double>(inter));
    }
    worst = std::max(worst, sum / static_cast<double>(i));
  }
  return worst;
}

inline WeakDesign build_weak_design(std::uint64_t r, std::uint64_t t_w,
                                    bool allow_degenerate = false) {
  require(t_w >= 2 && gf::Field::is_prime_power(t_w), errc::config_error,
          "set size must be a prime power >= 2, got " + std::to_string(t_w));
  require(r >= 1, errc::config_error, "design needs at least one set");
  gf::Field field(t_w);
  WeakDesign design;
  design.num_sets = r;
  design.set_size = t_w;
  design.universe = t_w * t_w;
  design.degree = design_degree_for(r, t_w);
  design.degenerate = design.degree > t_w;
  if (design.degenerate && !allow_degenerate)
    fail(errc::config_error, "design capacity exceeded: " + std::to_string(r) +
                                 " sets need degree " + std::to_string(design.degree) +
                                 " > field size " + std::to_string(t_w));

  design.sets.resize(r);
  std::vector<std::uint64_t> coeffs(design.degree, 0);
  for (std::uint64_t i = 0; i < r; ++i) {
    std::vector<std::uint32_t>& set = design.sets[i];
    set.resize(t_w);
    for (std::uint64_t a = 0; a < t_w; ++a)
      set[a] = static_cast<std::uint32_t>(a * t_w + field.eval(coeffs, a));
    // next polynomial: increment the coefficient vector base-q
    for (std::uint64_t pos = 0; pos < design.degree; ++pos) {
      if (++coeffs[pos] < t_w) break;
      coeffs[pos] = 0;
    }
  }
  design.overlap_bound = design.degenerate
                             ? measured_overlap_bound(design.sets, 256)
                             : std::exp2(static_cast<double>(design.degree - 1));
  // direct intersection-counting verification at small sizes
  if (r <= 64) {
    for (std::size_t i = 1; i < design.sets.size(); ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        std::size_t inter = 0;
        for (std::uint32_t v : design.sets[i])
          inter += static_cast<std::size_t>(
              std::find(design.sets[j].begin(), design.sets[j].end(), v) != design.sets[j].end());
        sum += std::exp2(static_cast<double>(inter));
      }
      require(sum <= design.overlap_bound * static_cast<double>(i) * (1.0 + 1e-12),
              errc::config_error, "weak design overlap verification failed");
    }
  }
  return design;
}

enum class OneBitMode { parity_of_selected, rs_hadamard };

namespace detail {

// Carry-less multiply mod a fixed irreducible, for GF(2^l) with l <= 16.
inline std::uint32_t gf2m_irreducible(unsigned l) {
  static const std::uint32_t polys[17] = {0,      0x3,    0x7,    0xB,   0x13,  0x25,
                                          0x43,   0x89,   0x11D,  0x211, 0x409, 0x805,
                                          0x1053, 0x201B, 0x4143, 0x8003, 0x1100B};
  require(l >= 1 && l <= 16, errc::config_error, "GF(2^l) supported for 1 <= l <= 16");
  return polys[l];
}

inline std::uint32_t gf2m_mul(std::uint32_t a, std::uint32_t b, unsigned l) {
  std::uint32_t irred = gf2m_irreducible(l) & ((1u << l) - 1);  // without the leading term
  std::uint32_t acc = 0;
  for (unsigned i = 0; i < l; ++i) {
    if ((b >> i) & 1) acc ^= a;
    bool carry = (a >> (l - 1)) & 1;
    a = (a << 1) & ((1u << l) - 1);
    if (carry) a ^= irred;
  }
  return acc;
}

}  // namespace detail

// One output bit from source x and the seed chunk y of one design set.
//
// parity_of_selected: inner product of the identity-coded source with a mask
// over the rank-th |y|-bit block of the codeword, cyclically extended; the
// chunk bits gate the block positions and the empty selection is promoted to
// the full block so every seed value induces a nonzero functional.
//
// rs_hadamard: bit of the Reed-Solomon-then-Hadamard encoding of x at position
// y; the Hadamard mask is forced odd (2h+1) for the same reason.
inline int one_bit_extract(const BitString& x, const BitString& y, OneBitMode mode,
                           std::size_t rank = 0) {
  require(x.size() >= 1 && y.size() >= 1, errc::input_error, "empty source or chunk");
  if (mode == OneBitMode::parity_of_selected) {
    std::size_t t_w = y.size();
    std::size_t n = x.size();
    std::size_t base = (rank * t_w) % n;
    bool any = false;
    int acc = 0;
    for (std::size_t j = 0; j < t_w; ++j)
      if (y.get(j)) {
        any = true;
        acc ^= static_cast<int>(x.get((base + j) % n));
      }
    if (!any)
      for (std::size_t j = 0; j < t_w; ++j) acc ^= static_cast<int>(x.get((base + j) % n));
    return acc;
  }

  // rs_hadamard
  std::size_t t_w = y.size();
  require(t_w >= 2, errc::input_error, "rs_hadamard chunk needs at least 2 bits");
  unsigned a_bits = static_cast<unsigned>(t_w / 2);
  unsigned l = static_cast<unsigned>(t_w - a_bits) + 1;
  require(l <= 16, errc::input_error, "rs_hadamard chunk too wide");
  std::uint32_t m = static_cast<std::uint32_t>(y.uint_at(0, a_bits));
  std::uint32_t h = static_cast<std::uint32_t>(y.uint_at(a_bits, t_w - a_bits));
  std::uint32_t mask = (h << 1) | 1u;

  std::size_t k = (x.size() + l - 1) / l;
  require(k <= (1u << l), errc::input_error,
          "source too long for rs_hadamard at this chunk width (RS degree bound)");
  // Horner over GF(2^l); coefficients are consecutive l-bit chunks of x, the
  // final partial chunk low-aligned so its low bit always reaches the odd mask
  std::uint32_t acc = 0;
  std::uint32_t point = m & ((1u << l) - 1);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t start = c * l;
    std::size_t take = std::min<std::size_t>(l, x.size() - start);
    std::uint32_t sym = static_cast<std::uint32_t>(x.uint_at(start, take));
    acc = detail::gf2m_mul(acc, point, l) ^ sym;
  }
  return std::popcount(acc & mask) & 1;
}

struct ExtractorSpec {
  std::size_t n = 0;
  std::size_t r = 0;
  double epsilon = 0.0;
  std::size_t d = 0;
  WeakDesign design;
  OneBitMode one_bit = OneBitMode::parity_of_selected;
  double c0 = 1.0;          // implementation constant in the seed-length envelope
  std::size_t envelope_d = 0;  // c0 * ceil(log2(n/eps))^2 * ceil(log2(max(r,2)))
  bool within_envelope = false;
  bool degenerate = false;
};

struct SolveOptions {
  std::optional<std::size_t> max_seed_bits;
  bool allow_degenerate = false;
  OneBitMode one_bit = OneBitMode::parity_of_selected;
};

inline ExtractorSpec solve_spec(std::size_t n, std::size_t r, double epsilon,
                                const SolveOptions& opts = {}) {
  require(r >= 1, errc::config_error, "need at least one output bit");
  require(epsilon > 0.0 && epsilon < 1.0, errc::config_error, "epsilon must lie in (0,1)");
  require(n >= 1, errc::config_error, "need a nonempty source");

  static const std::uint64_t prime_powers[] = {2,  3,  4,  5,  7,  8,  9,  11, 13, 16,
                                               17, 19, 23, 25, 27, 29, 31, 32, 37, 41,
                                               43, 47, 49, 53, 59, 61, 64};
  std::optional<std::uint64_t> chosen;
  for (std::uint64_t q : prime_powers) {
    if (opts.max_seed_bits && q * q > *opts.max_seed_bits) break;
    if (design_degree_for(r, q) <= q) {
      chosen = q;
      break;
    }
  }
  bool degenerate = false;
  if (!chosen && opts.allow_degenerate) {
    // largest field whose universe fits the budget; sets will repeat
    for (std::uint64_t q : prime_powers) {
      if (opts.max_seed_bits && q * q > *opts.max_seed_bits) break;
      chosen = q;
    }
    degenerate = chosen.has_value();
  }
  if (!chosen)
    fail(errc::config_error,
         "no weak design fits: r = " + std::to_string(r) +
             (opts.max_seed_bits ? " within seed budget " + std::to_string(*opts.max_seed_bits)
                                 : " within supported field sizes"));

  ExtractorSpec spec;
  spec.n = n;
  spec.r = r;
  spec.epsilon = epsilon;
  spec.one_bit = opts.one_bit;
  spec.design = build_weak_design(r, *chosen, degenerate);
  spec.d = spec.design.universe;
  spec.degenerate = spec.design.degenerate;
  double log_ne = std::ceil(std::log2(static_cast<double>(n) / epsilon));
  double log_r = std::ceil(std::log2(static_cast<double>(std::max<std::size_t>(r, 2))));
  spec.envelope_d = static_cast<std::size_t>(spec.c0 * log_ne * log_ne * log_r);
  spec.within_envelope = spec.d <= spec.envelope_d;
  return spec;
}

// Surfaced min-entropy budget check: h >= r + c1 log2 r + c2 log2(1/eps).
inline bool entropy_budget_ok(double h, std::size_t r, double epsilon, double c1 = 1.0,
                              double c2 = 1.0) {
  double need = static_cast<double>(r) + c1 * std::log2(static_cast<double>(std::max<std::size_t>(r, 2))) +
                c2 * std::log2(1.0 / epsilon);
  return h >= need;
}

inline BitString extract(const BitString& x, const BitString& seed, const ExtractorSpec& spec) {
  require(x.size() == spec.n, errc::input_error,
          "source length " + std::to_string(x.size()) + " != spec n " + std::to_string(spec.n));
  require(seed.size() == spec.d, errc::input_error,
          "seed length " + std::to_string(seed.size()) + " != spec d " + std::to_string(spec.d));
  BitString out(spec.r);
  BitString chunk(spec.design.set_size);
  for (std::size_t i = 0; i < spec.r; ++i) {
    const auto& set = spec.design.sets[i];
    for (std::size_t j = 0; j < set.size(); ++j) chunk.set(j, seed.get(set[j]));
    out.set(i, one_bit_extract(x, chunk, spec.one_bit, i));
  }
  return out;
}

}  // namespace certirand
