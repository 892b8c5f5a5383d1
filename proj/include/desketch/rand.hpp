// Copyright 2026 The Desketch Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DESKETCH_RAND_HPP
#define DESKETCH_RAND_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace desketch {

// Seeded, reproducible randomness. A Seed is a 64-bit value plus the list of
// labels it was derived through; deriving with the same label twice gives the
// same child, distinct labels give streams that behave independently.
struct Seed {
  uint64_t value = 0x9e3779b97f4a7c15ULL;
  std::vector<std::string> lineage;

  Seed() = default;
  explicit Seed(uint64_t v) : value(v) {}
};

namespace detail {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t mix(uint64_t a, uint64_t b) {
  uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  return splitmix64(s);
}

inline uint64_t hash_str(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

inline Seed derive_seed(const Seed& parent, const std::string& label) {
  Seed child;
  child.value = detail::mix(parent.value, detail::hash_str(label));
  child.lineage = parent.lineage;
  child.lineage.push_back(label);
  return child;
}

// Counter-based generator: stateless function of (seed, counter), so any
// variate can be regenerated on demand.
class Rng {
 public:
  Rng() = default;
  explicit Rng(const Seed& seed) : state_(seed.value) {}
  explicit Rng(uint64_t raw) : state_(raw) {}

  uint64_t next_u64() { return detail::splitmix64(state_); }

  // Uniform in [0, 1), 53-bit resolution.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in {0, ..., n-1} without modulo bias worth caring about here.
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  double next_gaussian() {
    // Box-Muller; second variate discarded to stay counter-friendly.
    double u1 = next_unit_open();
    double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Strictly inside (0,1); clamps 2^-40 away from the endpoints.
  double next_unit_open() {
    double u = next_unit();
    const double lo = 0x1.0p-40;
    if (u < lo) u = lo;
    if (u > 1.0 - lo) u = 1.0 - lo;
    return u;
  }

 private:
  uint64_t state_ = 1;
};

// Degree-(k-1) polynomial over a prime field, reduced to a range. Evaluations
// at any k distinct points are jointly uniform over the field.
class KWiseHash {
 public:
  static constexpr uint64_t kMersenne61 = (uint64_t(1) << 61) - 1;

  KWiseHash() = default;

  KWiseHash(const Seed& seed, int k, uint64_t prime = kMersenne61)
      : prime_(prime) {
    if (k < 2) throw std::invalid_argument("KWiseHash: k must be >= 2");
    Rng rng(seed);
    coeffs_.resize(k);
    for (int i = 0; i < k; ++i) coeffs_[i] = rng.next_u64() % prime_;
    // Leading coefficient nonzero keeps the degree exact.
    if (coeffs_.back() == 0) coeffs_.back() = 1;
  }

  // All coefficient tuples over a tiny field, for enumeration tests.
  static KWiseHash from_coeffs(std::vector<uint64_t> cs, uint64_t prime) {
    KWiseHash h;
    h.prime_ = prime;
    h.coeffs_ = std::move(cs);
    return h;
  }

  uint64_t prime() const { return prime_; }
  int degree_bound() const { return static_cast<int>(coeffs_.size()); }

  // Horner evaluation mod prime.
  uint64_t eval(uint64_t x) const {
    x %= prime_;
    uint64_t acc = 0;
    for (size_t i = coeffs_.size(); i-- > 0;) {
      acc = mulmod(acc, x);
      acc += coeffs_[i];
      if (acc >= prime_) acc -= prime_;
    }
    return acc;
  }

  // Value reduced to [0, range).
  uint64_t bucket(uint64_t x, uint64_t range) const { return eval(x) % range; }

  int sign(uint64_t x) const { return (eval(x) & 1) ? +1 : -1; }

  // One evaluation serving a (bucket, sign) pair: bucket from the low part,
  // sign from a disjoint bit.
  std::pair<uint32_t, int> bucket_sign(uint64_t x, uint32_t range) const {
    uint64_t v = eval(x);
    uint32_t b = static_cast<uint32_t>(v % range);
    int s = ((v / range) & 1) ? +1 : -1;
    return {b, s};
  }

 private:
  uint64_t mulmod(uint64_t a, uint64_t b) const {
    if (prime_ == kMersenne61) {
      __uint128_t p = static_cast<__uint128_t>(a) * b;
      uint64_t lo = static_cast<uint64_t>(p & kMersenne61);
      uint64_t hi = static_cast<uint64_t>(p >> 61);
      uint64_t r = lo + hi;
      if (r >= kMersenne61) r -= kMersenne61;
      return r;
    }
    return static_cast<uint64_t>((static_cast<__uint128_t>(a) * b) % prime_);
  }

  uint64_t prime_ = kMersenne61;
  std::vector<uint64_t> coeffs_;
};

// GF(2^r) polynomial hash. Same k-wise independence as the prime-field
// version, but the field has even order, so a single extracted bit is an
// exactly unbiased sign. Used where tests enumerate the full family.
class BinaryFieldHash {
 public:
  // Irreducible polynomials (low bits) for GF(2^r), r = 1..16.
  static uint32_t modulus_for(int r) {
    static const uint32_t kMods[17] = {0,      0x3,    0x7,    0xb,   0x13,
                                       0x25,   0x43,   0x83,   0x11d, 0x211,
                                       0x409,  0x805,  0x1053, 0x201b, 0x402b,
                                       0x8003, 0x1002d};
    return kMods[r];
  }

  BinaryFieldHash(int r, std::vector<uint32_t> coeffs)
      : r_(r), coeffs_(std::move(coeffs)) {}

  BinaryFieldHash(const Seed& seed, int k, int r) : r_(r) {
    Rng rng(seed);
    coeffs_.resize(k);
    for (int i = 0; i < k; ++i)
      coeffs_[i] = static_cast<uint32_t>(rng.next_u64() & ((1u << r) - 1));
  }

  uint32_t eval(uint32_t x) const {
    x &= (1u << r_) - 1;
    uint32_t acc = 0;
    for (size_t i = coeffs_.size(); i-- > 0;) {
      acc = gf_mul(acc, x);
      acc ^= coeffs_[i];
    }
    return acc;
  }

  int sign(uint32_t x) const { return (eval(x) & 1) ? +1 : -1; }
  int field_size() const { return 1 << r_; }

 private:
  uint32_t gf_mul(uint32_t a, uint32_t b) const {
    uint32_t mod = modulus_for(r_);
    uint32_t hi_bit = 1u << r_;
    uint32_t acc = 0;
    while (b) {
      if (b & 1) acc ^= a;
      b >>= 1;
      a <<= 1;
      if (a & hi_bit) a ^= mod | hi_bit;
    }
    return acc & (hi_bit - 1);
  }

  int r_;
  std::vector<uint32_t> coeffs_;
};

// Four-wise independent sign with an explicit universe bound.
inline int sample_sign(const KWiseHash& hash, uint64_t item,
                       uint64_t universe) {
  if (item >= universe)
    throw std::domain_error("sample_sign: item outside the universe");
  return hash.sign(item);
}

struct StableParams {
  double p = 1.0;
  double truncation = 0.0;  // 0 means untruncated

  explicit StableParams(double p_, double trunc = 0.0)
      : p(p_), truncation(trunc) {
    if (!(p > 0.0 && p <= 2.0))
      throw std::invalid_argument("StableParams: p must be in (0,2]");
  }
};

// Chambers-Mallows-Stuck for the symmetric case: theta uniform in
// (-pi/2, pi/2), r uniform in (0,1),
//   X = sin(p*theta)/cos(theta)^(1/p) * (cos(theta(1-p))/log(1/r))^(1/p - 1).
// At p=1 the second factor has exponent 0 and X = tan(theta); at p=2 this
// yields a centered Gaussian with variance 2 (the standard 2-stable scale).
inline double sample_p_stable(const StableParams& params, double theta,
                              double r) {
  const double p = params.p;
  const double eps = 0x1.0p-40;
  const double half_pi = M_PI / 2.0;
  if (theta <= -half_pi + eps) theta = -half_pi + eps;
  if (theta >= half_pi - eps) theta = half_pi - eps;
  if (r < eps) r = eps;
  if (r > 1.0 - eps) r = 1.0 - eps;

  double x;
  if (p == 1.0) {
    x = std::tan(theta);
  } else if (p == 2.0) {
    // The formula collapses to 2 sin(theta) sqrt(log(1/r)): a centered
    // Gaussian with variance 2, the standard 2-stable scale.
    x = 2.0 * std::sin(theta) * std::sqrt(-std::log(r));
  } else {
    double a = std::sin(p * theta) / std::pow(std::cos(theta), 1.0 / p);
    double b = std::pow(std::cos(theta * (1.0 - p)) / std::log(1.0 / r),
                        1.0 / p - 1.0);
    x = a * b;
  }
  if (params.truncation > 0.0) {
    if (x > params.truncation) x = params.truncation;
    if (x < -params.truncation) x = -params.truncation;
  }
  return x;
}

inline double sample_p_stable(const StableParams& params, Rng& rng) {
  double theta = (rng.next_unit_open() - 0.5) * M_PI;
  double r = rng.next_unit_open();
  return sample_p_stable(params, theta, r);
}

// Standard exponential via inverse CDF, optionally truncated at a cap.
inline double sample_exponential(Rng& rng, double cap = 0.0) {
  double u = rng.next_unit_open();
  double x = -std::log1p(-u);
  if (cap > 0.0 && x > cap) x = cap;
  return x;
}

inline double exponential_inverse_cdf(double u) { return -std::log1p(-u); }

}  // namespace desketch

#endif  // DESKETCH_RAND_HPP
