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

#ifndef DESKETCH_ORACLE_HPP
#define DESKETCH_ORACLE_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "desketch/stream.hpp"

namespace desketch {

// Exact brute-force ground truth over an update log. Never approximates
// silently: anything non-exhaustive is flagged in its result.
class ExactState {
 public:
  void ingest(const StreamUpdate& u) { log_.push_back(u); }
  void ingest(const UpdateSeq& us) {
    for (const auto& u : us) log_.push_back(u);
  }

  size_t size() const { return log_.size(); }
  const UpdateSeq& log() const { return log_; }

  // Frequency vector over the 1-based closed position range [a, b].
  std::unordered_map<uint64_t, int64_t> frequencies(size_t a, size_t b) const;

  // Sum of |f_i|^p over [a, b]; p = 0 counts the support.
  double moment(double p, size_t a, size_t b) const;
  double moment(double p) const { return moment(p, 1, log_.size()); }

  // Shannon entropy in bits of the empirical distribution on [a, b].
  // Throws on an empty range.
  double entropy(size_t a, size_t b) const;
  double entropy() const { return entropy(1, log_.size()); }

 private:
  UpdateSeq log_;
};

// Exact prefix moment maintained incrementally, for per-step polling.
class RunningMoment {
 public:
  explicit RunningMoment(double p) : p_(p) {}

  void ingest(const StreamUpdate& u) {
    int64_t& c = freq_[u.item];
    moment_ -= term(c);
    c += u.delta;
    moment_ += term(c);
    mass_ += u.delta;
  }
  double value() const { return moment_; }
  int64_t mass() const { return mass_; }
  const std::unordered_map<uint64_t, int64_t>& frequencies() const {
    return freq_;
  }

  // Shannon entropy in bits of the current empirical distribution.
  double entropy() const {
    double total = 0;
    for (const auto& [item, c] : freq_)
      total += std::abs(static_cast<double>(c));
    if (total <= 0) return 0;
    double h = 0;
    for (const auto& [item, c] : freq_) {
      if (c == 0) continue;
      double q = std::abs(static_cast<double>(c)) / total;
      h -= q * std::log2(q);
    }
    return h;
  }

 private:
  double term(int64_t c) const {
    if (c == 0) return 0;
    return p_ == 0.0 ? 1.0 : std::pow(std::abs(static_cast<double>(c)), p_);
  }
  double p_;
  std::unordered_map<uint64_t, int64_t> freq_;
  double moment_ = 0;
  int64_t mass_ = 0;
};

// Longest chain i_1 < ... < i_k through a value sequence such that each
// y_{i_{j-1}} falls outside [(1-eps) y_{i_j}, (1+eps) y_{i_j}]. Exact (DP)
// up to 4096 values; greedy beyond, which is exact for monotone sequences
// such as prefix moments. Cross-checked against subset enumeration in tests.
int flip_number(const std::vector<double>& values, double eps);

// The exact quadratic DP regardless of length.
int flip_number_exhaustive(const std::vector<double>& values, double eps);

struct TwistResult {
  int value = 0;
  bool exhaustive = true;  // false means the greedy estimate was returned
};

// Twist number of a function F (given by tag "fp" with exponent p) over a
// stream. Chains count a step j when either the prefix value leaves the
// (1 +/- eps) band of the next prefix value or the substream between the two
// chain points carries an eps fraction of the earlier prefix. Exhaustive for
// streams up to maxExhaustive updates, greedy (flagged) beyond.
TwistResult twist_number(const UpdateSeq& stream, double p, double eps,
                         size_t max_exhaustive = 12);

struct SmoothnessWitness {
  UpdateSeq a, b, c;
  double lhs = 0, rhs = 0;
};

// Exhaustively verifies (alpha, beta)-smoothness of F_p over all streams of
// length <= max_len on a universe of size <= universe, split into adjacent
// substreams A, B, C. Returns a violating witness if one exists.
std::optional<SmoothnessWitness> smoothness_check(double p, double alpha,
                                                  double beta, int universe,
                                                  int max_len);

}  // namespace desketch

#endif  // DESKETCH_ORACLE_HPP
