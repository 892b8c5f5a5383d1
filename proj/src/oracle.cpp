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

#include "desketch/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace desketch {

std::unordered_map<uint64_t, int64_t> ExactState::frequencies(size_t a,
                                                              size_t b) const {
  std::unordered_map<uint64_t, int64_t> f;
  if (a < 1) a = 1;
  if (b > log_.size()) b = log_.size();
  for (size_t t = a; t <= b && t >= 1; ++t) {
    const auto& u = log_[t - 1];
    f[u.item] += u.delta;
  }
  return f;
}

double ExactState::moment(double p, size_t a, size_t b) const {
  auto f = frequencies(a, b);
  double s = 0;
  for (const auto& [item, c] : f) {
    if (c == 0) continue;
    if (p == 0.0)
      s += 1.0;
    else
      s += std::pow(std::abs(static_cast<double>(c)), p);
  }
  return s;
}

double ExactState::entropy(size_t a, size_t b) const {
  auto f = frequencies(a, b);
  double total = 0;
  for (const auto& [item, c] : f) total += static_cast<double>(std::abs(c));
  if (total <= 0) throw std::invalid_argument("entropy: empty range");
  double h = 0;
  for (const auto& [item, c] : f) {
    if (c == 0) continue;
    double q = static_cast<double>(std::abs(c)) / total;
    h -= q * std::log2(q);
  }
  return h;
}

namespace {

bool flips(double prev, double next, double eps) {
  return prev < (1 - eps) * next || prev > (1 + eps) * next;
}

}  // namespace

int flip_number_exhaustive(const std::vector<double>& values, double eps) {
  // The chain condition is pairwise-adjacent, so the longest chain is the
  // longest path in the flip DAG; the quadratic DP is exact.
  size_t n = values.size();
  if (n == 0) return 0;
  std::vector<int> best(n, 1);
  int answer = 1;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < i; ++j) {
      if (flips(values[j], values[i], eps)) {
        best[i] = std::max(best[i], best[j] + 1);
      }
    }
    answer = std::max(answer, best[i]);
  }
  return answer;
}

int flip_number(const std::vector<double>& values, double eps) {
  if (values.empty()) return 0;
  if (values.size() <= 4096) return flip_number_exhaustive(values, eps);
  // Greedy beyond the DP budget; exact for monotone sequences (prefix
  // moments), where a smaller anchor can only admit more future flips.
  int k = 1;
  double anchor = values.front();
  for (size_t i = 1; i < values.size(); ++i) {
    if (flips(anchor, values[i], eps)) {
      ++k;
      anchor = values[i];
    }
  }
  return k;
}

namespace {

// F_p over the updates in positions (a, b], 1-based half-open on the left.
double interval_moment(const UpdateSeq& s, double p, size_t a, size_t b) {
  std::unordered_map<uint64_t, int64_t> f;
  for (size_t t = a + 1; t <= b; ++t) f[s[t - 1].item] += s[t - 1].delta;
  double m = 0;
  for (const auto& [item, c] : f) {
    if (c == 0) continue;
    m += std::pow(std::abs(static_cast<double>(c)), p);
  }
  return m;
}

bool twist_step(const std::vector<double>& prefix, const UpdateSeq& s,
                double p, double eps, size_t i_prev, size_t i_next) {
  // Condition 1: prefix value at i_prev leaves the band of the value at
  // i_next. Condition 2: the substream (i_prev, i_next] is an eps fraction
  // of the prefix at i_prev.
  double y_prev = i_prev == 0 ? 0.0 : prefix[i_prev - 1];
  double y_next = i_next == 0 ? 0.0 : prefix[i_next - 1];
  if (y_prev < (1 - eps) * y_next || y_prev > (1 + eps) * y_next) return true;
  double seg = interval_moment(s, p, i_prev, i_next);
  return seg >= eps * y_prev && y_prev > 0;
}

}  // namespace

TwistResult twist_number(const UpdateSeq& stream, double p, double eps,
                         size_t max_exhaustive) {
  size_t m = stream.size();
  TwistResult res;
  if (m == 0) return res;

  std::vector<double> prefix(m);
  {
    std::unordered_map<uint64_t, int64_t> f;
    double moment = 0;
    for (size_t t = 0; t < m; ++t) {
      int64_t& c = f[stream[t].item];
      double before =
          c == 0 ? 0 : std::pow(std::abs(static_cast<double>(c)), p);
      c += stream[t].delta;
      double after =
          c == 0 ? 0 : std::pow(std::abs(static_cast<double>(c)), p);
      moment += after - before;
      prefix[t] = moment;
    }
  }

  if (m <= max_exhaustive) {
    // Longest chain over indices 0..m by dynamic programming. Quadratic in m
    // with an interval-moment evaluation per pair; fine at this size.
    std::vector<int> best(m + 1, 1);
    int answer = 1;
    for (size_t i = 0; i <= m; ++i) {
      for (size_t j = 0; j < i; ++j) {
        if (twist_step(prefix, stream, p, eps, j, i))
          best[i] = std::max(best[i], best[j] + 1);
      }
      answer = std::max(answer, best[i]);
    }
    res.value = answer;
    res.exhaustive = true;
    return res;
  }

  // Greedy chain extension, flagged as non-exhaustive.
  int k = 1;
  size_t anchor = 0;
  for (size_t i = 1; i <= m; ++i) {
    if (twist_step(prefix, stream, p, eps, anchor, i)) {
      ++k;
      anchor = i;
    }
  }
  res.value = k;
  res.exhaustive = false;
  return res;
}

namespace {

double seq_moment(const std::vector<int>& items, size_t a, size_t b, double p,
                  int universe) {
  std::vector<int> f(universe, 0);
  for (size_t t = a; t < b; ++t) f[items[t]]++;
  double m = 0;
  for (int c : f)
    if (c > 0) m += std::pow(static_cast<double>(c), p);
  return m;
}

}  // namespace

std::optional<SmoothnessWitness> smoothness_check(double p, double alpha,
                                                  double beta, int universe,
                                                  int max_len) {
  // Enumerate all item sequences of length up to max_len and all split points
  // A | B | C. Violation: (1-beta) F(A+B) <= F(B) holds but
  // (1-alpha) F(A+B+C) <= F(B+C) fails.
  for (int len = 2; len <= max_len; ++len) {
    std::vector<int> items(len, 0);
    uint64_t total = 1;
    for (int i = 0; i < len; ++i) total *= universe;
    for (uint64_t code = 0; code < total; ++code) {
      uint64_t c = code;
      for (int i = 0; i < len; ++i) {
        items[i] = static_cast<int>(c % universe);
        c /= universe;
      }
      for (int sa = 1; sa < len; ++sa) {
        for (int sb = sa; sb <= len; ++sb) {
          // A = [0, sa), B = [sa, sb), C = [sb, len)
          double fab = seq_moment(items, 0, sb, p, universe);
          double fb = seq_moment(items, sa, sb, p, universe);
          if ((1 - beta) * fab <= fb) {
            double fabc = seq_moment(items, 0, len, p, universe);
            double fbc = seq_moment(items, sa, len, p, universe);
            if ((1 - alpha) * fabc > fbc + 1e-12) {
              SmoothnessWitness w;
              for (int i = 0; i < sa; ++i)
                w.a.push_back({static_cast<uint64_t>(items[i]), 1});
              for (int i = sa; i < sb; ++i)
                w.b.push_back({static_cast<uint64_t>(items[i]), 1});
              for (int i = sb; i < len; ++i)
                w.c.push_back({static_cast<uint64_t>(items[i]), 1});
              w.lhs = (1 - alpha) * fabc;
              w.rhs = fbc;
              return w;
            }
          }
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace desketch
