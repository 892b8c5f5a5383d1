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

#ifndef DESKETCH_SIGN_SKETCH_HPP
#define DESKETCH_SIGN_SKETCH_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "desketch/rand.hpp"
#include "desketch/stream.hpp"

namespace desketch {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0;
  size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

// AMS sign sketch, bucketed per row. Each row hashes items to one of
// `buckets` cells with a four-wise independent sign; per row the sum of
// squared cells is an unbiased F2 estimate and the cell-wise dot of two
// sketches sharing a seed is an unbiased inner-product estimate. buckets = 1
// is the dense y = Mx layout. Rows are combined as a median over `groups`
// group means.
class SignSketch {
 public:
  SignSketch() = default;

  SignSketch(const Seed& seed, uint32_t rows, uint32_t buckets,
             uint32_t groups = 1)
      : seed_(seed), rows_(rows), buckets_(std::max<uint32_t>(buckets, 1)),
        groups_(std::max<uint32_t>(groups, 1)) {
    if (rows_ == 0) throw std::invalid_argument("SignSketch: rows == 0");
    if (groups_ > rows_) groups_ = rows_;
    hashes_.reserve(rows_);
    for (uint32_t r = 0; r < rows_; ++r) {
      hashes_.emplace_back(derive_seed(seed, "row" + std::to_string(r)), 4);
    }
    cells_.assign(static_cast<size_t>(rows_) * buckets_, 0.0);
    row_sumsq_.assign(rows_, 0.0);
  }

  uint32_t rows() const { return rows_; }
  uint32_t buckets() const { return buckets_; }
  uint32_t groups() const { return groups_; }
  const Seed& seed() const { return seed_; }

  bool compatible(const SignSketch& o) const {
    return rows_ == o.rows_ && buckets_ == o.buckets_ &&
           seed_.value == o.seed_.value;
  }

  void update(uint64_t item, double delta) {
    for (uint32_t r = 0; r < rows_; ++r) {
      auto [b, s] = hashes_[r].bucket_sign(item, buckets_);
      double& cell = cells_[static_cast<size_t>(r) * buckets_ + b];
      double add = s * delta;
      row_sumsq_[r] += 2.0 * cell * add + add * add;
      cell += add;
    }
  }
  void update(const StreamUpdate& u) {
    update(u.item, static_cast<double>(u.delta));
  }

  double cell(uint32_t r, uint32_t b) const {
    return cells_[static_cast<size_t>(r) * buckets_ + b];
  }
  std::pair<uint32_t, int> locate(uint32_t r, uint64_t item) const {
    return hashes_[r].bucket_sign(item, buckets_);
  }
  double row_sumsq(uint32_t r) const { return row_sumsq_[r]; }

  // Median over groups of the mean per-row squared mass.
  double f2_estimate() const { return combine_rows(row_sumsq_); }

  double inner_product_estimate(const SignSketch& other) const {
    if (!compatible(other))
      throw std::invalid_argument("SignSketch: incompatible sketches");
    std::vector<double> dots(rows_, 0.0);
    for (uint32_t r = 0; r < rows_; ++r) {
      double d = 0;
      const double* a = &cells_[static_cast<size_t>(r) * buckets_];
      const double* b = &other.cells_[static_cast<size_t>(r) * buckets_];
      for (uint32_t c = 0; c < buckets_; ++c) d += a[c] * b[c];
      dots[r] = d;
    }
    return combine_rows(dots);
  }

  // Cell-wise sum; sketch(S1 || S2) == sketch(S1) + sketch(S2).
  void add(const SignSketch& other, double scale = 1.0) {
    if (!compatible(other))
      throw std::invalid_argument("SignSketch: incompatible sketches");
    for (size_t i = 0; i < cells_.size(); ++i)
      cells_[i] += scale * other.cells_[i];
    recompute_sumsq();
  }

  double combine_rows(const std::vector<double>& per_row) const {
    std::vector<double> means(groups_, 0.0);
    uint32_t per_group = rows_ / groups_;
    for (uint32_t g = 0; g < groups_; ++g) {
      double s = 0;
      uint32_t lo = g * per_group;
      uint32_t hi = (g + 1 == groups_) ? rows_ : lo + per_group;
      for (uint32_t r = lo; r < hi; ++r) s += per_row[r];
      means[g] = s / (hi - lo);
    }
    return median_of(std::move(means));
  }

  const std::vector<double>& raw_cells() const { return cells_; }
  std::vector<double>& raw_cells_mut() { return cells_; }
  void recompute_sumsq() {
    for (uint32_t r = 0; r < rows_; ++r) {
      double s = 0;
      const double* a = &cells_[static_cast<size_t>(r) * buckets_];
      for (uint32_t c = 0; c < buckets_; ++c) s += a[c] * a[c];
      row_sumsq_[r] = s;
    }
  }

 private:
  Seed seed_;
  uint32_t rows_ = 0, buckets_ = 1, groups_ = 1;
  std::vector<KWiseHash> hashes_;
  std::vector<double> cells_;
  std::vector<double> row_sumsq_;
};

struct TrackerConfig {
  double eps = 0.1;
  double delta = 0.05;
  bool strong_tracking = true;
  bool practical = true;

  // Cell budget c / eps^2 scaled by the log terms; the log log n term from
  // doubling epochs is folded into the constant (see docs).
  uint32_t f2_cells(double c = 8.0) const {
    double logs = std::max(1.0, std::log2(1.0 / eps) + std::log2(1.0 / delta));
    double cells = c / (eps * eps) * (practical ? 1.0 : logs);
    return static_cast<uint32_t>(std::max(64.0, cells));
  }
  uint32_t f2_rows() const { return 12; }
  uint32_t f2_groups() const { return 4; }
};

}  // namespace desketch

#endif  // DESKETCH_SIGN_SKETCH_HPP
