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

#ifndef DESKETCH_COUNTSKETCH_HPP
#define DESKETCH_COUNTSKETCH_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "desketch/rand.hpp"
#include "desketch/sign_sketch.hpp"
#include "desketch/stream.hpp"

namespace desketch {

// Classic CountSketch: r rows of b buckets, each cell the signed sum of the
// frequencies hashing to it; point query is the median of the sign-corrected
// cells across rows.
class CountSketchTable {
 public:
  CountSketchTable() = default;

  CountSketchTable(const Seed& seed, uint32_t rows, uint32_t buckets,
                   bool track_candidates = false)
      : seed_(seed), rows_(rows), buckets_(std::max<uint32_t>(2, buckets)),
        track_candidates_(track_candidates) {
    bucket_hash_.reserve(rows_);
    sign_hash_.reserve(rows_);
    for (uint32_t r = 0; r < rows_; ++r) {
      bucket_hash_.emplace_back(derive_seed(seed, "b" + std::to_string(r)), 2);
      sign_hash_.emplace_back(derive_seed(seed, "s" + std::to_string(r)), 4);
    }
    cells_.assign(static_cast<size_t>(rows_) * buckets_, 0.0);
  }

  uint32_t rows() const { return rows_; }
  uint32_t buckets() const { return buckets_; }
  const Seed& seed() const { return seed_; }

  void update(uint64_t item, double delta) {
    for (uint32_t r = 0; r < rows_; ++r) {
      uint32_t b =
          static_cast<uint32_t>(bucket_hash_[r].bucket(item, buckets_));
      cells_[static_cast<size_t>(r) * buckets_ + b] +=
          sign_hash_[r].sign(item) * delta;
    }
    if (track_candidates_) candidates_.insert(item);
  }
  void update(const StreamUpdate& u) {
    update(u.item, static_cast<double>(u.delta));
  }

  double query(uint64_t item) const {
    std::vector<double> est(rows_);
    for (uint32_t r = 0; r < rows_; ++r) {
      uint32_t b =
          static_cast<uint32_t>(bucket_hash_[r].bucket(item, buckets_));
      est[r] = sign_hash_[r].sign(item) *
               cells_[static_cast<size_t>(r) * buckets_ + b];
    }
    return median_of(std::move(est));
  }

  // Median over rows of the squared cell mass; unbiased per row for F2.
  double f2_estimate() const {
    std::vector<double> per_row(rows_);
    for (uint32_t r = 0; r < rows_; ++r) {
      double s = 0;
      const double* a = &cells_[static_cast<size_t>(r) * buckets_];
      for (uint32_t c = 0; c < buckets_; ++c) s += a[c] * a[c];
      per_row[r] = s;
    }
    return median_of(std::move(per_row));
  }

  // Point query and F2 over the difference of two cell snapshots taken from
  // this table (interval reads through boundary snapshots).
  double query_diff(uint64_t item, const std::vector<double>& from,
                    const std::vector<double>& to) const {
    std::vector<double> est(rows_);
    for (uint32_t r = 0; r < rows_; ++r) {
      size_t i = static_cast<size_t>(r) * buckets_ +
                 static_cast<uint32_t>(bucket_hash_[r].bucket(item, buckets_));
      est[r] = sign_hash_[r].sign(item) * (to[i] - from[i]);
    }
    return median_of(std::move(est));
  }

  double f2_estimate_diff(const std::vector<double>& from,
                          const std::vector<double>& to) const {
    std::vector<double> per_row(rows_);
    for (uint32_t r = 0; r < rows_; ++r) {
      double s = 0;
      for (uint32_t c = 0; c < buckets_; ++c) {
        size_t i = static_cast<size_t>(r) * buckets_ + c;
        double d = to[i] - from[i];
        s += d * d;
      }
      per_row[r] = s;
    }
    return median_of(std::move(per_row));
  }

  void add(const CountSketchTable& other, double scale = 1.0) {
    if (seed_.value != other.seed_.value || rows_ != other.rows_ ||
        buckets_ != other.buckets_)
      throw std::invalid_argument("CountSketchTable: incompatible add");
    for (size_t i = 0; i < cells_.size(); ++i)
      cells_[i] += scale * other.cells_[i];
    if (track_candidates_)
      for (uint64_t c : other.candidates_) candidates_.insert(c);
  }

  const std::unordered_set<uint64_t>& candidates() const {
    return candidates_;
  }
  void restore_candidate(uint64_t item) { candidates_.insert(item); }
  const std::vector<double>& raw_cells() const { return cells_; }
  std::vector<double>& raw_cells_mut() { return cells_; }

 private:
  Seed seed_;
  uint32_t rows_ = 0, buckets_ = 2;
  bool track_candidates_ = false;
  std::vector<KWiseHash> bucket_hash_, sign_hash_;
  std::vector<double> cells_;
  std::unordered_set<uint64_t> candidates_;
};

struct HeavyHitter {
  uint64_t item;
  double frequency;
};

// Everything with f_i >= eps * L2 is reported, nothing below (eps/2) * L2,
// frequencies within (eps/4) * L2. The table must have been built with
// candidate tracking; f2_est within (1 +/- 1/4) of the true F2.
inline std::vector<HeavyHitter> l2_heavy_hitters(const CountSketchTable& t,
                                                 double f2_est, double eps) {
  double l2 = std::sqrt(std::max(0.0, f2_est));
  double threshold = 0.75 * eps * l2;
  std::vector<HeavyHitter> out;
  for (uint64_t item : t.candidates()) {
    double f = t.query(item);
    if (f >= threshold) out.push_back({item, f});
  }
  std::sort(out.begin(), out.end(),
            [](const HeavyHitter& a, const HeavyHitter& b) {
              return a.frequency > b.frequency;
            });
  return out;
}

}  // namespace desketch

#endif  // DESKETCH_COUNTSKETCH_HPP
