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

#ifndef DESKETCH_L2_SAMPLER_HPP
#define DESKETCH_L2_SAMPLER_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "desketch/countsketch.hpp"
#include "desketch/rand.hpp"

namespace desketch {

struct L2Sample {
  uint64_t item;
  double frequency;  // unbiased estimate of the sampled coordinate
};

// Exponential-scaling L2 sampler. Every item is duplicated kDup times and
// each copy scaled by 1/sqrt(e) for a per-copy exponential e; by
// min-stability the arg-max scaled copy belongs to item i with probability
// f_i^2 / F2. The scaled vector lives in a CountSketch; a draw returns the
// arg-max copy when it clearly dominates the rest of the mass, otherwise the
// read is ambiguous and the draw fails (one-shot semantics).
class L2Sampler {
 public:
  static constexpr int kDup = 16;

  L2Sampler() = default;

  L2Sampler(const Seed& seed, uint32_t rows = 5, uint32_t buckets = 512,
            double exp_floor = 0.0)
      : seed_(seed), exp_floor_(exp_floor),
        table_(derive_seed(seed, "cs"), rows, buckets, false) {}

  void update(uint64_t item, double delta) {
    const auto& exps = exponentials(item);
    for (int j = 0; j < kDup; ++j)
      table_.update(key(item, j), delta / std::sqrt(exps[j]));
    items_.insert(item);
  }

  std::optional<L2Sample> sample() const {
    // Ambiguity is mass on OTHER items that could have produced the arg-max
    // under sketch noise; duplicates of the winning item are harmless.
    const double kDominance = 0.2;
    double total = table_.f2_estimate();
    double best = 0;
    uint64_t best_item = 0;
    int best_j = 0;
    for (uint64_t item : items_) {
      for (int j = 0; j < kDup; ++j) {
        double z = std::abs(table_.query(key(item, j)));
        if (z > best) {
          best = z;
          best_item = item;
          best_j = j;
        }
      }
    }
    if (best == 0) return std::nullopt;
    double own_mass = 0;
    for (int j = 0; j < kDup; ++j) {
      double z = table_.query(key(best_item, j));
      own_mass += z * z;
    }
    double rest = std::max(0.0, total - own_mass);
    if (best * best < kDominance * rest) return std::nullopt;
    double e = exponentials(best_item)[best_j];
    double zhat = table_.query(key(best_item, best_j));
    return L2Sample{best_item, zhat * std::sqrt(e)};
  }

  const CountSketchTable& table() const { return table_; }

  // The per-item exponentials and a raw scaled-coordinate read; the large-p
  // difference estimator samples an external vector under this unit's
  // exponentials and reads the pivot coordinate here.
  const std::array<double, kDup>& exp_for(uint64_t item) const {
    return exponentials(item);
  }
  double scaled_query(uint64_t item, int j) const {
    return table_.query(key(item, j));
  }

 private:
  uint64_t key(uint64_t item, int j) const {
    return item * kDup + static_cast<uint64_t>(j);
  }

  const std::array<double, kDup>& exponentials(uint64_t item) const {
    auto it = exp_cache_.find(item);
    if (it != exp_cache_.end()) return it->second;
    std::array<double, kDup> e;
    Rng rng(detail::mix(seed_.value, item + 0x51ed270b7a1fULL));
    for (int j = 0; j < kDup; ++j) {
      double x = sample_exponential(rng);
      if (exp_floor_ > 0.0 && x < exp_floor_) x = exp_floor_;
      e[j] = x;
    }
    return exp_cache_.emplace(item, e).first->second;
  }

  Seed seed_;
  double exp_floor_ = 0.0;
  CountSketchTable table_;
  std::unordered_set<uint64_t> items_;
  mutable std::unordered_map<uint64_t, std::array<double, kDup>> exp_cache_;
};

// A bank of independent samplers plus a small pool of backups. A failed
// draw retries on a fresh-sub-seed backup (each backup used at most once);
// when the budget is exhausted the draw yields nothing, the failure symbol.
class L2SampleSet {
 public:
  static constexpr int kRetryBudget = 8;

  L2SampleSet() = default;
  L2SampleSet(const Seed& seed, uint32_t count, uint32_t rows = 5,
              uint32_t buckets = 512) {
    samplers_.reserve(count);
    for (uint32_t i = 0; i < count; ++i)
      samplers_.emplace_back(derive_seed(seed, "s" + std::to_string(i)), rows,
                             buckets);
    for (int i = 0; i < kRetryBudget; ++i)
      backups_.emplace_back(derive_seed(seed, "retry" + std::to_string(i)),
                            rows, buckets);
  }

  void update(uint64_t item, double delta) {
    for (auto& s : samplers_) s.update(item, delta);
    for (auto& s : backups_) s.update(item, delta);
  }

  // Draws from every sampler; failed draws consume backups.
  std::vector<L2Sample> draw() const {
    std::vector<L2Sample> out;
    out.reserve(samplers_.size());
    size_t next_backup = 0;
    for (const auto& s : samplers_) {
      auto r = s.sample();
      while (!r && next_backup < backups_.size()) {
        r = backups_[next_backup++].sample();
      }
      if (r) out.push_back(*r);
    }
    return out;
  }

  size_t size() const { return samplers_.size(); }

 private:
  std::vector<L2Sampler> samplers_;
  std::vector<L2Sampler> backups_;
};

}  // namespace desketch

#endif  // DESKETCH_L2_SAMPLER_HPP
