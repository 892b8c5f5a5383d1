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

#ifndef DESKETCH_F0_SKETCH_HPP
#define DESKETCH_F0_SKETCH_HPP

#include <cstdint>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "desketch/rand.hpp"
#include "desketch/stream.hpp"

namespace desketch {

// Level-sampling distinct-count sketch: an item lives at every level k with
// 2^-k subsampling, membership nested across levels. Each level keeps the
// set of (compacted) ids seen, dropped once it overflows its capacity. The
// estimate reads the lowest surviving level with between capacity/4 and
// capacity survivors and scales by 2^k.
class F0Sketch {
 public:
  static constexpr int kLevels = 40;

  F0Sketch() = default;

  F0Sketch(const Seed& seed, uint32_t capacity)
      : seed_(seed), capacity_(capacity),
        level_hash_(derive_seed(seed, "level"), 2),
        compact_hash_(derive_seed(seed, "compact"), 2) {
    levels_.resize(kLevels);
    overflowed_.assign(kLevels, false);
  }

  uint32_t capacity() const { return capacity_; }
  const Seed& seed() const { return seed_; }

  // Number of trailing zero bits of a pairwise hash value: level >= k with
  // probability 2^-k, and membership at level k+1 implies membership at k.
  int item_level(uint64_t item) const {
    uint64_t v = level_hash_.eval(item);
    int l = 0;
    while (l < kLevels - 1 && (v & 1) == 0) {
      v >>= 1;
      ++l;
    }
    return l;
  }

  uint32_t compact_id(uint64_t item) const {
    return static_cast<uint32_t>(compact_hash_.eval(item) & 0xffffffffu);
  }

  void update(uint64_t item, int64_t delta = 1) {
    (void)delta;  // set semantics; insertion-only
    int lv = item_level(item);
    uint32_t id = compact_id(item);
    for (int k = 0; k <= lv; ++k) {
      if (overflowed_[k]) continue;
      levels_[k].insert(id);
      if (levels_[k].size() > capacity_) {
        levels_[k].clear();
        overflowed_[k] = true;
      }
    }
  }
  void update(const StreamUpdate& u) { update(u.item, u.delta); }

  size_t level_count(int k) const { return levels_[k].size(); }
  bool level_overflowed(int k) const { return overflowed_[k]; }
  const std::unordered_set<uint32_t>& level_set(int k) const {
    return levels_[k];
  }

  double estimate() const {
    if (!overflowed_[0] && levels_[0].size() <= capacity_ &&
        levels_[0].size() < capacity_ / 4 + 1) {
      return static_cast<double>(levels_[0].size());
    }
    for (int k = 0; k < kLevels; ++k) {
      if (overflowed_[k]) continue;
      size_t c = levels_[k].size();
      if (c <= capacity_ && (c >= capacity_ / 4 || k == 0)) {
        return std::ldexp(static_cast<double>(c), k);
      }
    }
    throw std::runtime_error("F0Sketch: all levels overflowed; capacity too small");
  }

  void restore_level(int k, bool overflowed, const std::vector<uint32_t>& ids) {
    overflowed_[k] = overflowed;
    levels_[k].clear();
    for (uint32_t id : ids) levels_[k].insert(id);
  }

  // Union with a sketch over the same hashes; equals the sketch of the
  // concatenated streams.
  void merge(const F0Sketch& other) {
    if (seed_.value != other.seed_.value || capacity_ != other.capacity_)
      throw std::invalid_argument("F0Sketch: incompatible merge");
    for (int k = 0; k < kLevels; ++k) {
      if (other.overflowed_[k]) {
        levels_[k].clear();
        overflowed_[k] = true;
      }
      if (overflowed_[k]) continue;
      for (uint32_t id : other.levels_[k]) levels_[k].insert(id);
      if (levels_[k].size() > capacity_) {
        levels_[k].clear();
        overflowed_[k] = true;
      }
    }
  }

 private:
  Seed seed_;
  uint32_t capacity_ = 0;
  KWiseHash level_hash_, compact_hash_;
  std::vector<std::unordered_set<uint32_t>> levels_;
  std::vector<bool> overflowed_;
};

}  // namespace desketch

#endif  // DESKETCH_F0_SKETCH_HPP
