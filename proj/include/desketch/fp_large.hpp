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

#ifndef DESKETCH_FP_LARGE_HPP
#define DESKETCH_FP_LARGE_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "desketch/countsketch.hpp"
#include "desketch/rand.hpp"
#include "desketch/stream.hpp"

namespace desketch {

// F_p tracker for integer p in [3, 8]: subsample-and-recover level sets.
// Rate r keeps items with probability 2^-r (nested across rates); each rate
// owns a CountSketch. At query time, items recovered above the per-rate
// heaviness threshold are binned into dyadic frequency classes; each class
// size is estimated at the rate where its survivor count is concentrated and
// the class contributions are summed.
class FpLargeTracker {
 public:
  FpLargeTracker() = default;

  FpLargeTracker(const Seed& seed, int p, double eps, double delta,
                 uint64_t universe)
      : seed_(seed), p_(p), eps_(eps) {
    if (p < 3 || p > 8)
      throw std::invalid_argument("FpLargeTracker: integer p in [3,8]");
    (void)delta;
    rates_ = 1;
    while ((uint64_t(1) << rates_) < universe) ++rates_;
    ++rates_;
    sub_hash_ = KWiseHash(derive_seed(seed, "sub"), 2);
    double n_term = std::pow(static_cast<double>(universe),
                             1.0 - 2.0 / static_cast<double>(p));
    uint32_t buckets = static_cast<uint32_t>(
        std::max(64.0, 8.0 * n_term / (eps * eps)));
    tables_.reserve(rates_);
    for (int r = 0; r < rates_; ++r)
      tables_.emplace_back(derive_seed(seed, "cs" + std::to_string(r)), 5,
                           buckets, true);
  }

  int p() const { return p_; }

  // Item survives rate r if its pairwise hash has r low zero bits.
  int item_rate(uint64_t item) const {
    uint64_t v = sub_hash_.eval(item);
    int l = 0;
    while (l < rates_ - 1 && (v & 1) == 0) {
      v >>= 1;
      ++l;
    }
    return l;
  }

  void update(uint64_t item, double delta) {
    int lv = item_rate(item);
    for (int r = 0; r <= lv && r < rates_; ++r) tables_[r].update(item, delta);
  }
  void update(const StreamUpdate& u) {
    update(u.item, static_cast<double>(u.delta));
  }

  double estimate() const {
    // Recover per rate: estimated frequencies of candidates clearing the
    // noise floor of that rate's table.
    struct Rec {
      double f;
      int rate;
    };
    std::unordered_map<uint64_t, Rec> recovered;
    std::vector<double> l2(rates_);
    for (int r = 0; r < rates_; ++r) {
      l2[r] = std::sqrt(std::max(0.0, tables_[r].f2_estimate()));
      double floor = 4.0 * l2[r] / std::sqrt(tables_[r].buckets());
      for (uint64_t item : tables_[r].candidates()) {
        double f = tables_[r].query(item);
        if (f < std::max(floor, 1.0)) continue;
        auto it = recovered.find(item);
        // Keep the estimate from the lowest rate (least subsampling noise).
        if (it == recovered.end() || r < it->second.rate)
          recovered[item] = {f, r};
      }
    }
    if (recovered.empty()) return 0.0;

    double fmax = 0;
    for (auto& [item, rec] : recovered) fmax = std::max(fmax, rec.f);

    // Class c holds items with f in (fmax/2^{c+1}, fmax/2^c]. Estimate the
    // class size at the deepest rate where members are still recoverable,
    // scaling survivor counts by 2^rate.
    int classes = 2 * rates_ + 4;
    std::vector<double> class_sum(classes, 0.0);
    std::vector<std::vector<std::pair<uint64_t, double>>> members(classes);
    for (auto& [item, rec] : recovered) {
      int c = 0;
      double f = rec.f;
      while (c + 1 < classes && f <= fmax / std::pow(2.0, c + 1)) ++c;
      members[c].push_back({item, f});
    }
    double total = 0;
    for (int c = 0; c < classes; ++c) {
      if (members[c].empty()) continue;
      // Shallowest rate where class-c frequencies clear that rate's recovery
      // floor; the subsample L2 (and so the floor) drops as the rate deepens.
      double fc = fmax / std::pow(2.0, c);
      int rc = -1;
      for (int r = 0; r < rates_; ++r) {
        double floor = 4.0 * l2[r] / std::sqrt(tables_[r].buckets());
        if (fc >= std::max(floor, 1.0)) {
          rc = r;
          break;
        }
      }
      if (rc < 0) continue;  // below resolution everywhere
      double count = 0, powsum = 0;
      for (auto& [item, f] : members[c]) {
        if (item_rate(item) >= rc) {
          count += 1.0;
          powsum += std::pow(f, p_);
        }
      }
      if (count == 0) continue;
      total += std::pow(2.0, rc) * powsum;
    }
    return total;
  }

 private:
  Seed seed_;
  int p_ = 3;
  double eps_ = 0.2;
  int rates_ = 1;
  KWiseHash sub_hash_;
  std::vector<CountSketchTable> tables_;
};

}  // namespace desketch

#endif  // DESKETCH_FP_LARGE_HPP
