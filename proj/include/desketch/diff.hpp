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

#ifndef DESKETCH_DIFF_HPP
#define DESKETCH_DIFF_HPP

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "desketch/countsketch.hpp"
#include "desketch/f0_sketch.hpp"
#include "desketch/fp_large.hpp"
#include "desketch/l2_sampler.hpp"
#include "desketch/rand.hpp"
#include "desketch/sign_sketch.hpp"
#include "desketch/stable_sketch.hpp"

namespace desketch {

enum class DEKind { F0, F2, FpSmall, FpLarge };
enum class DEOrientation { FixedPrefix, SuffixPivoted };

struct DEConfig {
  DEKind kind = DEKind::F2;
  DEOrientation orientation = DEOrientation::FixedPrefix;
  double gamma = 0.5;
  double eps = 0.1;
  double delta = 0.1;
  double p = 2.0;           // moment order (FpSmall / FpLarge)
  uint64_t universe = 1024;  // FpLarge sample sizing
  double c = 0.0;           // practical constant; 0 picks the kind default
};

// Sketch dimension per kind: gamma^C / eps^2 with C = 1 for F2/F0/FpLarge and
// C = 2/p for FpSmall, times the usual log factors.
struct DEDimension {
  static double exponent(DEKind kind, double p) {
    return kind == DEKind::FpSmall ? 2.0 / p : 1.0;
  }

  static double log_factor(const DEConfig& cfg) {
    return std::max(1.0,
                    std::log2(1.0 / cfg.eps) + std::log2(1.0 / cfg.delta));
  }

  // Total cells (F2), level capacity (F0), stable rows (FpSmall) or sample
  // count (FpLarge).
  static uint32_t size(const DEConfig& cfg) {
    double g = std::min(1.0, cfg.gamma);
    double base = std::pow(g, exponent(cfg.kind, cfg.p)) / (cfg.eps * cfg.eps);
    switch (cfg.kind) {
      case DEKind::F2: {
        double c = cfg.c > 0 ? cfg.c : 8.0;
        return static_cast<uint32_t>(std::max(64.0, c * base * log_factor(cfg)));
      }
      case DEKind::F0: {
        double c = cfg.c > 0 ? cfg.c : 8.0;
        return static_cast<uint32_t>(std::max(16.0, c * base));
      }
      case DEKind::FpSmall: {
        double c = cfg.c > 0 ? cfg.c : 32.0;
        return static_cast<uint32_t>(std::max(24.0, 3.0 * std::ceil(c * base)));
      }
      case DEKind::FpLarge: {
        double c = cfg.c > 0 ? cfg.c : 2.0;
        double n_term = std::pow(static_cast<double>(cfg.universe),
                                 1.0 - 2.0 / cfg.p);
        return static_cast<uint32_t>(std::max(16.0, c * base * n_term));
      }
    }
    return 64;
  }
};

// F2 difference estimator over a shared sign sketch pair, the dot
// maintained incrementally against the frozen pivot. Fixed-prefix blocks
// estimate F2(v + w_t) - F2(v) = 2 <v, w_t> + ||w_t||^2; suffix-pivoted
// blocks estimate F2(u + s_t) - F2(s_t) = 2 <u, s_t> + ||u||^2, which stays
// an additive eps F2(s_t) estimate as the suffix grows.
class F2DiffBlock {
 public:
  F2DiffBlock() = default;

  F2DiffBlock(const Seed& seed, const DEConfig& cfg)
      : F2DiffBlock(seed, DEDimension::size(cfg), 8, 4, cfg.orientation) {}

  F2DiffBlock(const Seed& seed, uint32_t cells, uint32_t rows, uint32_t groups,
              DEOrientation orientation = DEOrientation::FixedPrefix)
      : rows_(rows), orientation_(orientation) {
    uint32_t buckets = std::max<uint32_t>(1, cells / std::max(1u, rows));
    pivot_ = SignSketch(seed, rows, buckets, groups);
    live_ = SignSketch(seed, rows, buckets, groups);
    dot_.assign(rows, 0.0);
  }

  bool frozen() const { return frozen_; }

  void update(uint64_t item, double delta) {
    if (!frozen_) {
      pivot_.update(item, delta);
      return;
    }
    // Maintain the per-row dot against the frozen pivot as live cells move.
    for (uint32_t r = 0; r < rows_; ++r) {
      auto [b, s] = live_.locate(r, item);
      dot_[r] += pivot_.cell(r, b) * s * delta;
    }
    live_.update(item, delta);
  }

  void freeze() { frozen_ = true; }

  double estimate() const {
    if (!frozen_) return 0.0;
    std::vector<double> per_row(rows_);
    bool fixed = orientation_ == DEOrientation::FixedPrefix;
    for (uint32_t r = 0; r < rows_; ++r)
      per_row[r] = 2.0 * dot_[r] +
                   (fixed ? live_.row_sumsq(r) : pivot_.row_sumsq(r));
    return live_.combine_rows(per_row);
  }

  double live_f2() const { return live_.f2_estimate(); }
  double pivot_f2() const { return pivot_.f2_estimate(); }
  const SignSketch& pivot() const { return pivot_; }
  const SignSketch& live() const { return live_; }

 private:
  uint32_t rows_ = 0;
  DEOrientation orientation_ = DEOrientation::FixedPrefix;
  bool frozen_ = false;
  SignSketch pivot_, live_;
  std::vector<double> dot_;
};

// F0 difference estimator: freeze the subsampling level holding about
// gamma/eps^2 pivot survivors, then count survivors at that level that are
// new after the split, scaled by 2^level.
class F0DiffBlock {
 public:
  F0DiffBlock() = default;

  F0DiffBlock(const Seed& seed, const DEConfig& cfg)
      : F0DiffBlock(seed, DEDimension::size(cfg)) {}

  F0DiffBlock(const Seed& seed, uint32_t capacity)
      : capacity_(std::max<uint32_t>(8, capacity)),
        sketch_(seed, capacity_) {}

  bool frozen() const { return frozen_; }

  void update(uint64_t item, double delta = 1) {
    (void)delta;
    if (!frozen_) {
      sketch_.update(item);
      return;
    }
    if (sketch_.item_level(item) >= level_) {
      uint32_t id = sketch_.compact_id(item);
      if (!prefix_.count(id)) fresh_.insert(id);
    }
  }

  void freeze() {
    frozen_ = true;
    level_ = 0;
    for (int k = 0; k < F0Sketch::kLevels; ++k) {
      if (!sketch_.level_overflowed(k) && sketch_.level_count(k) <= capacity_) {
        level_ = k;
        break;
      }
    }
    prefix_ = sketch_.level_set(level_);
  }

  int level() const { return level_; }

  double estimate() const {
    if (!frozen_) return 0.0;
    return std::ldexp(static_cast<double>(fresh_.size()), level_);
  }

 private:
  uint32_t capacity_ = 8;
  bool frozen_ = false;
  int level_ = 0;
  F0Sketch sketch_;
  std::unordered_set<uint32_t> prefix_, fresh_;
};

// F_p difference estimator for p in (0,2): paired Li geometric-mean terms
// over one stable sketch matrix; the pivot products are cached at the split
// so an empty suffix cancels exactly.
class FpSmallDiffBlock {
 public:
  FpSmallDiffBlock() = default;

  FpSmallDiffBlock(const Seed& seed, const DEConfig& cfg)
      : FpSmallDiffBlock(seed, cfg.p, DEDimension::size(cfg),
                         cfg.delta < 0.1 ? 5 : 1, cfg.orientation) {}

  FpSmallDiffBlock(const Seed& seed, double p, uint32_t d, uint32_t groups = 1,
                   DEOrientation orientation = DEOrientation::FixedPrefix)
      : orientation_(orientation), pivot_(seed, p, d, 3, groups),
        live_(pivot_.source(), 3, groups) {}

  FpSmallDiffBlock(std::shared_ptr<StableColumnSource> source,
                   uint32_t groups = 1)
      : pivot_(source, 3, groups), live_(source, 3, groups) {}

  bool frozen() const { return frozen_; }

  void update(uint64_t item, double delta) {
    if (!frozen_)
      pivot_.update(item, delta);
    else
      live_.update(item, delta);
  }

  void freeze() {
    frozen_ = true;
    pivot_terms_ = pivot_.li_terms();
  }

  // Mean (median of group means when boosted) of z_i - z'_i. Fixed-prefix
  // subtracts the cached pivot products; suffix-pivoted subtracts the live
  // suffix products so the pivot's contribution is what remains.
  double estimate() const {
    if (!frozen_) return 0.0;
    const auto& yp = pivot_.accumulator();
    const auto& yl = live_.accumulator();
    uint32_t q = pivot_.q();
    double c = c_qp(q, pivot_.p());
    double e = pivot_.p() / q;
    bool fixed = orientation_ == DEOrientation::FixedPrefix;
    size_t terms = pivot_terms_.size();
    uint32_t g = std::min<uint32_t>(live_groups(), terms ? terms : 1);
    std::vector<double> means(g, 0.0);
    size_t per = terms / g;
    for (uint32_t gi = 0; gi < g; ++gi) {
      size_t lo = gi * per, hi = (gi + 1 == g) ? terms : lo + per;
      double s = 0;
      for (size_t i = lo; i < hi; ++i) {
        double prod = 1.0, prod_live = 1.0;
        for (uint32_t j = 0; j < q; ++j) {
          prod *= std::pow(std::abs(yp[i * q + j] + yl[i * q + j]), e);
          if (!fixed) prod_live *= std::pow(std::abs(yl[i * q + j]), e);
        }
        s += c * prod - (fixed ? pivot_terms_[i] : c * prod_live);
      }
      means[gi] = terms ? s / (hi - lo) : 0.0;
    }
    return median_of(std::move(means));
  }

  std::vector<double> raw_term_diffs() const {
    const auto& yp = pivot_.accumulator();
    const auto& yl = live_.accumulator();
    uint32_t q = pivot_.q();
    double c = c_qp(q, pivot_.p());
    double e = pivot_.p() / q;
    std::vector<double> out(pivot_terms_.size());
    for (size_t i = 0; i < out.size(); ++i) {
      double prod = 1.0;
      for (uint32_t j = 0; j < q; ++j)
        prod *= std::pow(std::abs(yp[i * q + j] + yl[i * q + j]), e);
      out[i] = c * prod - pivot_terms_[i];
    }
    return out;
  }

  const StableSketch& pivot_sketch() const { return pivot_; }

 private:
  uint32_t live_groups() const { return 1; }

  DEOrientation orientation_ = DEOrientation::FixedPrefix;
  bool frozen_ = false;
  StableSketch pivot_, live_;
  std::vector<double> pivot_terms_;
};

// F_p difference estimator for integer p > 2 (declared here, defined in
// diff.cpp): heavy coordinates tracked exactly after the split, light mass
// through L2 samples of v - h and the exponential-scaling estimator for
// <v, u^{p-1}>.
class FpLargeDiffBlock {
 public:
  FpLargeDiffBlock() = default;
  FpLargeDiffBlock(const Seed& seed, const DEConfig& cfg);

  bool frozen() const { return frozen_; }
  void update(uint64_t item, double delta);
  void freeze();
  double estimate() const;

  const std::vector<uint64_t>& heavy_items() const { return heavy_; }
  size_t sample_count() const { return samples_.size(); }

 private:
  double cross_term_mean() const;  // <v, u^{p-1}> path

  DEConfig cfg_;
  Seed seed_;
  int p_ = 3;
  bool frozen_ = false;

  CountSketchTable cs_v_;          // pivot point queries
  FpLargeTracker rough_v_;         // rough F_p(v)
  L2SampleSet samplers_;           // L2 samples of v - h
  std::vector<L2Sampler> cross_;   // exponential-scaled sketches of v - h

  std::vector<uint64_t> heavy_;
  std::unordered_map<uint64_t, double> h_hat_;
  double w_f2_ = 0.0;  // F2 estimate of v - h at the split
  std::vector<L2Sample> samples_;
  std::unordered_map<uint64_t, int64_t> suffix_;  // exact u (desk scale)
};

// One block of any kind behind the spec surface.
class DiffEstimatorBlock {
 public:
  DiffEstimatorBlock() = default;
  DiffEstimatorBlock(const Seed& seed, const DEConfig& cfg) : cfg_(cfg) {
    switch (cfg.kind) {
      case DEKind::F2:
        f2_ = std::make_unique<F2DiffBlock>(seed, cfg);
        break;
      case DEKind::F0:
        f0_ = std::make_unique<F0DiffBlock>(seed, cfg);
        break;
      case DEKind::FpSmall:
        fps_ = std::make_unique<FpSmallDiffBlock>(seed, cfg);
        break;
      case DEKind::FpLarge:
        fpl_ = std::make_unique<FpLargeDiffBlock>(seed, cfg);
        break;
    }
  }

  const DEConfig& config() const { return cfg_; }

  void update(uint64_t item, double delta) {
    if (f2_) f2_->update(item, delta);
    if (f0_) f0_->update(item, delta);
    if (fps_) fps_->update(item, delta);
    if (fpl_) fpl_->update(item, delta);
  }

  void freeze() {
    if (f2_) f2_->freeze();
    if (f0_) f0_->freeze();
    if (fps_) fps_->freeze();
    if (fpl_) fpl_->freeze();
  }

  bool frozen() const {
    if (f2_) return f2_->frozen();
    if (f0_) return f0_->frozen();
    if (fps_) return fps_->frozen();
    if (fpl_) return fpl_->frozen();
    return false;
  }

  double estimate() const {
    if (f2_) return f2_->estimate();
    if (f0_) return f0_->estimate();
    if (fps_) return fps_->estimate();
    if (fpl_) return fpl_->estimate();
    return 0.0;
  }

 private:
  DEConfig cfg_;
  std::unique_ptr<F2DiffBlock> f2_;
  std::unique_ptr<F0DiffBlock> f0_;
  std::unique_ptr<FpSmallDiffBlock> fps_;
  std::unique_ptr<FpLargeDiffBlock> fpl_;
};

// Suffix-pivoted registration: records that min(F(u), F(u+v) - F(v)) was at
// most gamma * F(v) when the block was registered; the estimator then stays
// valid for all later suffix growth. Rejects when the condition fails.
struct SuffixRegistration {
  bool accepted = false;
  double ratio = 0.0;
};

inline SuffixRegistration suffix_register(double pivot_value,
                                          double diff_at_registration,
                                          double suffix_value, double gamma) {
  SuffixRegistration r;
  double lhs = std::min(pivot_value, diff_at_registration);
  r.ratio = suffix_value > 0 ? lhs / suffix_value : (lhs > 0 ? 1e300 : 0.0);
  r.accepted = lhs <= gamma * suffix_value;
  return r;
}

}  // namespace desketch

#endif  // DESKETCH_DIFF_HPP
