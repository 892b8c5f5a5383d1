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

#include "desketch/diff.hpp"

#include <algorithm>

namespace desketch {

namespace {

double binom(int n, int k) {
  double r = 1;
  for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
  return r;
}

}  // namespace

FpLargeDiffBlock::FpLargeDiffBlock(const Seed& seed, const DEConfig& cfg)
    : cfg_(cfg), seed_(seed), p_(static_cast<int>(cfg.p)) {
  if (p_ < 3 || p_ > 8 || cfg.p != p_)
    throw std::invalid_argument("FpLargeDiffBlock: integer p in [3,8]");
  uint32_t k = DEDimension::size(cfg);
  uint32_t cs_buckets = static_cast<uint32_t>(
      std::max(64.0, 8.0 / (cfg.eps * cfg.eps)));
  cs_v_ = CountSketchTable(derive_seed(seed, "csv"), 5, cs_buckets, true);
  rough_v_ = FpLargeTracker(derive_seed(seed, "rough"), p_, 0.25, 0.1,
                            cfg.universe);
  samplers_ = L2SampleSet(derive_seed(seed, "samp"), k);
  uint32_t n_cross = std::max<uint32_t>(16, k / 2);
  cross_.reserve(n_cross);
  for (uint32_t i = 0; i < n_cross; ++i)
    cross_.emplace_back(derive_seed(seed, "x" + std::to_string(i)), 5, 512);
}

void FpLargeDiffBlock::update(uint64_t item, double delta) {
  if (!frozen_) {
    cs_v_.update(item, delta);
    rough_v_.update(item, delta);
    samplers_.update(item, delta);
    for (auto& c : cross_) c.update(item, delta);
    return;
  }
  suffix_[item] += static_cast<int64_t>(delta);
}

void FpLargeDiffBlock::freeze() {
  frozen_ = true;

  // Heavy set: everything at least (eps / (16 gamma^{1 - 1/p})) * L_p(v).
  double fp_v = std::max(rough_v_.estimate(), 1.0);
  double lp_v = std::pow(fp_v, 1.0 / p_);
  double g = std::min(1.0, cfg_.gamma);
  double threshold =
      cfg_.eps / (16.0 * std::pow(g, 1.0 - 1.0 / p_)) * lp_v;
  threshold = std::max(threshold, 1.0);
  double capacity = 4.0 * fp_v / std::pow(threshold, p_) + 16.0;

  for (uint64_t item : cs_v_.candidates()) {
    double est = cs_v_.query(item);
    if (est >= threshold) {
      heavy_.push_back(item);
      h_hat_[item] = est;
    }
  }
  if (heavy_.size() > static_cast<size_t>(capacity))
    throw std::runtime_error("FpLargeDiffBlock: heavy set capacity overflow");

  // Subtract the heavy estimates so the samplers and the scaled sketches see
  // w = v - h, then draw the sample set and the rough F2 of w.
  for (const auto& [item, est] : h_hat_) {
    samplers_.update(item, -est);
    for (auto& c : cross_) c.update(item, -est);
    cs_v_.update(item, -est);
  }
  w_f2_ = std::max(0.0, cs_v_.f2_estimate());
  samples_ = samplers_.draw();
  // Restore the point-query table (heavy queries still read v).
  for (const auto& [item, est] : h_hat_) cs_v_.update(item, est);
}

double FpLargeDiffBlock::cross_term_mean() const {
  // <w, u^{p-1}>: sample a ~ u_a^2 / ||u||^2 exactly via the unit's
  // exponentials, read the scaled pivot coordinate from the unit's sketch.
  double u2 = 0;
  for (const auto& [item, c] : suffix_)
    u2 += static_cast<double>(c) * static_cast<double>(c);
  if (u2 == 0 || cross_.empty()) return 0.0;
  double sum = 0;
  size_t used = 0;
  for (const auto& unit : cross_) {
    double best = 0, best_e = 0;
    uint64_t best_item = 0;
    int best_j = -1;
    for (const auto& [item, c] : suffix_) {
      if (c == 0) continue;
      const auto& exps = unit.exp_for(item);
      for (int j = 0; j < L2Sampler::kDup; ++j) {
        double z = std::abs(static_cast<double>(c)) / std::sqrt(exps[j]);
        if (z > best) {
          best = z;
          best_item = item;
          best_j = j;
          best_e = exps[j];
        }
      }
    }
    if (best_j < 0) continue;
    double u_a = static_cast<double>(suffix_.at(best_item));
    double v_hat = unit.scaled_query(best_item, best_j) * std::sqrt(best_e);
    sum += u2 * v_hat * std::pow(u_a, p_ - 3);
    ++used;
  }
  return used ? sum / used : 0.0;
}

double FpLargeDiffBlock::estimate() const {
  if (!frozen_) return 0.0;

  // Heavy part: (h + u)^p - h^p on tracked coordinates, u exact.
  double heavy_part = 0;
  for (uint64_t a : heavy_) {
    double h = h_hat_.at(a);
    auto it = suffix_.find(a);
    double u = it == suffix_.end() ? 0.0 : static_cast<double>(it->second);
    if (u == 0) continue;
    heavy_part += std::pow(h + u, p_) - std::pow(h, p_);
  }

  // Light part, i >= 2: mean over samples of w_hat^{i-2} W u^{p-i}.
  double light = 0;
  if (!samples_.empty()) {
    for (int i = 2; i <= p_ - 1; ++i) {
      double s = 0;
      for (const auto& smp : samples_) {
        auto it = suffix_.find(smp.item);
        if (it == suffix_.end() || it->second == 0) continue;
        double u = static_cast<double>(it->second);
        s += std::pow(smp.frequency, i - 2) * w_f2_ * std::pow(u, p_ - i);
      }
      light += binom(p_, i) * s / static_cast<double>(samples_.size());
    }
  }
  // i = 1 term through the exponential-scaling estimator.
  light += binom(p_, 1) * cross_term_mean();

  // F_p of the suffix alone (the power-zero term of the expansion), with the
  // heavy-coordinate contribution removed since the heavy part covers it.
  double fpu = 0;
  for (const auto& [item, c] : suffix_) {
    if (c == 0 || h_hat_.count(item)) continue;
    fpu += std::pow(std::abs(static_cast<double>(c)), p_);
  }

  return heavy_part + light + fpu;
}

}  // namespace desketch
