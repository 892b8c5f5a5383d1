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

#ifndef DESKETCH_STABLE_SKETCH_HPP
#define DESKETCH_STABLE_SKETCH_HPP

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "desketch/rand.hpp"
#include "desketch/sign_sketch.hpp"
#include "desketch/stream.hpp"

namespace desketch {

// C_{q,p} = [(2/pi) Gamma(1 - 1/q) Gamma(p/q) sin(pi p / (2q))]^{-q}.
// (E|S|^{p/q})^{-q} for a standard p-stable S, so Li's geometric mean of q
// inner products scaled by C_{q,p} is unbiased for F_p.
inline double c_qp(double q, double p) {
  if (!(q > 1.0) || !(p > 0.0 && p <= 2.0))
    throw std::invalid_argument("c_qp: need q > 1 and p in (0,2]");
  double g1 = std::tgamma(1.0 - 1.0 / q);
  double g2 = std::tgamma(p / q);
  double s = std::sin(M_PI * p / (2.0 * q));
  double bracket = (2.0 / M_PI) * g1 * g2 * s;
  if (!(bracket > 0.0) || !std::isfinite(bracket))
    throw std::invalid_argument("c_qp: gamma pole or invalid input");
  return std::pow(bracket, -q);
}

// E[z^2] / E[z]^2 for one geometric-mean term equals this squared; the
// variance bound is (ratio^2 - 1) * F_p^2. Note this is C_{q,p}/C_{q/2,p}
// (the inverse ordering makes it >= 1).
inline double li_variance_ratio(double q, double p) {
  return c_qp(q, p) / c_qp(q / 2.0, p);
}

// Lazily generated p-stable columns: entry (r, item) is a deterministic
// function of (seed, item, r). Two sources with the same seed and dimension
// but different p consume identical (theta, r) uniforms, so their variates
// are coupled across p; the entropy estimators rely on this.
class StableColumnSource {
 public:
  StableColumnSource(const Seed& seed, double p, uint32_t dim)
      : seed_(seed), params_(p), dim_(dim) {}

  double p() const { return params_.p; }
  uint32_t dim() const { return dim_; }
  const Seed& seed() const { return seed_; }

  const std::vector<double>& column(uint64_t item) {
    auto it = cache_.find(item);
    if (it != cache_.end()) return it->second;
    std::vector<double> col(dim_);
    Rng rng(detail::mix(seed_.value, item * 0x9e3779b97f4a7c15ULL + 1));
    for (uint32_t r = 0; r < dim_; ++r) {
      double theta = (rng.next_unit_open() - 0.5) * M_PI;
      double u = rng.next_unit_open();
      col[r] = sample_p_stable(params_, theta, u);
    }
    return cache_.emplace(item, std::move(col)).first->second;
  }

 private:
  Seed seed_;
  StableParams params_;
  uint32_t dim_;
  std::unordered_map<uint64_t, std::vector<double>> cache_;
};

// Dense stable sketch y = Ax. d must be a multiple of the geometric-mean
// arity q (default 3).
class StableSketch {
 public:
  StableSketch() = default;

  StableSketch(const Seed& seed, double p, uint32_t d, uint32_t q = 3,
               uint32_t groups = 1)
      : source_(std::make_shared<StableColumnSource>(seed, p, round_dim(d, q))),
        q_(q), groups_(std::max<uint32_t>(1, groups)) {
    y_.assign(source_->dim(), 0.0);
  }

  StableSketch(std::shared_ptr<StableColumnSource> source, uint32_t q = 3,
               uint32_t groups = 1)
      : source_(std::move(source)), q_(q),
        groups_(std::max<uint32_t>(1, groups)) {
    if (source_->dim() % q_ != 0)
      throw std::invalid_argument("StableSketch: d not a multiple of q");
    y_.assign(source_->dim(), 0.0);
  }

  static uint32_t round_dim(uint32_t d, uint32_t q) {
    if (d < q) d = q;
    return (d + q - 1) / q * q;
  }

  uint32_t dim() const { return static_cast<uint32_t>(y_.size()); }
  uint32_t q() const { return q_; }
  double p() const { return source_->p(); }
  const std::shared_ptr<StableColumnSource>& source() const { return source_; }
  const std::vector<double>& accumulator() const { return y_; }
  std::vector<double>& accumulator_mut() { return y_; }

  bool compatible(const StableSketch& o) const {
    return source_ == o.source_ && q_ == o.q_;
  }

  void update(uint64_t item, double delta) {
    const auto& col = source_->column(item);
    for (uint32_t r = 0; r < y_.size(); ++r) y_[r] += delta * col[r];
  }
  void update(const StreamUpdate& u) {
    update(u.item, static_cast<double>(u.delta));
  }

  void add(const StableSketch& other, double scale = 1.0) {
    if (!compatible(other))
      throw std::invalid_argument("StableSketch: incompatible sketches");
    for (size_t i = 0; i < y_.size(); ++i) y_[i] += scale * other.y_[i];
  }

  // Li's estimator: mean (median over groups of means) of
  // z_i = C_{q,p} prod_{j in group i} |y_j|^{p/q}.
  double li_estimate() const { return li_estimate_over(y_, dim()); }

  // Same estimator restricted to the first `rows` entries; cheap rough reads.
  double li_estimate_partial(uint32_t rows) const {
    rows = std::min<uint32_t>(rows / q_ * q_, dim());
    if (rows < q_) rows = std::min(dim(), q_);
    return li_estimate_over(y_, rows);
  }

  // Raw geometric-mean terms (unscaled mean), exposed for the difference
  // estimator and for calibration tests.
  std::vector<double> li_terms() const {
    std::vector<double> z(dim() / q_);
    double c = c_qp(q_, p());
    double e = p() / q_;
    for (size_t i = 0; i < z.size(); ++i) {
      double prod = 1.0;
      for (uint32_t j = 0; j < q_; ++j)
        prod *= std::pow(std::abs(y_[i * q_ + j]), e);
      z[i] = c * prod;
    }
    return z;
  }

  double li_estimate_over(const std::vector<double>& y, uint32_t rows) const {
    uint32_t terms = rows / q_;
    if (terms == 0) return 0.0;
    double c = c_qp(q_, p());
    double e = p() / q_;
    uint32_t g = std::min(groups_, terms);
    std::vector<double> means(g, 0.0);
    uint32_t per = terms / g;
    for (uint32_t gi = 0; gi < g; ++gi) {
      uint32_t lo = gi * per, hi = (gi + 1 == g) ? terms : lo + per;
      double s = 0;
      for (uint32_t i = lo; i < hi; ++i) {
        double prod = 1.0;
        for (uint32_t j = 0; j < q_; ++j)
          prod *= std::pow(std::abs(y[i * q_ + j]), e);
        s += prod;
      }
      means[gi] = c * s / (hi - lo);
    }
    return median_of(std::move(means));
  }

 private:
  std::shared_ptr<StableColumnSource> source_;
  uint32_t q_ = 3, groups_ = 1;
  std::vector<double> y_;
};

// Checkpointed strong tracking: estimates at the given stream positions,
// sized by splitting delta across the checkpoint budget (union-bound mode).
template <typename Sketch>
std::vector<double> strong_track(Sketch& sketch, const UpdateSeq& updates,
                                 const std::vector<size_t>& checkpoints) {
  std::vector<double> out;
  size_t ci = 0;
  for (size_t t = 1; t <= updates.size(); ++t) {
    sketch.update(updates[t - 1]);
    while (ci < checkpoints.size() && checkpoints[ci] == t) {
      if constexpr (requires { sketch.li_estimate(); })
        out.push_back(sketch.li_estimate());
      else
        out.push_back(sketch.f2_estimate());
      ++ci;
    }
  }
  return out;
}

}  // namespace desketch

#endif  // DESKETCH_STABLE_SKETCH_HPP
