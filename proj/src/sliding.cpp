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

#include "desketch/sliding.hpp"

#include <algorithm>
#include <cmath>

namespace desketch {

SWParams SWParams::make(double eps, double p, ConstantsMode mode,
                        double value_cap, uint64_t window) {
  SWParams s;
  s.eps = eps;
  s.p = p;
  s.mode = mode;
  s.q = std::max(1.0, p);
  s.value_cap = value_cap;
  s.window = window;
  if (p > 2.0) {
    // Guess-lane framework (value guesses n^C / 2^k).
    s.beta = static_cast<int>(
        std::ceil(std::log2(100.0 * std::pow(4.0, s.q) / std::pow(eps, s.q))));
    s.eta = mode == ConstantsMode::Paper
                ? eps / (std::ldexp(1.0, 20) * s.q * std::log2(1.0 / eps))
                : eps / 8.0;
  } else {
    double mp = std::max(p, 1.0);
    s.beta = static_cast<int>(
        std::ceil(std::log2(100.0 * mp / std::pow(eps, mp))));
    s.eta = mode == ConstantsMode::Paper
                ? eps / (1024.0 * std::log2(1.0 / eps))
                : eps / 8.0;
  }
  s.beta = std::max(s.beta, 3);
  s.gamma.assign(s.beta + 1, 0.0);
  for (int j = 1; j <= s.beta; ++j)
    s.gamma[j] = std::min(1.0, std::ldexp(1.0, 3 - j));
  s.guess_count = static_cast<int>(std::ceil(std::log2(value_cap))) + 1;

  // Suffix merge threshold keeping the sandwich F(t_i, m) <= C_s F(W):
  // merge the middle of a triple when F(t_{i+2}, t) >= (1 - beta_hat)
  // F(t_i, t), beta_hat from the smoothness pair at alpha_hat.
  double alpha_hat = p > 2.0 ? std::pow(6.0 * p, -1.0) : 0.5;
  double beta_hat;
  if (p > 2.0) {
    beta_hat = 1.0 / 6.0;  // C_s about 5 for integer p, see smoothness note
    alpha_hat = std::pow(p * beta_hat, 1.0 / p);
  } else if (p >= 1.0) {
    beta_hat = std::pow(alpha_hat, p) / p;
  } else {
    beta_hat = alpha_hat;
  }
  (void)alpha_hat;
  s.merge_ratio = 1.0 - beta_hat;
  s.maintenance_stride = 4;
  s.creation_stride = 1;
  return s;
}

namespace {

// Li estimator over the entrywise difference to - from.
double li_over_diff(const double* from, const double* to, uint32_t d,
                    uint32_t q, double p, uint32_t groups) {
  uint32_t terms = d / q;
  if (terms == 0) return 0;
  double c = c_qp(q, p);
  double e = p / q;
  uint32_t g = std::min(groups, terms);
  std::vector<double> means(g, 0.0);
  uint32_t per = terms / g;
  for (uint32_t gi = 0; gi < g; ++gi) {
    uint32_t lo = gi * per, hi = (gi + 1 == g) ? terms : lo + per;
    double s = 0;
    for (uint32_t i = lo; i < hi; ++i) {
      double prod = 1.0;
      for (uint32_t j = 0; j < q; ++j) {
        uint32_t r = i * q + j;
        prod *= std::pow(std::abs(to[r] - from[r]), e);
      }
      s += prod;
    }
    means[gi] = c * s / (hi - lo);
  }
  return median_of(std::move(means));
}

// Suffix difference estimator over one stable family: mean of z - z' where z
// reads (now - t1) and z' reads (now - t2).
double li_de_over(const double* g_t1, const double* g_t2, const double* g_now,
                  uint32_t d, uint32_t q, double p) {
  uint32_t terms = d / q;
  if (terms == 0) return 0;
  double c = c_qp(q, p);
  double e = p / q;
  double s = 0;
  for (uint32_t i = 0; i < terms; ++i) {
    double prod_z = 1.0, prod_zp = 1.0;
    for (uint32_t j = 0; j < q; ++j) {
      uint32_t r = i * q + j;
      prod_z *= std::pow(std::abs(g_now[r] - g_t1[r]), e);
      prod_zp *= std::pow(std::abs(g_now[r] - g_t2[r]), e);
    }
    s += prod_z - prod_zp;
  }
  return c * s / terms;
}

uint32_t stable_dim_for(double p, double eps, double sigma_scale) {
  double varf = li_variance_ratio(3.0, p);
  varf = varf * varf - 1.0;
  double sigma = eps / sigma_scale;
  uint32_t d = static_cast<uint32_t>(
      std::ceil(3.0 * std::max(varf, 0.5) / (sigma * sigma)));
  return StableSketch::round_dim(std::max<uint32_t>(d, 48), 3);
}

}  // namespace

// ------------------------------------------------------------ SlidingMoment

SlidingMoment::SlidingMoment(const SWParams& params, const Seed& seed,
                             const std::vector<double>& extra_nodes)
    : params_(params), seed_(seed), extra_nodes_(extra_nodes) {
  int levels = std::min<int>(params_.beta,
                             static_cast<int>(std::log2(1.0 / params_.eps)) + 4);
  sketch_levels_ = levels;
  if (params_.p == 2.0) {
    uint32_t cells = static_cast<uint32_t>(
        std::max(512.0, 8.0 / (params_.eps * params_.eps)));
    sign_rows_ = 20;
    for (int j = 0; j <= levels; ++j)
      sign_banks_.emplace_back(derive_seed(seed, "L" + std::to_string(j)),
                               sign_rows_, cells / sign_rows_ + 1, 5);
  } else {
    for (int j = 0; j <= levels; ++j) {
      double scale = j == 0 ? 2.5 : 3.0;
      uint32_t d = stable_dim_for(params_.p, params_.eps, scale);
      if (j >= 2)
        d = StableSketch::round_dim(
            std::max<uint32_t>(48, d >> std::min(j - 1, 12)), 3);
      for (double np : node_ps())
        stable_banks_.emplace_back(derive_seed(seed, "L" + std::to_string(j)),
                                   np, d, 3, 1);
      stable_dims_.push_back(stable_banks_.back().dim());
    }
  }
  lanes_.resize(params_.beta + 1);
  for (int j = 0; j <= params_.beta; ++j) {
    lanes_[j].live_start = 1;
    lanes_[j].live_snap = snapshot(std::min(j, sketch_levels_));
  }
  powtab_.assign(1 << 18, -1.0);
}

std::vector<double> SlidingMoment::node_ps() const {
  std::vector<double> out{params_.p};
  for (double y : extra_nodes_) out.push_back(y);
  return out;
}

double SlidingMoment::pow_cached(int64_t c) const {
  if (c <= 0) return 0;
  if (c < static_cast<int64_t>(powtab_.size())) {
    double& v = powtab_[c];
    if (v < 0) v = std::pow(static_cast<double>(c), params_.p);
    return v;
  }
  return std::pow(static_cast<double>(c), params_.p);
}

std::shared_ptr<std::vector<double>> SlidingMoment::snapshot(int level) const {
  auto out = std::make_shared<std::vector<double>>();
  if (params_.p == 2.0) {
    *out = sign_banks_[level].raw_cells();
  } else {
    size_t nodes = node_ps().size();
    const uint32_t d = stable_dims_[level];
    out->reserve(nodes * d);
    for (size_t n = 0; n < nodes; ++n) {
      const auto& acc = stable_banks_[level * nodes + n].accumulator();
      out->insert(out->end(), acc.begin(), acc.end());
    }
  }
  return out;
}

void SlidingMoment::ingest(const StreamUpdate& u) {
  if (u.delta < 0)
    throw std::invalid_argument("SlidingMoment: insertion-only updates");
  // Snapshot of level 0 before this update, for a suffix starting here.
  auto pre_snap0 = snapshot(0);

  ++time_;
  if (params_.p == 2.0) {
    for (auto& b : sign_banks_) b.update(u.item, static_cast<double>(u.delta));
  } else {
    for (auto& b : stable_banks_)
      b.update(u.item, static_cast<double>(u.delta));
  }

  // Exact incremental bookkeeping for every kept suffix and live block.
  for (auto& s : suffixes_) {
    int64_t& c = s.counts[u.item];
    s.moment -= pow_cached(c);
    c += u.delta;
    s.moment += pow_cached(c);
  }
  for (auto& lane : lanes_) {
    int64_t& c = lane.live_counts[u.item];
    lane.live_moment -= pow_cached(c);
    c += u.delta;
    lane.live_moment += pow_cached(c);
  }

  // New suffix at this position (newest timestamp always kept).
  Suffix ns;
  ns.start = time_;
  ns.snap0 = pre_snap0;
  ns.counts[u.item] = u.delta;
  ns.moment = pow_cached(u.delta);
  suffixes_.push_back(std::move(ns));

  if (time_ % params_.maintenance_stride == 0) maintain();
}

void SlidingMoment::maintain() {
  // Smooth-histogram suffix merging on the exact moments: drop the middle of
  // any triple whose outer pair is within the merge ratio.
  bool changed = true;
  while (changed && suffixes_.size() >= 3) {
    changed = false;
    for (size_t i = 0; i + 2 < suffixes_.size(); ++i) {
      if (suffixes_[i + 2].moment >= params_.merge_ratio * suffixes_[i].moment) {
        suffixes_.erase(suffixes_.begin() + i + 1);
        changed = true;
        break;
      }
    }
  }

  // Reference scale for block demarcation: the kept suffix nearest the
  // configured window, falling back to the oldest.
  double f_ref = suffixes_.empty() ? 0.0 : suffixes_.front().moment;
  if (params_.window > 0 && time_ > params_.window) {
    size_t boundary = time_ - params_.window + 1;
    for (const auto& s : suffixes_)
      if (s.start <= boundary) f_ref = s.moment;
  }

  for (int j = 1; j <= params_.beta; ++j) {
    Lane& lane = lanes_[j];
    double thr = std::ldexp(1.0, -j - 7) * f_ref;
    if (f_ref > 0 && lane.live_moment >= thr && lane.live_moment > 0) {
      // Demarcate: close the live block at this boundary.
      Block b;
      b.t1 = lane.live_start;
      b.t2 = time_ + 1;
      b.snap_t1 = lane.live_snap;
      b.snap_t2 = snapshot(std::min(j, sketch_levels_));
      b.exact_moment = lane.live_moment;
      lane.closed.push_back(std::move(b));
      lane.live_start = time_ + 1;
      lane.live_snap = lane.closed.back().snap_t2;
      lane.live_counts.clear();
      lane.live_moment = 0;
    }
    // Merge adjacent closed blocks that fell below significance (their sum
    // bounds the union for p <= 1; a 2^{p-1} convexity factor covers p > 1).
    double merge_thr = thr / (params_.p > 1 ? std::ldexp(1.0, 1) : 1.0);
    for (size_t i = 0; i + 1 < lane.closed.size();) {
      if (lane.closed[i].exact_moment + lane.closed[i + 1].exact_moment <=
          merge_thr) {
        lane.closed[i].t2 = lane.closed[i + 1].t2;
        lane.closed[i].snap_t2 = lane.closed[i + 1].snap_t2;
        lane.closed[i].exact_moment += lane.closed[i + 1].exact_moment;
        lane.closed.erase(lane.closed.begin() + i + 1);
      } else {
        ++i;
      }
    }
    // Blocks older than the oldest kept suffix are unreachable.
    size_t oldest = suffixes_.empty() ? 1 : suffixes_.front().start;
    while (!lane.closed.empty() && lane.closed.front().t2 <= oldest)
      lane.closed.pop_front();
    while (lane.closed.size() > 96) lane.closed.pop_front();
  }
}

double SlidingMoment::exact_suffix_moment(size_t idx) const {
  return suffixes_[idx].moment;
}

double SlidingMoment::sketch_interval_moment(
    int level, const std::vector<double>& from,
    const std::vector<double>& to) const {
  if (params_.p == 2.0) {
    const SignSketch& b = sign_banks_[level];
    std::vector<double> per_row(b.rows());
    uint32_t bu = b.buckets();
    for (uint32_t r = 0; r < b.rows(); ++r) {
      double s = 0;
      for (uint32_t c = 0; c < bu; ++c) {
        size_t i = static_cast<size_t>(r) * bu + c;
        double d = to[i] - from[i];
        s += d * d;
      }
      per_row[r] = s;
    }
    return b.combine_rows(per_row);
  }
  uint32_t d = stable_dims_[level];
  return li_over_diff(from.data(), to.data(), d, 3, params_.p, 3);
}

double SlidingMoment::de_estimate(int level, const Block& b, size_t) const {
  int lv = std::min(level, sketch_levels_);
  auto now = snapshot(lv);
  if (params_.p == 2.0) {
    // 2 <u, s> + ||u||^2 per row from the three snapshots.
    const SignSketch& sk = sign_banks_[lv];
    std::vector<double> per_row(sk.rows());
    uint32_t bu = sk.buckets();
    const auto& s1 = *b.snap_t1;
    const auto& s2 = *b.snap_t2;
    const auto& sn = *now;
    for (uint32_t r = 0; r < sk.rows(); ++r) {
      double dot = 0, norm = 0;
      for (uint32_t c = 0; c < bu; ++c) {
        size_t i = static_cast<size_t>(r) * bu + c;
        double u = s2[i] - s1[i];
        double s = sn[i] - s2[i];
        dot += u * s;
        norm += u * u;
      }
      per_row[r] = 2.0 * dot + norm;
    }
    return sk.combine_rows(per_row);
  }
  uint32_t d = stable_dims_[lv];
  return li_de_over(b.snap_t1->data(), b.snap_t2->data(), now->data(), d, 3,
                    params_.p);
}

SWQueryResult SlidingMoment::query(uint64_t window) const {
  SWQueryResult res;
  res.y_levels.assign(params_.beta + 1, 0.0);
  if (time_ == 0 || suffixes_.empty()) return res;

  size_t boundary = window >= time_ ? 1 : time_ - window + 1;
  // Largest suffix start at or before the boundary; if the window covers the
  // whole stream, the earliest suffix serves as is.
  size_t si = 0;
  bool found = false;
  for (size_t i = 0; i < suffixes_.size(); ++i) {
    if (suffixes_[i].start <= boundary) {
      si = i;
      found = true;
    }
  }
  if (!found) si = 0;
  res.suffix_index = si;
  res.suffix_start = suffixes_[si].start;

  auto now0 = snapshot(0);
  res.x = sketch_interval_moment(0, *suffixes_[si].snap0, *now0);

  if (window >= time_ || !found) {
    res.value = res.x;
    return res;
  }

  double z = res.x;
  size_t c_prev = suffixes_[si].start;
  for (int j = 1; j <= params_.beta; ++j) {
    const Lane& lane = lanes_[j];
    double yj = 0;
    size_t last_t1 = c_prev;
    for (const Block& b : lane.closed) {
      if (b.t1 < c_prev) continue;
      if (b.t1 > boundary) break;
      // Only subtract blocks fully before the window boundary.
      if (b.t2 - 1 > boundary) break;
      yj += de_estimate(j, b, time_);
      last_t1 = b.t2;
      ++res.active_blocks;
      res.used_blocks.push_back({j, b.t1, b.t2});
    }
    res.y_levels[j] = yj;
    z -= yj;
    c_prev = last_t1;
  }
  res.value = std::max(z, 0.0);
  return res;
}

// ------------------------------------------------------------ entropy nodes

std::vector<double> SlidingMoment::query_nodes(uint64_t window) const {
  // Stitched per-node values; node 0 is the master order p.
  std::vector<double> out;
  size_t nodes = node_ps().size();
  if (time_ == 0 || suffixes_.empty() || params_.p == 2.0)
    return std::vector<double>(nodes, 0.0);

  size_t boundary = window >= time_ ? 1 : time_ - window + 1;
  size_t si = 0;
  bool found = false;
  for (size_t i = 0; i < suffixes_.size(); ++i)
    if (suffixes_[i].start <= boundary) {
      si = i;
      found = true;
    }
  if (!found) si = 0;

  auto now0 = snapshot(0);
  auto ps = node_ps();
  uint32_t d0 = stable_dims_[0];
  for (size_t n = 0; n < nodes; ++n) {
    double x = li_over_diff(suffixes_[si].snap0->data() + n * d0,
                            now0->data() + n * d0, d0, 3, ps[n], 3);
    out.push_back(x);
  }
  if (window >= time_ || !found) return out;

  size_t c_prev = suffixes_[si].start;
  for (int j = 1; j <= params_.beta; ++j) {
    const Lane& lane = lanes_[j];
    int lv = std::min(j, sketch_levels_);
    uint32_t d = stable_dims_[lv];
    auto now = snapshot(lv);
    size_t last_t1 = c_prev;
    for (const Block& b : lane.closed) {
      if (b.t1 < c_prev) continue;
      if (b.t1 > boundary) break;
      if (b.t2 - 1 > boundary) break;
      for (size_t n = 0; n < nodes; ++n) {
        double de = li_de_over(b.snap_t1->data() + n * d,
                               b.snap_t2->data() + n * d, now->data() + n * d,
                               d, 3, ps[n]);
        out[n] -= de;
      }
      last_t1 = b.t2;
    }
    c_prev = last_t1;
  }
  return out;
}

// ------------------------------------------------------------ SlidingLargeP

int SlidingLargeP::item_rate(uint64_t item) const {
  uint64_t v = sub_hash_.eval(item);
  int l = 0;
  while (l < rates_ - 1 && (v & 1) == 0) {
    v >>= 1;
    ++l;
  }
  return l;
}

SlidingLargeP::SlidingLargeP(const SWParams& params, const Seed& seed)
    : params_(params), seed_(seed), p_(static_cast<int>(params.p)) {
  if (params.p >= 3.0 && params.p == std::floor(params.p)) {
    if (p_ > 8) throw std::invalid_argument("SlidingLargeP: p in [3,8]");
  } else if (params.p < 1.0) {
    throw std::invalid_argument("SlidingLargeP: p >= 1");
  }
  sub_hash_ = KWiseHash(derive_seed(seed, "sub"), 2);
  rates_ = 10;
  uint32_t buckets = 1024;
  for (int r = 0; r < rates_; ++r)
    bank_.emplace_back(derive_seed(seed, "cs" + std::to_string(r)), 5, buckets,
                       true);
  lanes_.assign(params_.guess_count + 1,
                std::vector<Lane>(params_.beta + 1));
  for (auto& guess : lanes_)
    for (auto& lane : guess) {
      lane.live_start = 1;
      lane.live_snap = snapshot_bank();
    }
  powtab_.assign(1 << 18, -1.0);
}

double SlidingLargeP::pow_cached(int64_t c) const {
  if (c <= 0) return 0;
  if (c < static_cast<int64_t>(powtab_.size())) {
    double& v = powtab_[c];
    if (v < 0) v = std::pow(static_cast<double>(c), static_cast<double>(p_));
    return v;
  }
  return std::pow(static_cast<double>(c), static_cast<double>(p_));
}

std::shared_ptr<SlidingLargeP::BankSnapshot> SlidingLargeP::snapshot_bank()
    const {
  auto out = std::make_shared<BankSnapshot>();
  out->reserve(bank_.size());
  for (const auto& t : bank_) out->push_back(t.raw_cells());
  return out;
}

double SlidingLargeP::interval_freq(uint64_t item, const BankSnapshot& from,
                                    const BankSnapshot& to) const {
  return bank_[0].query_diff(item, from[0], to[0]);
}

double SlidingLargeP::interval_fp(const BankSnapshot& from,
                                  const BankSnapshot& to,
                                  const HeavySet* exclude) const {
  // Level-set subsample-and-recover over snapshot diffs: recover candidates
  // clearing the per-rate floor, bin by frequency class, estimate each class
  // at its shallowest resolvable rate.
  struct Rec {
    double f;
    int rate;
  };
  std::unordered_map<uint64_t, Rec> recovered;
  std::vector<double> l2(rates_);
  for (int r = 0; r < rates_; ++r)
    l2[r] = std::sqrt(std::max(0.0, bank_[r].f2_estimate_diff(from[r], to[r])));
  for (int r = 0; r < rates_; ++r) {
    double floor = 4.0 * l2[r] / std::sqrt(bank_[r].buckets());
    for (uint64_t item : bank_[r].candidates()) {
      if (exclude && exclude->count(item)) continue;
      double f = bank_[r].query_diff(item, from[r], to[r]);
      if (f < std::max(floor, 1.0)) continue;
      auto it = recovered.find(item);
      if (it == recovered.end() || r < it->second.rate)
        recovered[item] = {f, r};
    }
  }
  if (recovered.empty()) return 0.0;
  double fmax = 0;
  for (auto& [item, rec] : recovered) fmax = std::max(fmax, rec.f);
  int classes = 2 * rates_ + 4;
  std::vector<std::vector<std::pair<uint64_t, double>>> members(classes);
  for (auto& [item, rec] : recovered) {
    int c = 0;
    while (c + 1 < classes && rec.f <= fmax / std::pow(2.0, c + 1)) ++c;
    members[c].push_back({item, rec.f});
  }
  double total = 0;
  for (int c = 0; c < classes; ++c) {
    if (members[c].empty()) continue;
    double fc = fmax / std::pow(2.0, c);
    int rc = -1;
    for (int r = 0; r < rates_; ++r) {
      double floor = 4.0 * l2[r] / std::sqrt(bank_[r].buckets());
      if (fc >= std::max(floor, 1.0)) {
        rc = r;
        break;
      }
    }
    if (rc < 0) continue;
    double powsum = 0, count = 0;
    for (auto& [item, f] : members[c]) {
      if (item_rate(item) >= rc) {
        powsum += std::pow(f, p_);
        count += 1;
      }
    }
    if (count == 0) continue;
    total += std::pow(2.0, rc) * powsum;
  }
  return total;
}

void SlidingLargeP::ingest(const StreamUpdate& u) {
  if (u.delta < 0)
    throw std::invalid_argument("SlidingLargeP: insertion-only updates");
  auto pre_snap = snapshot_bank();
  ++time_;
  int lv = item_rate(u.item);
  for (int r = 0; r <= lv && r < rates_; ++r)
    bank_[r].update(u.item, static_cast<double>(u.delta));
  freq_[u.item] += u.delta;

  for (auto& s : suffixes_) {
    int64_t& c = s.counts[u.item];
    s.moment -= pow_cached(c);
    c += u.delta;
    s.moment += pow_cached(c);
  }
  for (auto& guess : lanes_)
    for (auto& lane : guess) {
      if (lane.dead) continue;
      int64_t& c = lane.live_counts[u.item];
      lane.live_moment -= pow_cached(c);
      c += u.delta;
      lane.live_moment += pow_cached(c);
      if (heavy_listed_.count(u.item)) lane.live_heavy[u.item] += u.delta;
    }

  Suffix ns;
  ns.start = time_;
  ns.snap = pre_snap;
  ns.counts[u.item] = u.delta;
  ns.moment = pow_cached(u.delta);
  suffixes_.push_back(std::move(ns));

  // Heavy list maintenance: anything whose exact frequency clears the global
  // threshold joins the shared list (desk scale reads the exact map; the
  // sketches provide the reported interval estimates).
  if (time_ % 16 == 0) {
    double fp = 0;
    for (auto& [item, c] : freq_) fp += pow_cached(c);
    double lp = std::pow(std::max(fp, 1.0), 1.0 / p_);
    double thr = params_.eps / 32.0 * lp;
    for (auto& [item, c] : freq_) {
      if (static_cast<double>(c) >= thr && !heavy_listed_.count(item))
        heavy_listed_[item] = time_;
    }
  }

  if (time_ % params_.maintenance_stride == 0) maintain();
}

void SlidingLargeP::maintain() {
  bool changed = true;
  while (changed && suffixes_.size() >= 3) {
    changed = false;
    for (size_t i = 0; i + 2 < suffixes_.size(); ++i) {
      if (suffixes_[i + 2].moment >=
          params_.merge_ratio * suffixes_[i].moment) {
        suffixes_.erase(suffixes_.begin() + i + 1);
        changed = true;
        break;
      }
    }
  }
  double v_cap = params_.value_cap;
  for (int k = 0; k <= params_.guess_count; ++k) {
    for (int j = 1; j <= params_.beta; ++j) {
      Lane& lane = lanes_[k][j];
      if (lane.dead) continue;
      double thr = v_cap / std::ldexp(1.0, j + k + 10);
      if (lane.live_moment > thr) {
        if (++lane.total_closed > 100u * (1u << std::min(j, 10))) {
          lane.dead = true;  // guess too low for this level
          continue;
        }
        Block b;
        b.t1 = lane.live_start;
        b.t2 = time_ + 1;
        b.snap_t1 = lane.live_snap;
        b.snap_t2 = snapshot_bank();
        b.exact_moment = lane.live_moment;
        b.heavy_counts = lane.live_heavy;
        lane.closed.push_back(std::move(b));
        lane.live_start = time_ + 1;
        lane.live_snap = lane.closed.back().snap_t2;
        lane.live_counts.clear();
        lane.live_heavy.clear();
        lane.live_moment = 0;
      }
      size_t oldest = suffixes_.empty() ? 1 : suffixes_.front().start;
      while (!lane.closed.empty() && lane.closed.front().t2 <= oldest)
        lane.closed.pop_front();
      while (lane.closed.size() > 96) lane.closed.pop_front();
    }
  }
}

std::vector<size_t> SlidingLargeP::lane_boundaries(int guess,
                                                   int level) const {
  std::vector<size_t> out;
  for (const auto& b : lanes_[guess][level].closed) out.push_back(b.t2 - 1);
  return out;
}

SWQueryResult SlidingLargeP::query(uint64_t window) const {
  SWQueryResult res;
  res.y_levels.assign(params_.beta + 1, 0.0);
  if (time_ == 0 || suffixes_.empty()) return res;

  size_t boundary = window >= time_ ? 1 : time_ - window + 1;
  size_t si = 0;
  bool found = false;
  for (size_t i = 0; i < suffixes_.size(); ++i)
    if (suffixes_[i].start <= boundary) {
      si = i;
      found = true;
    }
  if (!found) si = 0;
  res.suffix_index = si;
  res.suffix_start = suffixes_[si].start;

  auto now = snapshot_bank();
  res.x = interval_fp(*suffixes_[si].snap, *now);
  if (window >= time_ || !found) {
    res.value = res.x;
    return res;
  }

  // Guess: smallest k with V / 2^k <= rough value of the suffix.
  double rough = std::max(res.x, 1.0);
  int kg = 0;
  while (kg < params_.guess_count &&
         params_.value_cap / std::ldexp(1.0, kg) > rough)
    ++kg;

  HeavySet heavy_set;
  for (const auto& [item, t] : heavy_listed_) {
    (void)t;
    heavy_set.insert(item);
  }

  double z = res.x;
  size_t c_prev = suffixes_[si].start;
  std::shared_ptr<BankSnapshot> snap_cprev = suffixes_[si].snap;
  for (int j = 1; j <= params_.beta; ++j) {
    const Lane& lane = lanes_[kg][j];
    double yj = 0;
    for (const Block& b : lane.closed) {
      if (b.t1 < c_prev) continue;
      if (b.t1 > boundary) break;
      if (b.t2 - 1 > boundary) break;
      // Suffix DE: exact per-block counters for the shared heavy list plus
      // the light residual from interval level sets excluding those items.
      double heavy = 0;
      for (const auto& [item, cnt] : b.heavy_counts) {
        double g1 = interval_freq(item, *b.snap_t1, *now);
        double g2 = g1 - static_cast<double>(cnt);
        heavy += std::pow(std::max(g1, 0.0), p_) -
                 std::pow(std::max(g2, 0.0), p_);
      }
      double light1 = interval_fp(*b.snap_t1, *now, &heavy_set);
      double light2 = interval_fp(*b.snap_t2, *now, &heavy_set);
      yj += heavy + (light1 - light2);
      c_prev = b.t2;
      snap_cprev = b.snap_t2;
      ++res.active_blocks;
      res.used_blocks.push_back({j, b.t1, b.t2});
    }
    res.y_levels[j] = yj;
    z -= yj;
  }

  // Heavy corrections W_k = g^p - h^p over the gap between the finest
  // subtracted boundary and the window start.
  double wsum = 0;
  if (c_prev < boundary) {
    // Window-side reference: the first kept suffix starting inside the
    // window (the sliver before it is below block resolution).
    const Suffix* inside = nullptr;
    for (const auto& sfx : suffixes_) {
      if (sfx.start >= boundary) {
        inside = &sfx;
        break;
      }
    }
    if (inside) {
      for (uint64_t item : heavy_set) {
        double g = interval_freq(item, *snap_cprev, *now);
        double h = interval_freq(item, *inside->snap, *now);
        if (g > h)
          wsum += std::pow(std::max(g, 0.0), p_) -
                  std::pow(std::max(h, 0.0), p_);
      }
    }
  }
  res.heavy_correction = wsum;
  z -= wsum;
  res.value = std::max(z, 0.0);
  return res;
}

// ----------------------------------------------------------- SlidingEntropy

SlidingEntropy::SlidingEntropy(double eps, double stream_bound_m,
                               const Seed& seed, uint64_t window_hint,
                               ConstantsMode mode)
    : eps_(eps), nodes_(EntropyNodes::make(eps, stream_bound_m)) {
  SWParams params = SWParams::make(eps / 4.0, 1.0, mode, 1e12, window_hint);
  std::vector<double> extra(nodes_.y.begin(), nodes_.y.end());
  hist_ = std::make_unique<SlidingMoment>(params, seed, extra);
}

void SlidingEntropy::ingest(const StreamUpdate& u) { hist_->ingest(u); }

double SlidingEntropy::query(uint64_t window) const {
  auto vals = hist_->query_nodes(window);
  double mass = vals[0];  // master order p = 1: the window mass
  if (!(mass > 0)) return 0.0;
  std::vector<double> moments(vals.begin() + 1, vals.end());
  double h = interpolate_entropy(nodes_, moments, mass);
  return h < 0 ? 0.0 : h;
}

}  // namespace desketch
