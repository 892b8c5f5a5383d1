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

#include "desketch/robust.hpp"

#include <algorithm>
#include <cmath>

#include "desketch/f0_sketch.hpp"
#include "desketch/fp_large.hpp"
#include "desketch/sign_sketch.hpp"
#include "desketch/stable_sketch.hpp"

namespace desketch {

RobustParams RobustParams::make(double eps, double C, ConstantsMode mode,
                                double delta, double log_n, double lambda) {
  RobustParams p;
  p.eps = eps;
  p.C = C;
  p.mode = mode;
  p.delta = delta;
  p.log_n = log_n;
  p.lambda = lambda > 0 ? lambda : 2.0 * log_n / eps;
  p.beta = static_cast<int>(std::ceil(std::log2(8.0 / eps)));
  p.phi = std::pow(2.0, (C - 1.0) / 4.0);

  p.gamma.assign(p.beta + 1, 0.0);
  p.eta_k.assign(p.beta + 1, 0.0);

  if (mode == ConstantsMode::Paper) {
    // Algorithm lines verbatim; at C = 1 the zeta formula degenerates, so we
    // adopt zeta := 1 there (eta = eps/64, the value the C = 1 analysis uses).
    p.zeta = C > 1.0 ? 2.0 / (std::pow(2.0, (C - 1.0) / 4.0) - 1.0) : 1.0;
    p.eta = eps / (64.0 * p.zeta);
    p.tracker_eta = p.eta;
    for (int j = 1; j <= p.beta; ++j) {
      p.gamma[j] = std::min(1.0, std::ldexp(p.eta, j - 1));  // 2^{j-1} eta
      p.eta_k[j] =
          C == 1.0 ? p.eta / p.beta : p.eta / std::pow(p.phi, p.beta - j);
    }
  } else {
    // Practical: the same ladder shapes with the ratios sized to the
    // realized block differences (about 2^{k-1} eps/4 at level k) and the
    // per-level accuracies sized for quadrature accumulation instead of the
    // worst-case union bound.
    p.zeta = 1.0;
    p.eta = eps / 4.0;
    p.tracker_eta = eps / 8.0;
    for (int j = 1; j <= p.beta; ++j) {
      p.gamma[j] = std::min(1.0, std::ldexp(p.eta, j - 1));
      p.eta_k[j] = C == 1.0 ? eps / 12.0
                            : (eps / 12.0) * std::pow(p.phi, j - p.beta);
    }
  }

  int inst_bound = max_inst_bound(p);
  p.delta_prime =
      delta / (64.0 * p.beta * (p.log_n / 0.9 + p.lambda) * inst_bound);
  return p;
}

int RobustParams::max_inst_bound(const RobustParams& p) {
  return static_cast<int>(std::ceil(64.0 / p.eps)) + 8;
}

int RobustParams::max_instances_per_level(int k) const {
  if (pool_cap_override > 0) return pool_cap_override;
  double cap = 64.0 / (std::ldexp(1.0, k) * eps);
  return static_cast<int>(std::ceil(cap)) + 8;
}

namespace {

FreqMap to_map(const FreqSnapshot& s) {
  FreqMap m;
  m.reserve(s.size() * 2);
  for (const auto& [item, c] : s) m[item] = c;
  return m;
}

double map_moment(const FreqMap& f, double p) {
  double s = 0;
  for (const auto& [item, c] : f) {
    if (c == 0) continue;
    s += p == 0.0 ? 1.0 : std::pow(std::abs(static_cast<double>(c)), p);
  }
  return s;
}

// ---------------------------------------------------------------- oracle --

class OracleTracker : public TrackerInstance {
 public:
  OracleTracker(double p, const FreqSnapshot& prefix)
      : p_(p), freq_(to_map(prefix)), moment_(map_moment(freq_, p)) {}

  void update(uint64_t item, double delta) override {
    int64_t& c = freq_[item];
    moment_ -= term(c);
    c += static_cast<int64_t>(delta);
    moment_ += term(c);
  }
  double query() const override { return moment_; }

 private:
  double term(int64_t c) const {
    if (c == 0) return 0;
    return p_ == 0.0 ? 1.0 : std::pow(std::abs(static_cast<double>(c)), p_);
  }
  double p_;
  FreqMap freq_;
  double moment_;
};

class OracleDE : public DEInstance {
 public:
  OracleDE(double p, const FreqSnapshot& pivot, const FreqSnapshot& live)
      : p_(p), freq_(to_map(pivot)) {
    pivot_moment_ = map_moment(freq_, p_);
    moment_ = pivot_moment_;
    frozen_ = true;
    for (const auto& [item, c] : live) update(item, static_cast<double>(c));
  }

  void update(uint64_t item, double delta) override {
    int64_t& c = freq_[item];
    moment_ -= term(c);
    c += static_cast<int64_t>(delta);
    moment_ += term(c);
    int64_t& sc = sfreq_[item];
    smoment_ -= term(sc);
    sc += static_cast<int64_t>(delta);
    smoment_ += term(sc);
  }
  void freeze_pivot() override { frozen_ = true; }
  double query() const override { return moment_ - pivot_moment_; }
  double suffix_value() const override { return smoment_; }

 private:
  double term(int64_t c) const {
    if (c == 0) return 0;
    return p_ == 0.0 ? 1.0 : std::pow(std::abs(static_cast<double>(c)), p_);
  }
  double p_;
  FreqMap freq_, sfreq_;
  double pivot_moment_ = 0, moment_ = 0, smoment_ = 0;
  bool frozen_ = false;
};

// -------------------------------------------------------------- sketches --

class F2Tracker : public TrackerInstance {
 public:
  F2Tracker(const Seed& seed, double acc, const FreqSnapshot& prefix) {
    TrackerConfig cfg;
    cfg.eps = acc;
    uint32_t cells = cfg.f2_cells(4.0);
    sketch_ = SignSketch(seed, cfg.f2_rows(), cells / cfg.f2_rows() + 1,
                         cfg.f2_groups());
    for (const auto& [item, c] : prefix)
      sketch_.update(item, static_cast<double>(c));
  }
  void update(uint64_t item, double delta) override {
    sketch_.update(item, delta);
  }
  double query() const override { return sketch_.f2_estimate(); }

 private:
  SignSketch sketch_;
};

class F2DE : public DEInstance {
 public:
  F2DE(const Seed& seed, double gamma, double eta, const FreqSnapshot& pivot,
       const FreqSnapshot& live) {
    DEConfig cfg;
    cfg.kind = DEKind::F2;
    cfg.gamma = gamma;
    cfg.eps = eta;
    cfg.delta = 0.05;
    cfg.c = 2.0;
    block_ = F2DiffBlock(seed, DEDimension::size(cfg), 4, 2);
    for (const auto& [item, c] : pivot)
      block_.update(item, static_cast<double>(c));
    block_.freeze();
    for (const auto& [item, c] : live)
      block_.update(item, static_cast<double>(c));
  }
  void update(uint64_t item, double delta) override {
    block_.update(item, delta);
  }
  void freeze_pivot() override {}
  double query() const override { return block_.estimate(); }
  double suffix_value() const override { return block_.live_f2(); }
  const F2DiffBlock& block() const { return block_; }

 private:
  F2DiffBlock block_;
};

class F0Tracker : public TrackerInstance {
 public:
  F0Tracker(const Seed& seed, double acc, const FreqSnapshot& prefix) {
    uint32_t cap = static_cast<uint32_t>(std::max(64.0, 16.0 / (acc * acc)));
    sketch_ = F0Sketch(seed, cap);
    for (const auto& [item, c] : prefix)
      if (c != 0) sketch_.update(item);
  }
  void update(uint64_t item, double) override { sketch_.update(item); }
  double query() const override { return sketch_.estimate(); }

 private:
  F0Sketch sketch_;
};

class F0DE : public DEInstance {
 public:
  F0DE(const Seed& seed, double gamma, double eta, const FreqSnapshot& pivot,
       const FreqSnapshot& live) {
    DEConfig cfg;
    cfg.kind = DEKind::F0;
    cfg.gamma = gamma;
    cfg.eps = eta;
    block_ = F0DiffBlock(seed, cfg);
    for (const auto& [item, c] : pivot)
      if (c != 0) block_.update(item);
    block_.freeze();
    for (const auto& [item, c] : live)
      if (c != 0) block_.update(item);
  }
  void update(uint64_t item, double) override { block_.update(item); }
  void freeze_pivot() override {}
  double query() const override { return block_.estimate(); }

 private:
  F0DiffBlock block_;
};

// Stable sketches evaluated at one or several moment orders; the orders
// share (theta, r) uniforms through the common seed, which correlates their
// errors and is what the entropy interpolation needs to differentiate away.
class FpSmallTracker : public TrackerInstance {
 public:
  FpSmallTracker(const Seed& seed, double acc, const FreqSnapshot& prefix,
                 const std::vector<double>& nodes) {
    double varf = li_variance_ratio(3.0, nodes[0]);
    varf = varf * varf - 1.0;
    uint32_t d = StableSketch::round_dim(
        static_cast<uint32_t>(
            std::max(48.0, 2.0 * 3.0 * std::max(varf, 0.5) / (acc * acc))),
        3);
    for (double p : nodes) sketches_.emplace_back(seed, p, d, 3, 3);
    for (const auto& [item, c] : prefix)
      for (auto& s : sketches_) s.update(item, static_cast<double>(c));
  }
  void update(uint64_t item, double delta) override {
    for (auto& s : sketches_) s.update(item, delta);
  }
  double query() const override { return sketches_[0].li_estimate(); }
  std::vector<double> node_values() const override {
    std::vector<double> v;
    v.reserve(sketches_.size());
    for (const auto& s : sketches_) v.push_back(s.li_estimate());
    return v;
  }

 private:
  std::vector<StableSketch> sketches_;
};

class FpSmallDE : public DEInstance {
 public:
  FpSmallDE(const Seed& seed, double gamma, double eta,
            const FreqSnapshot& pivot, const FreqSnapshot& live,
            const std::vector<double>& nodes) {
    for (double p : nodes) {
      DEConfig cfg;
      cfg.kind = DEKind::FpSmall;
      cfg.p = p;
      cfg.gamma = gamma;
      cfg.eps = eta;
      cfg.delta = 0.2;
      blocks_.emplace_back(seed, p, DEDimension::size(cfg), 1);
    }
    for (const auto& [item, c] : pivot)
      for (auto& b : blocks_) b.update(item, static_cast<double>(c));
    for (auto& b : blocks_) b.freeze();
    for (const auto& [item, c] : live)
      for (auto& b : blocks_) b.update(item, static_cast<double>(c));
  }
  void update(uint64_t item, double delta) override {
    for (auto& b : blocks_) b.update(item, delta);
  }
  void freeze_pivot() override {}
  double query() const override { return blocks_[0].estimate(); }
  std::vector<double> node_values() const override {
    std::vector<double> v;
    v.reserve(blocks_.size());
    for (const auto& b : blocks_) v.push_back(b.estimate());
    return v;
  }

 private:
  std::vector<FpSmallDiffBlock> blocks_;
};

class FpLargeTrackerInstance : public TrackerInstance {
 public:
  FpLargeTrackerInstance(const Seed& seed, double acc,
                         const FreqSnapshot& prefix, int p, uint64_t universe)
      : tracker_(seed, p, acc, 0.1, universe) {
    for (const auto& [item, c] : prefix)
      tracker_.update(item, static_cast<double>(c));
  }
  void update(uint64_t item, double delta) override {
    tracker_.update(item, delta);
  }
  double query() const override { return tracker_.estimate(); }

 private:
  FpLargeTracker tracker_;
};

class FpLargeDE : public DEInstance {
 public:
  FpLargeDE(const Seed& seed, double gamma, double eta,
            const FreqSnapshot& pivot, const FreqSnapshot& live, int p,
            uint64_t universe) {
    DEConfig cfg;
    cfg.kind = DEKind::FpLarge;
    cfg.p = p;
    cfg.gamma = gamma;
    cfg.eps = eta;
    cfg.universe = universe;
    block_ = std::make_unique<FpLargeDiffBlock>(seed, cfg);
    for (const auto& [item, c] : pivot)
      block_->update(item, static_cast<double>(c));
    block_->freeze();
    for (const auto& [item, c] : live)
      block_->update(item, static_cast<double>(c));
  }
  void update(uint64_t item, double delta) override {
    block_->update(item, delta);
  }
  void freeze_pivot() override {}
  double query() const override { return block_->estimate(); }

 private:
  std::unique_ptr<FpLargeDiffBlock> block_;
};

}  // namespace

class SnapshotNodeState {
 public:
  SnapshotNodeState(const Seed& seed, std::vector<double> nodes, uint32_t dim)
      : nodes_(std::move(nodes)) {
    // Plain means (one group): the stitched node values are differences of
    // Li estimates over one shared family, and coupling only cancels for the
    // mean combiner.
    for (double p : nodes_) sketches_.emplace_back(seed, p, dim, 3, 1);
  }

  void ingest(uint64_t item, double delta) {
    for (auto& s : sketches_) s.update(item, delta);
    mass_ += delta;
  }

  // Per-node Li estimates of the prefix so far. Instances freeze these at
  // birth; moment differences are the coupled z - z' estimator over the
  // shared family (differences of these values, NOT the moment of the
  // suffix vector, which differs for y != 1).
  std::vector<double> current_values() const {
    std::vector<double> out(nodes_.size());
    for (size_t n = 0; n < nodes_.size(); ++n)
      out[n] = sketches_[n].li_estimate();
    return out;
  }

  std::vector<double> values_from_origin() const { return current_values(); }

  double mass() const { return mass_; }
  size_t node_count() const { return nodes_.size(); }

 private:
  std::vector<double> nodes_;
  std::vector<StableSketch> sketches_;
  double mass_ = 0;
};

// Tracker and DE views over the shared node state; the master value driving
// the framework's switching is the exact stream mass (F1), which is
// deterministic and reveals nothing random.
class SnapshotNodeTracker : public TrackerInstance {
 public:
  explicit SnapshotNodeTracker(std::shared_ptr<SnapshotNodeState> state)
      : state_(std::move(state)) {}
  void update(uint64_t, double) override {}
  double query() const override { return state_->mass(); }
  std::vector<double> node_values() const override {
    auto v = state_->values_from_origin();
    v.insert(v.begin(), state_->mass());
    return v;
  }

 private:
  std::shared_ptr<SnapshotNodeState> state_;
};

struct SnapshotCapture {
  std::vector<double> values;
  double mass;
};

class SnapshotNodeDE : public DEInstance {
 public:
  SnapshotNodeDE(std::shared_ptr<SnapshotNodeState> state,
                 std::shared_ptr<const SnapshotCapture> at_reset)
      : state_(std::move(state)) {
    if (at_reset) {
      snap_values_ = at_reset->values;
      mass0_ = at_reset->mass;
    } else {
      snap_values_ = state_->current_values();
      mass0_ = state_->mass();
    }
  }
  void update(uint64_t, double) override {}
  void freeze_pivot() override {}
  double query() const override { return state_->mass() - mass0_; }
  double suffix_value() const override { return state_->mass() - mass0_; }
  std::vector<double> node_values() const override {
    auto v = state_->current_values();
    for (size_t i = 0; i < v.size(); ++i) v[i] -= snap_values_[i];
    v.insert(v.begin(), state_->mass() - mass0_);
    return v;
  }

 private:
  std::shared_ptr<SnapshotNodeState> state_;
  std::vector<double> snap_values_;  // Li estimates frozen at birth
  double mass0_;
};

SnapshotFpFactory::SnapshotFpFactory(const RobustParams& params,
                                     std::vector<double> nodes, uint32_t dim,
                                     const Seed& seed)
    : params_(params), nodes_(std::move(nodes)) {
  state_ = std::make_shared<SnapshotNodeState>(seed, nodes_, dim);
}

void SnapshotFpFactory::ingest(uint64_t item, double delta) {
  state_->ingest(item, delta);
}

std::shared_ptr<const void> SnapshotFpFactory::capture() {
  auto cap = std::make_shared<SnapshotCapture>();
  cap->values = state_->current_values();
  cap->mass = state_->mass();
  return cap;
}

std::unique_ptr<TrackerInstance> SnapshotFpFactory::make_tracker(
    const Seed&, double, const FreqSnapshot&) {
  return std::make_unique<SnapshotNodeTracker>(state_);
}

std::unique_ptr<DEInstance> SnapshotFpFactory::make_de(
    const Seed&, double, double, const FreqSnapshot&, const FreqSnapshot&,
    const std::shared_ptr<const void>& capture) {
  return std::make_unique<SnapshotNodeDE>(
      state_, std::static_pointer_cast<const SnapshotCapture>(capture));
}

std::unique_ptr<TrackerInstance> OracleFactory::make_tracker(
    const Seed&, double, const FreqSnapshot& prefix) {
  return std::make_unique<OracleTracker>(p_, prefix);
}
std::unique_ptr<DEInstance> OracleFactory::make_de(
    const Seed&, double, double, const FreqSnapshot& pivot,
    const FreqSnapshot& live, const std::shared_ptr<const void>&) {
  return std::make_unique<OracleDE>(p_, pivot, live);
}

std::unique_ptr<TrackerInstance> F2Factory::make_tracker(
    const Seed& seed, double acc, const FreqSnapshot& prefix) {
  return std::make_unique<F2Tracker>(seed, acc, prefix);
}
std::unique_ptr<DEInstance> F2Factory::make_de(
    const Seed& seed, double gamma, double eta, const FreqSnapshot& pivot,
    const FreqSnapshot& live, const std::shared_ptr<const void>&) {
  return std::make_unique<F2DE>(seed, gamma, eta, pivot, live);
}

std::unique_ptr<TrackerInstance> F0Factory::make_tracker(
    const Seed& seed, double acc, const FreqSnapshot& prefix) {
  return std::make_unique<F0Tracker>(seed, acc, prefix);
}
std::unique_ptr<DEInstance> F0Factory::make_de(
    const Seed& seed, double gamma, double eta, const FreqSnapshot& pivot,
    const FreqSnapshot& live, const std::shared_ptr<const void>&) {
  return std::make_unique<F0DE>(seed, gamma, eta, pivot, live);
}

std::unique_ptr<TrackerInstance> FpSmallFactory::make_tracker(
    const Seed& seed, double acc, const FreqSnapshot& prefix) {
  // Dense stable trackers scale as 1/acc^2; a Z_a error of eps/4 fits the
  // output budget, so relax below that floor.
  double acc_eff = std::max(acc, params_.eps / 4.0);
  return std::make_unique<FpSmallTracker>(seed, acc_eff, prefix, nodes_);
}
std::unique_ptr<DEInstance> FpSmallFactory::make_de(
    const Seed& seed, double gamma, double eta, const FreqSnapshot& pivot,
    const FreqSnapshot& live, const std::shared_ptr<const void>&) {
  return std::make_unique<FpSmallDE>(seed, gamma, eta, pivot, live, nodes_);
}

std::unique_ptr<TrackerInstance> FpLargeFactory::make_tracker(
    const Seed& seed, double acc, const FreqSnapshot& prefix) {
  return std::make_unique<FpLargeTrackerInstance>(seed, acc, prefix, p_,
                                                  universe_);
}
std::unique_ptr<DEInstance> FpLargeFactory::make_de(
    const Seed& seed, double gamma, double eta, const FreqSnapshot& pivot,
    const FreqSnapshot& live, const std::shared_ptr<const void>&) {
  return std::make_unique<FpLargeDE>(seed, gamma, eta, pivot, live, p_,
                                     universe_);
}

// ---------------------------------------------------------------- ledger --

RobustLedger::RobustLedger(const RobustParams& params,
                           std::shared_ptr<EstimatorFactory> f,
                           const Seed& seed)
    : params_(params), factory_(std::move(f)), seed_(seed) {
  int nodes = factory_->node_count();
  z_a_nodes_.assign(nodes, 0.0);
  z_level_.assign(params_.beta + 1, 0.0);
  z_level_nodes_.assign(params_.beta + 1, std::vector<double>(nodes, 0.0));
  t_level_.assign(params_.beta + 1, 0);
  level_snap_.assign(params_.beta + 1, std::make_shared<FreqSnapshot>());
  level_capture_.assign(params_.beta + 1, nullptr);
  level_spawned_.assign(params_.beta + 1, 0);
  tracker_id_ = "A:1";
  tracker_ = factory_->make_tracker(derive_seed(seed_, tracker_id_),
                                    params_.tracker_eta, FreqSnapshot{});
}

std::shared_ptr<FreqSnapshot> RobustLedger::snapshot_now() const {
  auto snap = std::make_shared<FreqSnapshot>();
  snap->reserve(freq_.size());
  for (const auto& [item, c] : freq_)
    if (c != 0) snap->push_back({item, c});
  return snap;
}

FreqSnapshot RobustLedger::delta_since(size_t t_from) const {
  FreqMap acc;
  for (size_t t = t_from; t < time_; ++t) {
    const auto& u = log_[t];
    acc[u.item] += u.delta;
  }
  FreqSnapshot out;
  out.reserve(acc.size());
  for (const auto& [item, c] : acc)
    if (c != 0) out.push_back({item, c});
  return out;
}

void RobustLedger::spawn_live(int level) {
  level = std::min(level, params_.beta);
  live_level_ = level;
  if (++level_spawned_[level] > params_.max_instances_per_level(level))
    throw CapacityError("RobustLedger: level " + std::to_string(level) +
                        " instance pool exhausted (a=" + std::to_string(a_) +
                        ", b=" + std::to_string(b_) + ")");
  uint64_t j_index = static_cast<uint64_t>(b_ + 1) >> level;
  live_de_id_ = "B:a" + std::to_string(a_) + ":k" + std::to_string(level) +
                ":j" + std::to_string(j_index) + ":n" +
                std::to_string(level_spawned_[level]);
  FreqSnapshot live_delta = delta_since(t_level_[level]);
  live_de_ = factory_->make_de(derive_seed(seed_, live_de_id_),
                               params_.gamma[level], params_.eta_k[level],
                               *level_snap_[level], live_delta,
                               level_capture_[level]);
  live_block_start_ = t_level_[level];
}

double RobustLedger::estimate_f() {
  if (a_ == 0 || !live_de_) return 0.0;
  uint64_t bp1 = static_cast<uint64_t>(b_) + 1;
  int k = numbits(bp1);
  double x = z_a_;
  for (int i = 1; i <= k - 1; ++i) {
    int z = lsb(bp1, k + 1 - i);  // z_1 > ... > z_{k-1}
    x += z_level_[std::min(z, params_.beta)];
  }
  x += live_de_->query();
  return x;
}

std::vector<double> RobustLedger::estimate_f_nodes() const {
  int nodes = factory_->node_count();
  std::vector<double> x(z_a_nodes_);
  if (a_ == 0 || !live_de_) return std::vector<double>(nodes, 0.0);
  uint64_t bp1 = static_cast<uint64_t>(b_) + 1;
  int k = numbits(bp1);
  for (int i = 1; i <= k - 1; ++i) {
    int z = std::min(lsb(bp1, k + 1 - i), params_.beta);
    for (int n = 0; n < nodes; ++n) x[n] += z_level_nodes_[z][n];
  }
  auto live = live_de_->node_values();
  for (int n = 0; n < nodes; ++n) x[n] += live[n];
  return x;
}

std::vector<double> RobustLedger::stitched_nodes() const {
  return estimate_f_nodes();
}

double RobustLedger::step(const StreamUpdate& u) {
  if (u.delta < 0)
    throw std::invalid_argument("RobustLedger: insertion-only updates");
  ++time_;
  log_.push_back(u);
  freq_[u.item] += u.delta;
  tracker_->update(u.item, static_cast<double>(u.delta));
  if (live_de_) live_de_->update(u.item, static_cast<double>(u.delta));

  double x = tracker_->query();
  if (x > std::ldexp(1.0, a_)) {
    // Switch sketch at the top layer.
    ++a_;
    b_ = 0;
    z_a_ = x;
    z_a_nodes_ = tracker_->node_values();
    reveals_.push_back({"tracker", tracker_id_, time_, x});
    if (on_freeze) on_freeze(0, 0, time_);
    auto snap = snapshot_now();
    auto cap = factory_->capture();
    for (int j = 1; j <= params_.beta; ++j) {
      t_level_[j] = time_;
      level_snap_[j] = snap;
      level_capture_[j] = cap;
      z_level_[j] = 0;
      std::fill(z_level_nodes_[j].begin(), z_level_nodes_[j].end(), 0.0);
      level_spawned_[j] = 0;
    }
    if (a_ > params_.max_top_levels())
      throw CapacityError("RobustLedger: top-level pool exhausted");
    tracker_id_ = "A:" + std::to_string(a_ + 1);
    tracker_ = factory_->make_tracker(derive_seed(seed_, tracker_id_),
                                      params_.tracker_eta, *snap);
    spawn_live(1);
  }

  double xe = estimate_f();
  if (a_ > 0 && xe > (1.0 + (b_ + 1) * params_.eps / 8.0) * z_a_) {
    // Switch sketch at the lower layer: freeze the live block.
    ++b_;
    int k = std::min<int>(lsb(static_cast<uint64_t>(b_), 1), params_.beta);
    double v = live_de_->query();
    z_level_[k] = v;
    z_level_nodes_[k] = live_de_->node_values();
    reveals_.push_back({"freeze", live_de_id_, time_, v});
    if (on_freeze) on_freeze(k, live_block_start_, time_);
    auto snap = snapshot_now();
    auto cap = factory_->capture();
    for (int j = 1; j <= k; ++j) {
      t_level_[j] = time_;
      level_snap_[j] = snap;
      level_capture_[j] = cap;
    }
    spawn_live(std::min<int>(lsb(static_cast<uint64_t>(b_) + 1, 1),
                             params_.beta));
  }
  return output();
}

double RobustLedger::output() const {
  return (1.0 + b_ * params_.eps / 8.0) * z_a_;
}

std::vector<int> RobustLedger::frozen_levels() const {
  std::vector<int> out;
  for (int j = 1; j <= params_.beta; ++j)
    if (z_level_[j] != 0) out.push_back(j);
  return out;
}

size_t RobustLedger::live_instance_count() const {
  return (tracker_ ? 1u : 0u) + (live_de_ ? 1u : 0u);
}

// ------------------------------------------------------------- turnstile --

TurnstileLedger::TurnstileLedger(const RobustParams& params,
                                 std::shared_ptr<EstimatorFactory> f,
                                 const Seed& seed, double lambda)
    : params_(params), factory_(std::move(f)), seed_(seed), lambda_(lambda) {
  z_level_.assign(params_.beta + 1, 0.0);
  t_level_.assign(params_.beta + 1, 0);
  level_snap_.assign(params_.beta + 1, std::make_shared<FreqSnapshot>());
  live_.resize(params_.beta + 1);
  live_ids_.resize(params_.beta + 1);
  level_spawned_.assign(params_.beta + 1, 0);
  tracker_id_ = "A:1:t0";
  tracker_ = factory_->make_tracker(derive_seed(seed_, tracker_id_),
                                    params_.tracker_eta, FreqSnapshot{});
}

std::shared_ptr<FreqSnapshot> TurnstileLedger::snapshot_now() const {
  auto snap = std::make_shared<FreqSnapshot>();
  snap->reserve(freq_.size());
  for (const auto& [item, c] : freq_)
    if (c != 0) snap->push_back({item, c});
  return snap;
}

void TurnstileLedger::respawn_level(int level) {
  if (tau_ > static_cast<int64_t>(lambda_))
    throw CapacityError(
        "TurnstileLedger: twist budget exceeded (lambda underestimated)");
  uint64_t j_index = static_cast<uint64_t>(tau_) >> level;
  live_ids_[level] = "B:a" + std::to_string(a_) + ":k" +
                     std::to_string(level) + ":j" + std::to_string(j_index) +
                     ":n" + std::to_string(++level_spawned_[level]);
  auto snap = snapshot_now();
  level_snap_[level] = snap;
  t_level_[level] = time_;
  live_[level] =
      factory_->make_de(derive_seed(seed_, live_ids_[level]),
                        params_.gamma[level], params_.eta_k[level], *snap,
                        FreqSnapshot{}, factory_->capture());
}

void TurnstileLedger::respawn_all(const char*) {
  for (int j = 1; j <= params_.beta; ++j) {
    z_level_[j] = 0;
    respawn_level(j);
  }
}

int TurnstileLedger::live_query_level() const {
  int64_t bp1 = b_ + 1;
  if (bp1 < 1) return 1;
  return std::min<int>(lsb(static_cast<uint64_t>(bp1), 1), params_.beta);
}

double TurnstileLedger::estimate_f() {
  if (a_ == 0) return 0.0;
  double x = anchor_;
  int64_t bp1 = b_ + 1;
  if (bp1 >= 1) {
    int k = numbits(static_cast<uint64_t>(bp1));
    for (int i = 1; i <= k - 1; ++i)
      x += z_level_[std::min(lsb(static_cast<uint64_t>(bp1), k + 1 - i),
                             params_.beta)];
  }
  int zk = live_query_level();
  if (live_[zk]) x += live_[zk]->query();
  return x;
}

double TurnstileLedger::step(const StreamUpdate& u) {
  ++time_;
  freq_[u.item] += u.delta;
  tracker_->update(u.item, static_cast<double>(u.delta));
  for (auto& d : live_)
    if (d) d->update(u.item, static_cast<double>(u.delta));

  double x = tracker_->query();
  if (x > std::ldexp(1.0, a_)) {
    // Switch sketch at the top layer (rise).
    ++a_;
    b_ = 0;
    z_by_a_[a_] = x;
    anchor_ = x;
    reveals_.push_back({"tracker", tracker_id_, time_, x});
    ++tau_;
    tracker_id_ = "A:" + std::to_string(a_ + 1) + ":t" + std::to_string(tau_);
    tracker_ = factory_->make_tracker(derive_seed(seed_, tracker_id_),
                                      params_.tracker_eta, *snapshot_now());
    respawn_all("rise");
    return output();
  }
  if (a_ > 1 && x < std::ldexp(1.0, a_ - 1)) {
    // Top-layer fall: rebase on the (now revealed) fresh tracker reading and
    // recompute b relative to the old frozen Z, which is already public.
    --a_;
    reveals_.push_back({"tracker", tracker_id_, time_, x});
    ++tau_;
    double za = z_by_a_.count(a_) ? z_by_a_[a_] : std::max(x, 1.0);
    z_by_a_[a_] = za;
    b_ = static_cast<int64_t>(std::floor(8.0 / params_.eps * (x / za - 1.0)));
    int64_t bmin = -static_cast<int64_t>(std::ceil(4.0 / params_.eps));
    b_ = std::max(b_, bmin);
    anchor_ = x;
    tracker_id_ = "A:" + std::to_string(a_ + 1) + ":t" + std::to_string(tau_);
    tracker_ = factory_->make_tracker(derive_seed(seed_, tracker_id_),
                                      params_.tracker_eta, *snapshot_now());
    respawn_all("fall");
    return output();
  }

  double za = z_by_a_.count(a_) ? z_by_a_[a_] : 0.0;
  double xe = estimate_f();
  if (a_ > 0 && xe > (1.0 + (b_ + 1) * params_.eps / 8.0) * za) {
    // Lower-layer rise: freeze the live block at its granularity.
    int zk = live_query_level();
    double v = live_[zk]->query();
    ++b_;
    int k = b_ >= 1 ? std::min<int>(lsb(static_cast<uint64_t>(b_), 1),
                                    params_.beta)
                    : 1;
    (void)k;
    z_level_[zk] = v;
    reveals_.push_back({"freeze", live_ids_[zk], time_, v});
    ++tau_;
    auto snap = snapshot_now();
    for (int j = 1; j <= zk; ++j) {
      t_level_[j] = time_;
      level_snap_[j] = snap;
      respawn_level(j);
    }
  } else if (a_ > 0 && xe < (1.0 + (b_ - 1) * params_.eps / 8.0) * za) {
    // Lower-layer fall: reveal the live block, rebase the ladder.
    int zk = live_query_level();
    reveals_.push_back({"freeze", live_ids_[zk], time_, live_[zk]->query()});
    ++tau_;
    --b_;
    int64_t bmin = -static_cast<int64_t>(std::ceil(4.0 / params_.eps));
    b_ = std::max(b_, bmin);
    anchor_ = xe;
    respawn_all("fall-b");
  } else if (a_ > 0) {
    // Mid-block refresh: a suffix grew to half its ratio budget even though
    // the difference did not; reveal and rebase.
    for (int k = 1; k <= params_.beta; ++k) {
      if (!live_[k]) continue;
      if (live_[k]->suffix_value() >
          params_.gamma[k] / 2.0 * std::max(std::abs(xe), 1.0)) {
        int zk = live_query_level();
        reveals_.push_back(
            {"refresh", live_ids_[zk], time_, live_[zk]->query()});
        ++tau_;
        anchor_ = xe;
        respawn_all("refresh");
        break;
      }
    }
  }
  return output();
}

double TurnstileLedger::output() const {
  double za = z_by_a_.count(a_) ? z_by_a_.at(a_) : 0.0;
  return (1.0 + b_ * params_.eps / 8.0) * za;
}

// ----------------------------------------------------------- heavy hitters --

RobustHeavyHitters::RobustHeavyHitters(const RobustParams& params,
                                       const Seed& seed)
    : params_(params), seed_(seed) {
  ledger_ = std::make_unique<RobustLedger>(
      params, std::make_shared<F2Factory>(params), derive_seed(seed, "f2"));
  uint32_t buckets = static_cast<uint32_t>(
      std::max(64.0, 16.0 * params.beta * params.beta /
                         (params.eps * params.eps)));
  block_cs_ = std::make_unique<CountSketchTable>(derive_seed(seed, "cs0"), 5,
                                                 buckets, true);
  ledger_->on_freeze = [this](int level, size_t, size_t) {
    // Harvest the block that just ended at its granularity threshold, then
    // start a fresh table for the next block.
    double block_f2 = std::max(block_cs_->f2_estimate(), 1.0);
    double scale = std::ldexp(1.0, std::max(0, level) / 2);  // 2^{k/2}
    harvest(*block_cs_, block_f2, scale);
    uint32_t buckets = block_cs_->buckets();
    ++epoch_;
    block_cs_ = std::make_unique<CountSketchTable>(
        derive_seed(seed_, "cs" + std::to_string(epoch_)), 5, buckets, true);
  };
}

void RobustHeavyHitters::harvest(const CountSketchTable& cs, double block_f2,
                                 double scale) {
  double threshold =
      params_.eps / (2.0 * params_.beta) * scale * std::sqrt(block_f2);
  for (uint64_t item : cs.candidates()) {
    if (reported_.count(item)) continue;
    double est = cs.query(item);
    if (est >= std::max(threshold, 1.0)) reported_[item] = {est, 0};
  }
}

double RobustHeavyHitters::step(const StreamUpdate& u) {
  block_cs_->update(u.item, static_cast<double>(u.delta));
  auto it = reported_.find(u.item);
  if (it != reported_.end()) it->second.since += u.delta;
  return ledger_->step(u);
}

std::vector<HeavyHitter> RobustHeavyHitters::report() const {
  double f2 = std::max(ledger_->output(), 1.0);
  double l2 = std::sqrt(f2);
  std::vector<HeavyHitter> out;
  for (const auto& [item, rec] : reported_) {
    double f = rec.base + static_cast<double>(rec.since);
    if (f >= 0.75 * params_.eps * l2) out.push_back({item, f});
  }
  std::sort(out.begin(), out.end(),
            [](const HeavyHitter& a, const HeavyHitter& b) {
              return a.frequency > b.frequency;
            });
  return out;
}

}  // namespace desketch
