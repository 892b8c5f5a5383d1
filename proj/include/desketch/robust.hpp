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

#ifndef DESKETCH_ROBUST_HPP
#define DESKETCH_ROBUST_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "desketch/countsketch.hpp"
#include "desketch/diff.hpp"
#include "desketch/rand.hpp"
#include "desketch/stream.hpp"

namespace desketch {

// Position (1-indexed) of the i-th least significant set bit.
inline int numbits(uint64_t x) { return __builtin_popcountll(x); }

inline int lsb(uint64_t x, int i) {
  if (i < 1 || numbits(x) < i)
    throw std::domain_error("lsb: fewer than i set bits");
  int pos = 0;
  while (true) {
    ++pos;
    if (x & 1) {
      if (--i == 0) return pos;
    }
    x >>= 1;
  }
}

class CapacityError : public std::runtime_error {
 public:
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

enum class ConstantsMode { Paper, Practical };

// Parameter ladder for the robust frameworks. Paper mode reproduces the
// pseudocode formulas verbatim (with zeta := 1 at C = 1, where the displayed
// formula degenerates); practical mode keeps the ladder shapes but sizes the
// ratios to the realized block differences and drops the proof slack.
struct RobustParams {
  double eps = 0.1;
  double C = 1.0;
  ConstantsMode mode = ConstantsMode::Practical;
  double delta = 1.0 / 3.0;
  double log_n = 20.0;
  double lambda = 0.0;  // twist budget; 0 derives a default from eps/log_n

  int beta = 0;
  double zeta = 1.0, eta = 0.0, phi = 1.0;
  double delta_prime = 0.0;
  double tracker_eta = 0.0;
  std::vector<double> gamma;  // 1-based: gamma[k], k in [1, beta]
  std::vector<double> eta_k;

  static RobustParams make(double eps, double C, ConstantsMode mode,
                           double delta = 1.0 / 3.0, double log_n = 20.0,
                           double lambda = 0.0);
  static int max_inst_bound(const RobustParams& p);

  int max_instances_per_level(int k) const;
  int max_top_levels() const { return 64; }
  int pool_cap_override = 0;  // tests: shrink the per-level pools
};

// One reveal per instance: the structural core of adversarial robustness.
struct RevealEvent {
  std::string event;     // "tracker" | "freeze" | "refresh"
  std::string instance;  // unique instance id
  size_t time = 0;
  double value = 0;
};

// Sub-estimator interfaces. Instances may be created mid-stream: by
// linearity (or set semantics for F0) feeding the maintained exact frequency
// state produces bit-identical sketch state to having ingested from the
// stream origin, so materialized instances are equivalent to from-birth ones.
class TrackerInstance {
 public:
  virtual ~TrackerInstance() = default;
  virtual void update(uint64_t item, double delta) = 0;
  virtual double query() const = 0;
  virtual std::vector<double> node_values() const { return {query()}; }
};

class DEInstance {
 public:
  virtual ~DEInstance() = default;
  virtual void update(uint64_t item, double delta) = 0;
  virtual void freeze_pivot() = 0;
  virtual double query() const = 0;
  virtual std::vector<double> node_values() const { return {query()}; }
  // Moment of the block's own suffix; the turnstile refresh branch restarts
  // a block whose suffix grew even though its difference did not.
  virtual double suffix_value() const { return std::abs(query()); }
};

using FreqMap = std::unordered_map<uint64_t, int64_t>;
using FreqSnapshot = std::vector<std::pair<uint64_t, int64_t>>;

class EstimatorFactory {
 public:
  virtual ~EstimatorFactory() = default;
  // Tracker preloaded with the prefix frequencies.
  virtual std::unique_ptr<TrackerInstance> make_tracker(
      const Seed& seed, double accuracy, const FreqSnapshot& prefix) = 0;
  // Difference estimator with the pivot preloaded and frozen and the elapsed
  // suffix (live_delta) already applied. `capture` is whatever this factory
  // returned from capture() at the pivot's reset time (instances may spawn
  // later than the reset they anchor to).
  virtual std::unique_ptr<DEInstance> make_de(
      const Seed& seed, double gamma, double eta, const FreqSnapshot& pivot,
      const FreqSnapshot& live_delta,
      const std::shared_ptr<const void>& capture) = 0;
  // Called at every reset boundary; snapshot-backed factories record their
  // state here.
  virtual std::shared_ptr<const void> capture() { return nullptr; }
  virtual int node_count() const { return 1; }
};

// Exact-oracle factory: zero-error sub-estimators for control-flow tests.
class OracleFactory : public EstimatorFactory {
 public:
  explicit OracleFactory(double p) : p_(p) {}
  std::unique_ptr<TrackerInstance> make_tracker(
      const Seed&, double, const FreqSnapshot& prefix) override;
  std::unique_ptr<DEInstance> make_de(
      const Seed&, double, double, const FreqSnapshot& pivot,
      const FreqSnapshot& live_delta,
      const std::shared_ptr<const void>& capture) override;

 private:
  double p_;  // moment order; 0 counts distinct items
};

// Sketch-backed factories.
class F2Factory : public EstimatorFactory {
 public:
  explicit F2Factory(const RobustParams& params) : params_(params) {}
  std::unique_ptr<TrackerInstance> make_tracker(
      const Seed& seed, double acc, const FreqSnapshot& prefix) override;
  std::unique_ptr<DEInstance> make_de(
      const Seed& seed, double gamma, double eta, const FreqSnapshot& pivot,
      const FreqSnapshot& live_delta,
      const std::shared_ptr<const void>& capture) override;

 private:
  RobustParams params_;
};

class F0Factory : public EstimatorFactory {
 public:
  explicit F0Factory(const RobustParams& params) : params_(params) {}
  std::unique_ptr<TrackerInstance> make_tracker(
      const Seed& seed, double acc, const FreqSnapshot& prefix) override;
  std::unique_ptr<DEInstance> make_de(
      const Seed& seed, double gamma, double eta, const FreqSnapshot& pivot,
      const FreqSnapshot& live_delta,
      const std::shared_ptr<const void>& capture) override;

 private:
  RobustParams params_;
};

// F_p with p in (0,2), optionally evaluated at several moment orders that
// share their stable-variate uniforms (the entropy bundle's node set).
class FpSmallFactory : public EstimatorFactory {
 public:
  FpSmallFactory(const RobustParams& params, std::vector<double> nodes)
      : params_(params), nodes_(std::move(nodes)) {}
  std::unique_ptr<TrackerInstance> make_tracker(
      const Seed& seed, double acc, const FreqSnapshot& prefix) override;
  std::unique_ptr<DEInstance> make_de(
      const Seed& seed, double gamma, double eta, const FreqSnapshot& pivot,
      const FreqSnapshot& live_delta,
      const std::shared_ptr<const void>& capture) override;
  int node_count() const override { return static_cast<int>(nodes_.size()); }

 private:
  RobustParams params_;
  std::vector<double> nodes_;
};

// Multi-node factory for the entropy bundle: all instances read one shared
// per-node stable family through birth-time snapshots (per-instance
// independent matrices would cost n x d variates per reveal, infeasible at
// the entropy quantum), and the switching master value is the exact stream
// mass. The reveal bookkeeping is unchanged; the shared-randomness trade is
// recorded in the project notes.
class SnapshotFpFactory : public EstimatorFactory {
 public:
  SnapshotFpFactory(const RobustParams& params, std::vector<double> nodes,
                    uint32_t dim, const Seed& seed);
  void ingest(uint64_t item, double delta);
  std::unique_ptr<TrackerInstance> make_tracker(
      const Seed&, double, const FreqSnapshot& prefix) override;
  std::unique_ptr<DEInstance> make_de(
      const Seed&, double, double, const FreqSnapshot& pivot,
      const FreqSnapshot& live_delta,
      const std::shared_ptr<const void>& capture) override;
  int node_count() const override {
    return static_cast<int>(nodes_.size()) + 1;
  }

 private:
  RobustParams params_;
  std::vector<double> nodes_;
  std::shared_ptr<class SnapshotNodeState> state_;
};

class FpLargeFactory : public EstimatorFactory {
 public:
  FpLargeFactory(const RobustParams& params, int p, uint64_t universe)
      : params_(params), p_(p), universe_(universe) {}
  std::unique_ptr<TrackerInstance> make_tracker(
      const Seed& seed, double acc, const FreqSnapshot& prefix) override;
  std::unique_ptr<DEInstance> make_de(
      const Seed& seed, double gamma, double eta, const FreqSnapshot& pivot,
      const FreqSnapshot& live_delta,
      const std::shared_ptr<const void>& capture) override;

 private:
  RobustParams params_;
  int p_;
  uint64_t universe_;
};

// Insertion-only robust framework: sketch switching at the top layer,
// difference-estimator stitching at the lower layer, one-time reveals.
class RobustLedger {
 public:
  RobustLedger(const RobustParams& params, std::shared_ptr<EstimatorFactory> f,
               const Seed& seed);

  // Feeds one update and returns the public output (1 + b eps/8) Z_a.
  double step(const StreamUpdate& u);
  double output() const;

  // Stitched per-node estimates (entropy bundles); single node otherwise.
  std::vector<double> stitched_nodes() const;

  int a() const { return a_; }
  int64_t b() const { return b_; }
  size_t time() const { return time_; }
  const std::vector<RevealEvent>& reveal_log() const { return reveals_; }
  const FreqMap& exact_frequencies() const { return freq_; }

  // Frozen partial-sum levels currently set, for control-flow tests.
  std::vector<int> frozen_levels() const;
  int live_level() const { return live_level_; }

  size_t live_instance_count() const;

  // Hook invoked when a lower-layer block freezes: (level, reset snapshot,
  // live interval [from, to]); the heavy-hitter wrapper listens here.
  std::function<void(int level, size_t block_start, size_t block_end)>
      on_freeze;

 private:
  double estimate_f();
  std::vector<double> estimate_f_nodes() const;
  void spawn_live(int level);
  std::shared_ptr<FreqSnapshot> snapshot_now() const;
  FreqSnapshot delta_since(size_t t_from) const;

  RobustParams params_;
  std::shared_ptr<EstimatorFactory> factory_;
  Seed seed_;

  size_t time_ = 0;
  int a_ = 0;
  int64_t b_ = 0;
  double z_a_ = 0;
  std::vector<double> z_a_nodes_;
  std::vector<double> z_level_;                // Z_{a,k}
  std::vector<std::vector<double>> z_level_nodes_;
  std::vector<size_t> t_level_;                // t_{a,j} reset times
  std::vector<std::shared_ptr<FreqSnapshot>> level_snap_;
  std::vector<std::shared_ptr<const void>> level_capture_;
  std::vector<int> level_spawned_;             // instances used per level
  int live_level_ = 0;                         // level of the live block
  std::unique_ptr<DEInstance> live_de_;
  std::string live_de_id_;
  size_t live_block_start_ = 0;

  std::unique_ptr<TrackerInstance> tracker_;   // candidate A_{a+1}
  std::string tracker_id_;
  int tracker_index_ = 1;

  FreqMap freq_;
  UpdateSeq log_;
  std::vector<RevealEvent> reveals_;
};

// Turnstile framework, parameterized by a twist-number budget. Keeps live
// difference estimators at every level so the decrement and mid-block
// refresh branches can freeze any granularity.
class TurnstileLedger {
 public:
  TurnstileLedger(const RobustParams& params,
                  std::shared_ptr<EstimatorFactory> f, const Seed& seed,
                  double lambda);

  double step(const StreamUpdate& u);
  double output() const;

  int a() const { return a_; }
  int64_t b() const { return b_; }
  int64_t tau() const { return tau_; }
  const std::vector<RevealEvent>& reveal_log() const { return reveals_; }

 private:
  double estimate_f();
  int live_query_level() const;
  void respawn_level(int level);
  void respawn_all(const char* reason);
  std::shared_ptr<FreqSnapshot> snapshot_now() const;

  RobustParams params_;
  std::shared_ptr<EstimatorFactory> factory_;
  Seed seed_;
  double lambda_;

  size_t time_ = 0;
  int a_ = 0;
  int64_t b_ = 0;  // signed; negative tracks falls below Z_a
  int64_t tau_ = 0;
  double anchor_ = 0;  // revealed estimate of F at the last rebase
  std::unordered_map<int, double> z_by_a_;  // frozen Z per top index
  std::vector<double> z_level_;
  std::vector<size_t> t_level_;
  std::vector<std::shared_ptr<FreqSnapshot>> level_snap_;
  std::vector<std::unique_ptr<DEInstance>> live_;
  std::vector<std::string> live_ids_;
  std::vector<int> level_spawned_;
  std::unique_ptr<TrackerInstance> tracker_;
  std::string tracker_id_;
  int tracker_spawns_ = 0;

  FreqMap freq_;
  std::vector<RevealEvent> reveals_;
};

// L2 heavy hitters on top of the robust F2 framework: per-block CountSketch
// at the block's granularity threshold, plus exact counting of every item
// after it is first reported.
class RobustHeavyHitters {
 public:
  RobustHeavyHitters(const RobustParams& params, const Seed& seed);

  double step(const StreamUpdate& u);  // returns the robust F2 output
  std::vector<HeavyHitter> report() const;
  const RobustLedger& ledger() const { return *ledger_; }

 private:
  void harvest(const CountSketchTable& cs, double block_f2, double scale);

  RobustParams params_;
  Seed seed_;
  std::unique_ptr<RobustLedger> ledger_;
  std::unique_ptr<CountSketchTable> block_cs_;
  size_t block_start_ = 0;
  int epoch_ = 0;
  struct Reported {
    double base;          // estimate at report time
    int64_t since;        // exact count after report
  };
  std::unordered_map<uint64_t, Reported> reported_;
};

}  // namespace desketch

#endif  // DESKETCH_ROBUST_HPP
