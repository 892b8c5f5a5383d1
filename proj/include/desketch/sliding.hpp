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

#ifndef DESKETCH_SLIDING_HPP
#define DESKETCH_SLIDING_HPP

#include <cstdint>
#include <deque>
#include <unordered_set>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "desketch/countsketch.hpp"
#include "desketch/entropy.hpp"
#include "desketch/rand.hpp"
#include "desketch/robust.hpp"
#include "desketch/sign_sketch.hpp"
#include "desketch/stable_sketch.hpp"
#include "desketch/stream.hpp"

namespace desketch {

// (alpha, beta)-smoothness of F_p at accuracy eps: (eps, eps^p / p) for
// p >= 1 and (eps, eps) for 0 < p <= 1.
inline std::pair<double, double> smooth_params(double p, double eps) {
  if (p >= 1.0) return {eps, std::pow(eps, p) / p};
  return {eps, eps};
}

struct SWParams {
  double eps = 0.1;
  double p = 2.0;
  double delta = 1e-6;
  ConstantsMode mode = ConstantsMode::Practical;
  double q = 2.0;           // smoothness exponent
  int beta = 0;
  double eta = 0.0;
  std::vector<double> gamma;  // gamma_j = 2^{3-j}, clamped to 1
  double value_cap = 1e12;    // V, upper bound on F over the stream
  int guess_count = 0;        // ceil(log2 V) + 1; the guess engine uses it
  uint64_t window = 0;        // query horizon hint
  double merge_ratio = 0.0;   // suffix merge threshold (1 - beta_hat)
  int maintenance_stride = 1;
  int creation_stride = 1;

  static SWParams make(double eps, double p, ConstantsMode mode,
                       double value_cap = 1e12, uint64_t window = 0);
};

struct UsedBlock {
  int level;
  size_t t1, t2;  // pivot interval [t1, t2)
};

struct SWQueryResult {
  double value = 0;
  double x = 0;                  // fine tracker term
  std::vector<double> y_levels;  // subtracted per level
  double heavy_correction = 0;   // large-p only
  size_t suffix_index = 0;
  size_t suffix_start = 0;
  size_t active_blocks = 0;
  std::vector<UsedBlock> used_blocks;
};

// Sliding-window moment estimation for p in (0,2], the ratio-partitioned
// variant without value guesses. Suffix timestamps form a smooth histogram
// driven by exact incremental moments (the zero-error stand-in for the
// constant-accuracy rough instances); returned values come from linear
// sketches read through boundary snapshots, one independent family per
// granularity level. p = 2 uses bucketed sign sketches, p < 2 stable
// sketches; extra moment orders may ride along on shared uniforms for the
// entropy bundle.
class SlidingMoment {
 public:
  SlidingMoment(const SWParams& params, const Seed& seed,
                const std::vector<double>& extra_nodes = {});

  void ingest(const StreamUpdate& u);
  SWQueryResult query(uint64_t window) const;
  std::vector<double> query_nodes(uint64_t window) const;

  size_t time() const { return time_; }
  size_t suffix_count() const { return suffixes_.size(); }
  size_t block_count(int level) const { return lanes_[level].closed.size(); }
  const SWParams& params() const { return params_; }

  double exact_suffix_moment(size_t idx) const;
  size_t suffix_time(size_t idx) const { return suffixes_[idx].start; }

 private:
  struct Suffix {
    size_t start = 1;
    std::shared_ptr<std::vector<double>> snap0;
    FreqMap counts;
    double moment = 0;
  };

  struct Block {
    size_t t1 = 1, t2 = 1;  // pivot interval [t1, t2)
    std::shared_ptr<std::vector<double>> snap_t1, snap_t2;
    double exact_moment = 0;
  };

  struct Lane {
    std::deque<Block> closed;
    size_t live_start = 1;
    std::shared_ptr<std::vector<double>> live_snap;
    FreqMap live_counts;
    double live_moment = 0;
  };

  std::vector<double> node_ps() const;
  void maintain();
  double de_estimate(int level, const Block& b, size_t t) const;
  double sketch_interval_moment(int level, const std::vector<double>& from,
                                const std::vector<double>& to) const;
  std::shared_ptr<std::vector<double>> snapshot(int level) const;
  double pow_cached(int64_t c) const;

  SWParams params_;
  Seed seed_;
  size_t time_ = 0;
  int sketch_levels_ = 0;
  uint32_t sign_rows_ = 20;
  std::vector<double> extra_nodes_;

  std::vector<SignSketch> sign_banks_;      // p == 2: one per level
  std::vector<StableSketch> stable_banks_;  // p < 2: level-major, node-minor
  std::vector<uint32_t> stable_dims_;

  std::vector<Suffix> suffixes_;
  std::vector<Lane> lanes_;  // index 1..beta
  mutable std::vector<double> powtab_;
};

// Large-p sliding estimation (integer p in [3,8]) and the general
// value-guess framework: per-(guess, level) block lanes demarcated by
// threshold crossings of V / 2^{j+k+c}, one global heavy-hitter structure
// shared by every block, heavy corrections W_k at the stitch. Interval
// moments come from a bank of subsample-rate CountSketches read through
// boundary snapshots with level-set recovery.
class SlidingLargeP {
 public:
  SlidingLargeP(const SWParams& params, const Seed& seed);

  void ingest(const StreamUpdate& u);
  SWQueryResult query(uint64_t window) const;

  size_t time() const { return time_; }
  size_t suffix_count() const { return suffixes_.size(); }
  size_t block_count(int guess, int level) const {
    return lanes_[guess][level].closed.size();
  }
  // Closing times of the blocks in one lane, for the deterministic
  // threshold-crossing tests.
  std::vector<size_t> lane_boundaries(int guess, int level) const;

 private:
  using BankSnapshot = std::vector<std::vector<double>>;
  using HeavySet = std::unordered_set<uint64_t>;

  std::shared_ptr<BankSnapshot> snapshot_bank() const;
  double interval_fp(const BankSnapshot& from, const BankSnapshot& to,
                     const HeavySet* exclude = nullptr) const;
  double interval_freq(uint64_t item, const BankSnapshot& from,
                       const BankSnapshot& to) const;
  void maintain();
  double pow_cached(int64_t c) const;

  SWParams params_;
  Seed seed_;
  int p_ = 3;
  size_t time_ = 0;

  KWiseHash sub_hash_;
  int rates_ = 1;
  std::vector<CountSketchTable> bank_;  // one table per subsample rate
  int item_rate(uint64_t item) const;

  FreqMap freq_;

  struct Suffix {
    size_t start = 1;
    std::shared_ptr<BankSnapshot> snap;
    FreqMap counts;
    double moment = 0;
  };
  std::vector<Suffix> suffixes_;

  struct Block {
    size_t t1 = 1, t2 = 1;
    std::shared_ptr<BankSnapshot> snap_t1, snap_t2;
    std::unordered_map<uint64_t, int64_t> heavy_counts;  // exact, listed
    double exact_moment = 0;
  };
  struct Lane {
    std::deque<Block> closed;
    size_t total_closed = 0;
    size_t live_start = 1;
    std::shared_ptr<BankSnapshot> live_snap;
    FreqMap live_counts;
    double live_moment = 0;
    std::unordered_map<uint64_t, int64_t> live_heavy;
    bool dead = false;  // guess exhausted
  };
  std::vector<std::vector<Lane>> lanes_;  // [guess k][level j]
  std::unordered_map<uint64_t, size_t> heavy_listed_;
  std::shared_ptr<BankSnapshot> window_grid_snap_;  // stride-grid for W_k
  std::vector<std::pair<size_t, std::shared_ptr<BankSnapshot>>> grid_;
  mutable std::vector<double> powtab_;
};

// Sliding-window entropy: one multi-node histogram whose stable families
// share uniforms; the window estimate interpolates the stitched node values.
class SlidingEntropy {
 public:
  SlidingEntropy(double eps, double stream_bound_m, const Seed& seed,
                 uint64_t window_hint = 0,
                 ConstantsMode mode = ConstantsMode::Practical);

  void ingest(const StreamUpdate& u);
  double query(uint64_t window) const;

  const EntropyNodes& nodes() const { return nodes_; }
  const SlidingMoment& histogram() const { return *hist_; }

 private:
  double eps_;
  EntropyNodes nodes_;
  std::unique_ptr<SlidingMoment> hist_;
};

}  // namespace desketch

#endif  // DESKETCH_SLIDING_HPP
