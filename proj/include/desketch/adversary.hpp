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

#ifndef DESKETCH_ADVERSARY_HPP
#define DESKETCH_ADVERSARY_HPP

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "desketch/rand.hpp"
#include "desketch/stream.hpp"

namespace desketch {

// The duel-facing surface of an algorithm: one update in, one public output
// out. Nothing else crosses the boundary.
class DuelAlgorithm {
 public:
  virtual ~DuelAlgorithm() = default;
  virtual double feed(const StreamUpdate& u) = 0;
};

// An adversary chooses the next update as a deterministic function of its
// seed and the output transcript so far.
class AdversaryStrategy {
 public:
  virtual ~AdversaryStrategy() = default;
  virtual StreamUpdate next(const std::vector<double>& outputs) = 0;
};

struct DuelStep {
  StreamUpdate update;
  double output = 0;
  double truth = 0;
  double rel_error = 0;
};

struct DuelTranscript {
  std::vector<DuelStep> steps;
  double max_rel_error = 0;       // after the warmup
  double max_rel_error_all = 0;   // every step, including warmup
  double mean_rel_error = 0;
  size_t warmup = 0;
  bool halted = false;  // a capacity error stopped the duel
  std::string halt_reason;
};

// Runs a duel with exact F_p truth computed alongside. Capacity errors from
// the algorithm are recorded and the duel halts gracefully. The staircase
// output of the robust frameworks is quantized at eps/8 per step and empty
// before the first switch, so per-step relative accuracy is measured after a
// short warmup (max_rel_error_all keeps the unwindowed figure).
DuelTranscript run_duel(DuelAlgorithm& algorithm, AdversaryStrategy& adversary,
                        size_t steps, double truth_p, size_t warmup = 0);

// Feeds the transcript's update column into a fresh algorithm; outputs must
// reproduce exactly. Returns the first divergent step if any.
std::optional<size_t> replay_check(const DuelTranscript& transcript,
                                   DuelAlgorithm& fresh);

enum class StreamKind { Uniform, Zipf, Bursty, DeleteHeavy };

UpdateSeq generate_stream(StreamKind kind, uint64_t n, size_t m,
                          const Seed& seed, double zipf_s = 1.1);

// Ignores outputs; wraps an oblivious generator.
class ObliviousWrapper : public AdversaryStrategy {
 public:
  ObliviousWrapper(UpdateSeq stream) : stream_(std::move(stream)) {}
  StreamUpdate next(const std::vector<double>& outputs) override {
    size_t i = outputs.size();
    return stream_[i % stream_.size()];
  }

 private:
  UpdateSeq stream_;
};

// Greedy correlation climbing on the reported estimate: probe a candidate
// pool round-robin, then concentrate updates on the candidates whose
// insertions moved the estimate most, re-probing periodically.
class OutputProbeAdversary : public AdversaryStrategy {
 public:
  OutputProbeAdversary(const Seed& seed, uint64_t universe,
                       size_t pool = 24, size_t exploit_run = 12);
  StreamUpdate next(const std::vector<double>& outputs) override;

 private:
  std::vector<uint64_t> pool_;
  std::vector<double> gain_;
  size_t exploit_run_;
  size_t probe_i_ = 0;
  size_t run_left_ = 0;
  uint64_t current_ = 0;
  double last_output_ = 0;
  bool probing_ = true;
  size_t since_probe_ = 0;
};

// Pushes a single item whenever the estimate climbed, hopping to a fresh
// item when it stalls.
class EstimateInflationAdversary : public AdversaryStrategy {
 public:
  EstimateInflationAdversary(const Seed& seed, uint64_t universe);
  StreamUpdate next(const std::vector<double>& outputs) override;

 private:
  Rng rng_;
  uint64_t universe_;
  uint64_t current_;
  double last_output_ = 0;
  int stall_ = 0;
};

// Alternates heavy single-item bursts with fans of fresh items; stresses
// histogram merge paths rather than the estimate itself.
class SmoothHistogramStressor : public AdversaryStrategy {
 public:
  SmoothHistogramStressor(const Seed& seed, uint64_t universe);
  StreamUpdate next(const std::vector<double>& outputs) override;

 private:
  Rng rng_;
  uint64_t universe_;
  size_t phase_ = 0;
};

}  // namespace desketch

#endif  // DESKETCH_ADVERSARY_HPP
