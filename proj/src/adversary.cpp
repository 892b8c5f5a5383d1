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

#include "desketch/adversary.hpp"

#include <cmath>
#include <unordered_map>

#include "desketch/robust.hpp"

namespace desketch {

DuelTranscript run_duel(DuelAlgorithm& algorithm, AdversaryStrategy& adversary,
                        size_t steps, double truth_p, size_t warmup) {
  DuelTranscript t;
  t.warmup = warmup;
  t.steps.reserve(steps);
  std::vector<double> outputs;
  outputs.reserve(steps);
  std::unordered_map<uint64_t, int64_t> freq;
  double moment = 0;
  auto term = [&](int64_t c) {
    if (c == 0) return 0.0;
    return truth_p == 0.0
               ? 1.0
               : std::pow(std::abs(static_cast<double>(c)), truth_p);
  };
  double err_sum = 0;
  for (size_t i = 0; i < steps; ++i) {
    StreamUpdate u = adversary.next(outputs);
    double out;
    try {
      out = algorithm.feed(u);
    } catch (const CapacityError& e) {
      t.halted = true;
      t.halt_reason = e.what();
      break;
    }
    int64_t& c = freq[u.item];
    moment -= term(c);
    c += u.delta;
    moment += term(c);
    DuelStep step;
    step.update = u;
    step.output = out;
    step.truth = moment;
    step.rel_error = moment > 0 ? std::abs(out - moment) / moment
                                : std::abs(out);
    err_sum += step.rel_error;
    t.max_rel_error_all = std::max(t.max_rel_error_all, step.rel_error);
    if (i >= warmup) t.max_rel_error = std::max(t.max_rel_error, step.rel_error);
    t.steps.push_back(step);
    outputs.push_back(out);
  }
  t.mean_rel_error = t.steps.empty() ? 0 : err_sum / t.steps.size();
  return t;
}

std::optional<size_t> replay_check(const DuelTranscript& transcript,
                                   DuelAlgorithm& fresh) {
  for (size_t i = 0; i < transcript.steps.size(); ++i) {
    double out = fresh.feed(transcript.steps[i].update);
    if (out != transcript.steps[i].output) return i;
  }
  return std::nullopt;
}

UpdateSeq generate_stream(StreamKind kind, uint64_t n, size_t m,
                          const Seed& seed, double zipf_s) {
  Rng rng(seed);
  UpdateSeq out;
  out.reserve(m);
  switch (kind) {
    case StreamKind::Uniform: {
      for (size_t i = 0; i < m; ++i) out.push_back({rng.next_below(n), 1});
      break;
    }
    case StreamKind::Zipf: {
      std::vector<double> cdf(n);
      double acc = 0;
      for (uint64_t i = 0; i < n; ++i) {
        acc += std::pow(static_cast<double>(i + 1), -zipf_s);
        cdf[i] = acc;
      }
      for (size_t i = 0; i < m; ++i) {
        double u = rng.next_unit() * acc;
        auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
        out.push_back(
            {static_cast<uint64_t>(it - cdf.begin()) % n, 1});
      }
      break;
    }
    case StreamKind::Bursty: {
      size_t i = 0;
      while (i < m) {
        uint64_t item = rng.next_below(n);
        size_t burst = 1 + rng.next_below(64);
        for (size_t b = 0; b < burst && i < m; ++b, ++i)
          out.push_back({item, 1});
      }
      break;
    }
    case StreamKind::DeleteHeavy: {
      // Signed stream that keeps every prefix frequency nonnegative.
      std::unordered_map<uint64_t, int64_t> f;
      for (size_t i = 0; i < m; ++i) {
        uint64_t item = rng.next_below(n);
        bool del = rng.next_unit() < 0.4 && f[item] > 0;
        int64_t d = del ? -1 : 1;
        f[item] += d;
        out.push_back({item, d});
      }
      break;
    }
  }
  return out;
}

OutputProbeAdversary::OutputProbeAdversary(const Seed& seed, uint64_t universe,
                                           size_t pool, size_t exploit_run)
    : exploit_run_(exploit_run) {
  Rng rng(seed);
  pool_.reserve(pool);
  for (size_t i = 0; i < pool; ++i) pool_.push_back(rng.next_below(universe));
  gain_.assign(pool, 0.0);
}

StreamUpdate OutputProbeAdversary::next(const std::vector<double>& outputs) {
  if (!outputs.empty()) {
    double delta = outputs.back() - last_output_;
    last_output_ = outputs.back();
    if (probing_ && probe_i_ > 0 && probe_i_ <= pool_.size())
      gain_[probe_i_ - 1] = delta;
    if (!probing_) gain_[current_] = 0.7 * gain_[current_] + 0.3 * delta;
  }
  if (probing_) {
    if (probe_i_ < pool_.size()) {
      StreamUpdate u{pool_[probe_i_], 1};
      ++probe_i_;
      return u;
    }
    // Probe pass done; exploit the best candidate.
    probing_ = false;
    probe_i_ = 0;
    size_t best = 0;
    for (size_t i = 1; i < gain_.size(); ++i)
      if (gain_[i] > gain_[best]) best = i;
    current_ = best;
    run_left_ = exploit_run_;
  }
  if (run_left_ == 0) {
    ++since_probe_;
    if (since_probe_ >= 8) {
      since_probe_ = 0;
      probing_ = true;  // fresh probe pass
      return next(outputs);
    }
    size_t best = 0;
    for (size_t i = 1; i < gain_.size(); ++i)
      if (gain_[i] > gain_[best]) best = i;
    current_ = best;
    run_left_ = exploit_run_;
  }
  --run_left_;
  return {pool_[current_], 1};
}

EstimateInflationAdversary::EstimateInflationAdversary(const Seed& seed,
                                                       uint64_t universe)
    : rng_(seed), universe_(universe), current_(rng_.next_below(universe)) {}

StreamUpdate EstimateInflationAdversary::next(
    const std::vector<double>& outputs) {
  if (!outputs.empty()) {
    double delta = outputs.back() - last_output_;
    last_output_ = outputs.back();
    if (delta <= 0) {
      if (++stall_ >= 4) {
        current_ = rng_.next_below(universe_);
        stall_ = 0;
      }
    } else {
      stall_ = 0;
    }
  }
  return {current_, 1};
}

SmoothHistogramStressor::SmoothHistogramStressor(const Seed& seed,
                                                 uint64_t universe)
    : rng_(seed), universe_(universe) {}

StreamUpdate SmoothHistogramStressor::next(
    const std::vector<double>& outputs) {
  size_t t = outputs.size();
  // 64-step epochs: hot item burst, then a fan of fresh items.
  if ((t / 64) % 2 == 0) {
    ++phase_;
    return {(t / 128) % universe_, 1};
  }
  return {rng_.next_below(universe_), 1};
}

}  // namespace desketch
