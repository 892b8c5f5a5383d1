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

#ifndef DESKETCH_SPACE_HPP
#define DESKETCH_SPACE_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "desketch/diff.hpp"
#include "desketch/robust.hpp"

namespace desketch {

// Structural space accounting: rows allocated per difference-estimator
// level (gamma_k^C / eta_k^2 shaped), instances per level, and the base
// tracker allocation. This is what the framework would allocate; the
// acceptance suite asserts the scaling laws on it.
struct SpacePlan {
  int beta = 0;
  std::vector<double> gamma, eta_k;
  std::vector<uint64_t> level_cells;      // per instance
  std::vector<uint64_t> level_instances;  // provisioned pool size
  uint64_t tracker_cells = 0;

  uint64_t level_total(int k) const {
    return level_cells[k] * level_instances[k];
  }
  uint64_t total_cells() const {
    uint64_t t = tracker_cells;
    for (int k = 1; k <= beta; ++k) t += level_total(k);
    return t;
  }
};

inline SpacePlan plan_space(const RobustParams& params, DEKind kind,
                            double p = 2.0) {
  SpacePlan plan;
  plan.beta = params.beta;
  plan.gamma = params.gamma;
  plan.eta_k = params.eta_k;
  plan.level_cells.assign(params.beta + 1, 0);
  plan.level_instances.assign(params.beta + 1, 0);
  for (int k = 1; k <= params.beta; ++k) {
    DEConfig cfg;
    cfg.kind = kind;
    cfg.p = p;
    cfg.gamma = params.gamma[k];
    cfg.eps = params.eta_k[k];
    // Paper mode carries the delta' union-bound factor; practical instances
    // run at the working failure rate.
    cfg.delta = params.mode == ConstantsMode::Paper && params.delta_prime > 0
                    ? params.delta_prime
                    : 0.05;
    plan.level_cells[k] = DEDimension::size(cfg);
    plan.level_instances[k] = params.max_instances_per_level(k);
  }
  plan.tracker_cells = static_cast<uint64_t>(
      std::max(64.0, 8.0 / (params.tracker_eta * params.tracker_eta)));
  return plan;
}

// Least-squares slope of log(total cells) against log(1/eps).
inline double space_slope(const std::vector<double>& eps_values, DEKind kind,
                          double C, double p, ConstantsMode mode) {
  std::vector<double> xs, ys;
  for (double eps : eps_values) {
    RobustParams params = RobustParams::make(eps, C, mode);
    SpacePlan plan = plan_space(params, kind, p);
    xs.push_back(std::log(1.0 / eps));
    ys.push_back(std::log(static_cast<double>(plan.total_cells())));
  }
  double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace desketch

#endif  // DESKETCH_SPACE_HPP
