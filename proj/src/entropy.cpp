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

#include "desketch/entropy.hpp"

#include <cmath>
#include <stdexcept>

#include "desketch/stable_sketch.hpp"

namespace desketch {

EntropyNodes EntropyNodes::make(double eps, double m) {
  if (!(eps > 0 && eps < 1) || !(m > 2))
    throw std::invalid_argument("EntropyNodes: need eps in (0,1), m > 2");
  EntropyNodes n;
  double logm = std::log2(m);
  n.k = static_cast<int>(std::ceil(std::log2(1.0 / eps) + std::log2(logm)));
  if (n.k < 2) n.k = 2;
  n.ell = 1.0 / (2.0 * (n.k + 1) * logm);
  double k2 = static_cast<double>(n.k) * n.k;
  n.y.resize(n.k + 1);
  for (int i = 0; i <= n.k; ++i) {
    double z = std::cos(i * M_PI / n.k);
    double f = ((k2 * n.ell) * z - n.ell * (k2 + 1.0)) / (2.0 * k2 + 1.0);
    n.y[i] = 1.0 + f;
  }
  return n;
}

double interpolate_entropy(const EntropyNodes& nodes,
                           const std::vector<double>& moments, double mass) {
  size_t n = nodes.y.size();
  if (moments.size() != n)
    throw std::invalid_argument("interpolate_entropy: node/estimate mismatch");
  if (!(mass > 0)) return 0.0;
  double log_mass = std::log2(mass);
  // Renyi ordinates on normalized frequencies.
  std::vector<double> val(n), x(n);
  for (size_t i = 0; i < n; ++i) {
    double f = std::max(moments[i], 1e-300);
    double g = std::log2(f) - nodes.y[i] * log_mass;
    x[i] = nodes.y[i];
    val[i] = g / (1.0 - nodes.y[i]);
  }
  // Neville's algorithm at y = 1.
  for (size_t level = 1; level < n; ++level) {
    for (size_t i = 0; i + level < n; ++i) {
      double xi = x[i], xj = x[i + level];
      val[i] = ((1.0 - xj) * val[i] - (1.0 - xi) * val[i + 1]) / (xi - xj);
    }
  }
  return val[0];
}

RobustEntropy::RobustEntropy(double eps, double stream_bound_m,
                             const Seed& seed, ConstantsMode mode)
    : eps_(eps), nodes_(EntropyNodes::make(eps, stream_bound_m)) {
  RobustParams params = RobustParams::make(eps / 2.0, 2.0, mode);
  std::vector<double> all_nodes;
  all_nodes.push_back(1.0);  // calibration order: F_1 through the same path
  for (double y : nodes_.y) all_nodes.push_back(y);
  double varf = li_variance_ratio(3.0, 1.0);
  varf = varf * varf - 1.0;
  uint32_t dim = StableSketch::round_dim(
      static_cast<uint32_t>(
          std::max(1200.0, 18.0 * 3.0 * varf / (eps * eps))),
      3);
  factory_ =
      std::make_shared<SnapshotFpFactory>(params, all_nodes, dim, seed);
  ledger_ = std::make_unique<RobustLedger>(params, factory_, seed);
}

double RobustEntropy::step(const StreamUpdate& u) {
  factory_->ingest(u.item, static_cast<double>(u.delta));
  return ledger_->step(u);
}

double RobustEntropy::output() const {
  auto stitched = ledger_->stitched_nodes();
  // Node 0 is the exact switching mass, node 1 the sketched calibration
  // order p = 1, then the interpolation nodes.
  if (stitched.size() < 3) return 0.0;
  double mass = stitched[1];
  if (!(mass > 0)) return 0.0;
  std::vector<double> moments(stitched.begin() + 2, stitched.end());
  double h = interpolate_entropy(nodes_, moments, mass);
  if (h < 0) h = 0;
  // Public output on an eps/8 grid, one reveal per step pattern.
  double quantum = eps_ / 8.0;
  return std::round(h / quantum) * quantum;
}

}  // namespace desketch
