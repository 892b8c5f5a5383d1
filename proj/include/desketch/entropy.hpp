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

#ifndef DESKETCH_ENTROPY_HPP
#define DESKETCH_ENTROPY_HPP

#include <memory>
#include <vector>

#include "desketch/rand.hpp"
#include "desketch/robust.hpp"
#include "desketch/stream.hpp"

namespace desketch {

// Interpolation node set for entropy estimation from fractional moments:
//   k = ceil(log2(1/eps) + log2(log2 m)),  ell = 1 / (2 (k+1) log2 m),
//   f(z) = ((k^2 ell) z - ell (k^2 + 1)) / (2 k^2 + 1),
//   y_i = 1 + f(cos(i pi / k)),  i = 0..k.
// All nodes sit just below 1; evaluating the interpolant at y = 1 recovers
// the Shannon entropy from Renyi values.
struct EntropyNodes {
  int k = 0;
  double ell = 0;
  std::vector<double> y;

  static EntropyNodes make(double eps, double m);
};

// P(0): interpolate (y_i, Renyi_{y_i}) and evaluate at y = 1. The moment
// estimates are unnormalized; `mass` is the F_1 estimate from the same
// pipeline so that shared errors cancel in the ratio ordinates.
double interpolate_entropy(const EntropyNodes& nodes,
                           const std::vector<double>& moments, double mass);

// Adversarially robust additive-eps entropy: one robust ledger whose
// instances are evaluated at the calibration order 1 and at every node
// order, all sharing their stable-variate uniforms. The public output is the
// interpolated entropy rounded to an eps/8 grid.
class RobustEntropy {
 public:
  RobustEntropy(double eps, double stream_bound_m, const Seed& seed,
                ConstantsMode mode = ConstantsMode::Practical);

  double step(const StreamUpdate& u);
  double output() const;

  const EntropyNodes& nodes() const { return nodes_; }
  const RobustLedger& ledger() const { return *ledger_; }

 private:
  double eps_;
  EntropyNodes nodes_;
  std::shared_ptr<SnapshotFpFactory> factory_;
  std::unique_ptr<RobustLedger> ledger_;
};

}  // namespace desketch

#endif  // DESKETCH_ENTROPY_HPP
