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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "desketch/adversary.hpp"
#include "desketch/f0_sketch.hpp"
#include "doctest.h"

using namespace desketch;

TEST_CASE("empty stream estimates zero") {
  F0Sketch s(Seed(1), 64);
  CHECK(s.estimate() == 0.0);
}

TEST_CASE("distinct count below capacity is exact") {
  F0Sketch s(Seed(2), 64);
  for (int i = 0; i < 50; ++i) s.update(i);
  for (int i = 0; i < 50; ++i) s.update(i);  // repeats don't count
  CHECK(s.estimate() == 50.0);
}

TEST_CASE("large distinct count within 1 +/- eps") {
  const double eps = 0.1;
  uint32_t cap = static_cast<uint32_t>(16.0 / (eps * eps));
  int ok = 0;
  for (int seed = 0; seed < 100; ++seed) {
    F0Sketch s(Seed(900 + seed), cap);
    // 10^4 distinct ids drawn from a 10^5 universe.
    Rng rng{Seed(static_cast<uint64_t>(seed))};
    std::unordered_set<uint64_t> chosen;
    while (chosen.size() < 10000) chosen.insert(rng.next_below(100000));
    for (uint64_t it : chosen) s.update(it);
    double est = s.estimate();
    if (std::abs(est - 10000.0) <= eps * 10000.0) ++ok;
  }
  CHECK(ok >= 90);
}

TEST_CASE("merge equals concatenated stream") {
  Seed sd(31);
  F0Sketch a(sd, 128), b(sd, 128), whole(sd, 128);
  Rng rng(Seed(77));
  for (int i = 0; i < 300; ++i) {
    uint64_t x = rng.next_below(1000);
    a.update(x);
    whole.update(x);
  }
  for (int i = 0; i < 300; ++i) {
    uint64_t x = rng.next_below(1000);
    b.update(x);
    whole.update(x);
  }
  a.merge(b);
  CHECK(a.estimate() == whole.estimate());
  for (int k = 0; k < F0Sketch::kLevels; ++k) {
    CHECK(a.level_overflowed(k) == whole.level_overflowed(k));
    if (!a.level_overflowed(k)) CHECK(a.level_set(k) == whole.level_set(k));
  }
}

TEST_CASE("incompatible merge rejected") {
  F0Sketch a(Seed(1), 64), b(Seed(2), 64);
  CHECK_THROWS_AS(a.merge(b), std::invalid_argument);
}
