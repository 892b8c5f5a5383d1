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
#include <cmath>

#include "desketch/l2_sampler.hpp"
#include "doctest.h"

using namespace desketch;

TEST_CASE("single item vector is sampled with probability one") {
  for (int seed = 0; seed < 20; ++seed) {
    L2Sampler s(Seed(100 + seed));
    s.update(7, 5.0);
    auto r = s.sample();
    REQUIRE(r.has_value());
    CHECK(r->item == 7);
  }
}

TEST_CASE("u = (3,4): item 2 drawn near 16/25 of the time") {
  int draws = 0, item2 = 0;
  for (int seed = 0; seed < 10000; ++seed) {
    L2Sampler s(Seed(5000 + seed), 5, 128);
    s.update(1, 3.0);
    s.update(2, 4.0);
    auto r = s.sample();
    if (!r) continue;
    ++draws;
    if (r->item == 2) ++item2;
  }
  REQUIRE(draws > 9000);  // failure symbol should be rare here
  double frac = static_cast<double>(item2) / draws;
  CHECK(std::abs(frac - 16.0 / 25.0) <= 0.03);
}

TEST_CASE("frequency estimates are unbiased") {
  double sum_ratio = 0;
  int n = 0;
  for (int seed = 0; seed < 1000; ++seed) {
    L2Sampler s(Seed(9000 + seed), 5, 256);
    s.update(1, 6.0);
    s.update(2, 8.0);
    s.update(3, 2.0);
    auto r = s.sample();
    if (!r) continue;
    double truth = r->item == 1 ? 6.0 : (r->item == 2 ? 8.0 : 2.0);
    sum_ratio += r->frequency / truth;
    ++n;
  }
  REQUIRE(n > 900);
  CHECK(std::abs(sum_ratio / n - 1.0) <= 0.05);
}

TEST_CASE("sample set retries on backups and reports failures") {
  L2SampleSet set(Seed(42), 16);
  set.update(1, 3.0);
  set.update(2, 4.0);
  auto draws = set.draw();
  CHECK(draws.size() >= 14);  // a couple may exhaust the retry budget
}
