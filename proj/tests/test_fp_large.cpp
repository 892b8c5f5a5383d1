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

#include "desketch/adversary.hpp"
#include "desketch/fp_large.hpp"
#include "desketch/oracle.hpp"
#include "doctest.h"

using namespace desketch;

TEST_CASE("single item, p = 4") {
  const double eps = 0.2;
  int ok = 0;
  for (int seed = 0; seed < 50; ++seed) {
    FpLargeTracker t(Seed(100 + seed), 4, eps, 0.1, 1000);
    t.update(17, 100.0);
    double truth = 1e8;
    if (std::abs(t.estimate() - truth) <= eps * truth) ++ok;
  }
  CHECK(ok >= 45);
}

TEST_CASE("two equal items, p = 3") {
  const double eps = 0.2;
  int ok = 0;
  for (int seed = 0; seed < 50; ++seed) {
    FpLargeTracker t(Seed(300 + seed), 3, eps, 0.1, 1000);
    t.update(1, 50.0);
    t.update(2, 50.0);
    double truth = 2 * 125000.0;
    if (std::abs(t.estimate() - truth) <= eps * truth) ++ok;
  }
  CHECK(ok >= 45);
}

TEST_CASE("zipf(1.5), n = 10^3, p = 3 within 1 +/- eps") {
  const double eps = 0.2;
  int ok = 0;
  for (int seed = 0; seed < 100; ++seed) {
    UpdateSeq stream =
        generate_stream(StreamKind::Zipf, 1000, 10000, Seed(seed), 1.5);
    FpLargeTracker t(Seed(700 + seed), 3, eps, 0.1, 1000);
    ExactState oracle;
    for (auto& u : stream) {
      t.update(u);
      oracle.ingest(u);
    }
    double truth = oracle.moment(3.0);
    if (std::abs(t.estimate() - truth) <= eps * truth) ++ok;
  }
  CHECK(ok >= 90);
}
