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
#include "desketch/countsketch.hpp"
#include "desketch/oracle.hpp"
#include "doctest.h"

using namespace desketch;

TEST_CASE("single item stream queries exactly") {
  CountSketchTable t(Seed(1), 5, 32);
  t.update(9, 41.0);
  CHECK(t.query(9) == 41.0);
}

TEST_CASE("absent item is unbiased") {
  // Mean over 10^3 seeds within 5% f of 0.
  double f = 100.0;
  double mean = 0;
  for (int seed = 0; seed < 1000; ++seed) {
    CountSketchTable t(Seed(100 + seed), 1, 2);  // worst case: collisions
    t.update(1, f);
    mean += t.query(2);
  }
  mean /= 1000;
  CHECK(std::abs(mean) <= 0.05 * f);
}

TEST_CASE("zipf top item within eps L2") {
  const double eps = 0.1;
  uint32_t b = static_cast<uint32_t>(8.0 / (eps * eps));
  int ok = 0;
  for (int seed = 0; seed < 100; ++seed) {
    UpdateSeq stream =
        generate_stream(StreamKind::Zipf, 1000, 10000, Seed(seed), 1.3);
    CountSketchTable t(Seed(3000 + seed), 7, b);
    ExactState oracle;
    for (auto& u : stream) {
      t.update(u);
      oracle.ingest(u);
    }
    auto freq = oracle.frequencies(1, stream.size());
    uint64_t top = 0;
    int64_t topf = 0;
    for (auto& [item, c] : freq)
      if (c > topf) {
        topf = c;
        top = item;
      }
    double l2 = std::sqrt(oracle.moment(2.0));
    if (std::abs(t.query(top) - topf) <= eps * l2) ++ok;
  }
  CHECK(ok >= 90);
}

TEST_CASE("heavy hitters: single item reported exactly") {
  CountSketchTable t(Seed(5), 5, 64, true);
  t.update(3, 50.0);
  auto hh = l2_heavy_hitters(t, 2500.0, 0.1);
  REQUIRE(hh.size() == 1);
  CHECK(hh[0].item == 3);
  CHECK(hh[0].frequency == 50.0);
}

namespace {

// Uniform noise at frequency g over n items plus one planted item at ratio
// r * L2.
UpdateSeq planted_stream(uint64_t n, int64_t g, double ratio, Seed seed,
                         uint64_t* planted_out, double* l2_out) {
  UpdateSeq s;
  double f2_noise = static_cast<double>(n) * g * g;
  // h = ratio * sqrt(f2_noise + h^2)
  double h = ratio * std::sqrt(f2_noise / (1 - ratio * ratio));
  int64_t hi = static_cast<int64_t>(std::llround(h));
  uint64_t planted = n + 1;
  for (uint64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < g; ++j) s.push_back({i, 1});
  for (int64_t j = 0; j < hi; ++j) s.push_back({planted, 1});
  // Shuffle deterministically.
  Rng rng(seed);
  for (size_t i = s.size(); i > 1; --i)
    std::swap(s[i - 1], s[rng.next_below(i)]);
  *planted_out = planted;
  *l2_out = std::sqrt(f2_noise + static_cast<double>(hi) * hi);
  return s;
}

}  // namespace

TEST_CASE("planted 2eps-heavy item reported, eps/4 item not") {
  const double eps = 0.1;
  uint32_t b = static_cast<uint32_t>(20.0 / (eps * eps));
  int reported = 0, clean = 0;
  for (int seed = 0; seed < 100; ++seed) {
    uint64_t planted;
    double l2;
    UpdateSeq s = planted_stream(500, 10, 2 * eps, Seed(seed), &planted, &l2);
    CountSketchTable t(Seed(4000 + seed), 9, b, true);
    ExactState oracle;
    for (auto& u : s) {
      t.update(u);
      oracle.ingest(u);
    }
    double f2 = oracle.moment(2.0);
    auto hh = l2_heavy_hitters(t, f2, eps);
    bool found = false, dirty = false;
    auto freq = oracle.frequencies(1, s.size());
    for (auto& r : hh) {
      if (r.item == planted) found = true;
      double truth = freq.count(r.item) ? freq.at(r.item) : 0.0;
      if (truth <= (eps / 2) * std::sqrt(f2)) dirty = true;
    }
    if (found) ++reported;
    if (!dirty) ++clean;
  }
  CHECK(reported >= 95);
  CHECK(clean >= 95);
}
