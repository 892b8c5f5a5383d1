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
#include "desketch/oracle.hpp"
#include "desketch/sign_sketch.hpp"
#include "doctest.h"

using namespace desketch;

TEST_CASE("empty sketch estimates zero") {
  SignSketch s(Seed(1), 12, 64, 4);
  CHECK(s.f2_estimate() == 0.0);
}

TEST_CASE("single item frequency") {
  // est within eps * f^2 of f^2 in >= 95/100 seeds.
  const double eps = 0.2;
  TrackerConfig tc;
  tc.eps = eps;
  int ok = 0;
  for (int seed = 0; seed < 100; ++seed) {
    SignSketch s(Seed(1000 + seed), tc.f2_rows(),
                 tc.f2_cells() / tc.f2_rows() + 1, tc.f2_groups());
    double f = 37;
    s.update(5, f);
    if (std::abs(s.f2_estimate() - f * f) <= eps * f * f) ++ok;
  }
  CHECK(ok >= 95);
}

TEST_CASE("zipf stream tracks brute-force F2") {
  const double eps = 0.1;
  TrackerConfig tc;
  tc.eps = eps;
  int ok = 0;
  for (int seed = 0; seed < 100; ++seed) {
    UpdateSeq stream =
        generate_stream(StreamKind::Zipf, 1000, 10000, Seed(seed), 1.1);
    SignSketch s(Seed(7000 + seed), tc.f2_rows(),
                 tc.f2_cells() / tc.f2_rows() + 1, tc.f2_groups());
    ExactState oracle;
    for (const auto& u : stream) {
      s.update(u);
      oracle.ingest(u);
    }
    double exact = oracle.moment(2.0);
    if (std::abs(s.f2_estimate() - exact) <= eps * exact) ++ok;
  }
  CHECK(ok >= 95);
}

TEST_CASE("inner product of a sketch with itself is its F2") {
  SignSketch s(Seed(3), 8, 32, 2);
  for (int i = 0; i < 50; ++i) s.update(i % 7, 1.0 + i % 3);
  CHECK(s.inner_product_estimate(s) == doctest::Approx(s.f2_estimate()));
}

TEST_CASE("disjoint supports have near-zero inner product") {
  const double eps = 0.12;
  uint32_t cells = static_cast<uint32_t>(8.0 / (eps * eps));
  int ok = 0;
  for (int seed = 0; seed < 100; ++seed) {
    Seed sd(200 + seed);
    SignSketch su(sd, 8, cells / 8, 4), sv(sd, 8, cells / 8, 4);
    su.update(1, 10);
    sv.update(2, 10);
    if (std::abs(su.inner_product_estimate(sv)) <= eps * 100) ++ok;
  }
  CHECK(ok >= 90);
}

TEST_CASE("random vectors: inner product within eps ||u|| ||v||") {
  const double eps = 0.12;
  uint32_t cells = static_cast<uint32_t>(8.0 / (eps * eps));
  Rng vals(Seed(99));
  std::vector<double> u(100), v(100);
  double nu = 0, nv = 0, dot = 0;
  for (int i = 0; i < 100; ++i) {
    u[i] = std::floor(vals.next_unit() * 10);
    v[i] = std::floor(vals.next_unit() * 10);
    nu += u[i] * u[i];
    nv += v[i] * v[i];
    dot += u[i] * v[i];
  }
  int ok = 0;
  for (int seed = 0; seed < 100; ++seed) {
    Seed sd(300 + seed);
    SignSketch su(sd, 8, cells / 8, 4), sv(sd, 8, cells / 8, 4);
    for (int i = 0; i < 100; ++i) {
      if (u[i] != 0) su.update(i, u[i]);
      if (v[i] != 0) sv.update(i, v[i]);
    }
    double est = su.inner_product_estimate(sv);
    if (std::abs(est - dot) <= eps * std::sqrt(nu * nv)) ++ok;
  }
  CHECK(ok >= 90);
}

TEST_CASE("mismatched sketches are rejected") {
  SignSketch a(Seed(1), 8, 16, 2), b(Seed(2), 8, 16, 2);
  CHECK_THROWS_AS(a.inner_product_estimate(b), std::invalid_argument);
}

TEST_CASE("linearity: sketch(S1 || S2) equals cellwise sum") {
  Rng rng(Seed(55));
  UpdateSeq s1, s2;
  for (int i = 0; i < 200; ++i) s1.push_back({rng.next_below(50), 1});
  for (int i = 0; i < 150; ++i) s2.push_back({rng.next_below(50), 1});
  Seed sd(77);
  SignSketch whole(sd, 6, 32, 2), part1(sd, 6, 32, 2), part2(sd, 6, 32, 2);
  for (auto& u : s1) {
    whole.update(u);
    part1.update(u);
  }
  for (auto& u : s2) {
    whole.update(u);
    part2.update(u);
  }
  part1.add(part2);
  for (size_t i = 0; i < whole.raw_cells().size(); ++i)
    CHECK(part1.raw_cells()[i] == doctest::Approx(whole.raw_cells()[i]));
}

TEST_CASE("unbiasedness over the full GF(16) sign family") {
  // E[<s,u><s,v>] = <u,v> exactly, summing over all degree-3 polynomials.
  const int q = 16;
  std::vector<double> u{3, -1, 2, 5}, v{1, 4, -2, 2};
  double dot = 0, nu = 0, nv = 0;
  for (int i = 0; i < 4; ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  long double sum = 0, sum2 = 0;
  long long families = 0;
  for (int c0 = 0; c0 < q; ++c0)
    for (int c1 = 0; c1 < q; ++c1)
      for (int c2 = 0; c2 < q; ++c2)
        for (int c3 = 0; c3 < q; ++c3) {
          BinaryFieldHash h(4, {static_cast<uint32_t>(c0),
                                static_cast<uint32_t>(c1),
                                static_cast<uint32_t>(c2),
                                static_cast<uint32_t>(c3)});
          double su = 0, sv = 0;
          for (int i = 0; i < 4; ++i) {
            int sign = h.sign(i);
            su += sign * u[i];
            sv += sign * v[i];
          }
          sum += su * sv;
          sum2 += (su * sv) * (su * sv);
          ++families;
        }
  CHECK(static_cast<double>(sum / families) == doctest::Approx(dot));
  // Second moment bound actually derived in the variance lemma's proof.
  CHECK(static_cast<double>(sum2 / families) <=
        2 * nu * nv + dot * dot + 1e-9);
}
