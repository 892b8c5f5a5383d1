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

#include "desketch/serialize.hpp"

#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace desketch {

namespace {

constexpr uint32_t kMagic = 0x44534b31;  // "DSK1"
constexpr uint16_t kVersion = 1;

enum Family : uint8_t { kSign = 1, kStable = 2, kF0 = 3, kCountSketch = 4 };

void put_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("sketch blob truncated");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& os, double d) {
  uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(os, v);
}

double get_f64(std::istream& is) {
  uint64_t v = get_u64(is);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

void put_header(std::ostream& os, uint8_t family) {
  put_u64(os, (static_cast<uint64_t>(kMagic) << 32) |
                  (static_cast<uint64_t>(kVersion) << 16) | family);
}

uint8_t get_header(std::istream& is) {
  uint64_t h = get_u64(is);
  if ((h >> 32) != kMagic) throw std::runtime_error("bad sketch magic");
  if (((h >> 16) & 0xffff) != kVersion)
    throw std::runtime_error("unsupported sketch version");
  return static_cast<uint8_t>(h & 0xff);
}

}  // namespace

uint8_t peek_family(std::istream& is) {
  auto pos = is.tellg();
  uint8_t f = get_header(is);
  is.seekg(pos);
  return f;
}

void save_sketch(std::ostream& os, const SignSketch& s) {
  put_header(os, kSign);
  put_u64(os, s.seed().value);
  put_u64(os, s.rows());
  put_u64(os, s.buckets());
  put_u64(os, s.groups());
  for (double c : s.raw_cells()) put_f64(os, c);
}

SignSketch load_sign_sketch(std::istream& is) {
  if (get_header(is) != kSign) throw std::runtime_error("not a sign sketch");
  Seed seed(get_u64(is));
  uint32_t rows = static_cast<uint32_t>(get_u64(is));
  uint32_t buckets = static_cast<uint32_t>(get_u64(is));
  uint32_t groups = static_cast<uint32_t>(get_u64(is));
  SignSketch s(seed, rows, buckets, groups);
  for (double& c : s.raw_cells_mut()) c = get_f64(is);
  s.recompute_sumsq();
  return s;
}

void save_sketch(std::ostream& os, const StableSketch& s) {
  put_header(os, kStable);
  put_u64(os, s.source()->seed().value);
  put_f64(os, s.p());
  put_u64(os, s.dim());
  put_u64(os, s.q());
  for (double y : s.accumulator()) put_f64(os, y);
}

StableSketch load_stable_sketch(std::istream& is) {
  if (get_header(is) != kStable)
    throw std::runtime_error("not a stable sketch");
  Seed seed(get_u64(is));
  double p = get_f64(is);
  uint32_t d = static_cast<uint32_t>(get_u64(is));
  uint32_t q = static_cast<uint32_t>(get_u64(is));
  StableSketch s(seed, p, d, q);
  for (double& y : s.accumulator_mut()) y = get_f64(is);
  return s;
}

void save_sketch(std::ostream& os, const F0Sketch& s) {
  put_header(os, kF0);
  put_u64(os, s.seed().value);
  put_u64(os, s.capacity());
  for (int k = 0; k < F0Sketch::kLevels; ++k) {
    put_u64(os, s.level_overflowed(k) ? 1 : 0);
    put_u64(os, s.level_count(k));
    for (uint32_t id : s.level_set(k)) put_u64(os, id);
  }
}

F0Sketch load_f0_sketch(std::istream& is) {
  if (get_header(is) != kF0) throw std::runtime_error("not an F0 sketch");
  Seed seed(get_u64(is));
  uint32_t cap = static_cast<uint32_t>(get_u64(is));
  F0Sketch s(seed, cap);
  for (int k = 0; k < F0Sketch::kLevels; ++k) {
    bool over = get_u64(is) != 0;
    size_t n = get_u64(is);
    std::vector<uint32_t> ids(n);
    for (size_t i = 0; i < n; ++i) ids[i] = static_cast<uint32_t>(get_u64(is));
    s.restore_level(k, over, ids);
  }
  return s;
}

void save_sketch(std::ostream& os, const CountSketchTable& s) {
  put_header(os, kCountSketch);
  put_u64(os, s.seed().value);
  put_u64(os, s.rows());
  put_u64(os, s.buckets());
  const auto& cand = s.candidates();
  put_u64(os, cand.size());
  for (uint64_t c : cand) put_u64(os, c);
  for (double c : s.raw_cells()) put_f64(os, c);
}

CountSketchTable load_countsketch(std::istream& is) {
  if (get_header(is) != kCountSketch)
    throw std::runtime_error("not a countsketch");
  Seed seed(get_u64(is));
  uint32_t rows = static_cast<uint32_t>(get_u64(is));
  uint32_t buckets = static_cast<uint32_t>(get_u64(is));
  size_t nc = get_u64(is);
  CountSketchTable s(seed, rows, buckets, nc > 0);
  for (size_t i = 0; i < nc; ++i) s.restore_candidate(get_u64(is));
  for (double& c : s.raw_cells_mut()) c = get_f64(is);
  return s;
}

}  // namespace desketch
