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

#ifndef DESKETCH_SERIALIZE_HPP
#define DESKETCH_SERIALIZE_HPP

#include <iosfwd>
#include <memory>

#include "desketch/countsketch.hpp"
#include "desketch/f0_sketch.hpp"
#include "desketch/sign_sketch.hpp"
#include "desketch/stable_sketch.hpp"

namespace desketch {

// Versioned binary blobs: header (magic, version, family tag, dimensions,
// seed), body of little-endian 64-bit words. Hash structure regenerates
// deterministically from the stored seed.

void save_sketch(std::ostream& os, const SignSketch& s);
void save_sketch(std::ostream& os, const StableSketch& s);
void save_sketch(std::ostream& os, const F0Sketch& s);
void save_sketch(std::ostream& os, const CountSketchTable& s);

SignSketch load_sign_sketch(std::istream& is);
StableSketch load_stable_sketch(std::istream& is);
F0Sketch load_f0_sketch(std::istream& is);
CountSketchTable load_countsketch(std::istream& is);

// Peek at the family tag without consuming the stream position.
uint8_t peek_family(std::istream& is);

}  // namespace desketch

#endif  // DESKETCH_SERIALIZE_HPP
