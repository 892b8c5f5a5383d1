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

#ifndef DESKETCH_STREAM_HPP
#define DESKETCH_STREAM_HPP

#include <cstdint>
#include <vector>

namespace desketch {

// One stream event. The timestamp is the 1-based position in the stream.
struct StreamUpdate {
  uint64_t item = 0;
  int64_t delta = 1;
};

using UpdateSeq = std::vector<StreamUpdate>;

}  // namespace desketch

#endif  // DESKETCH_STREAM_HPP
