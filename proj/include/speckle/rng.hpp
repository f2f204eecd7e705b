// Copyright 2026 The Speckle Memory Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <random>

namespace speckle {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent engine per (seed, stream, substream). Counter-style: no state
/// is carried between substreams, so any step can be regenerated in isolation.
inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream) {
  std::uint64_t k = splitmix64(seed);
  k = splitmix64(k ^ stream);
  k = splitmix64(k ^ (substream * 0xd1342543de82ef95ULL));
  return std::mt19937_64(k);
}

/// Noise source for one realization; the engine for axial step k is make_engine(seed, realization, k).
struct NoiseStream {
  std::uint64_t seed = 0;
  std::uint64_t realization = 0;

  std::mt19937_64 engine(std::uint64_t step) const { return make_engine(seed, realization, step); }
};

}  // namespace speckle
