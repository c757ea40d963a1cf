// Copyright 2026 The assocmem Authors
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

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace assocmem {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream for (seed, i0, i1, ...). Distinct index tuples give
// unrelated engines, so grid cells and replicas can run in any order.
inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> indices = {}) {
  std::uint64_t key = splitmix64(seed);
  for (std::uint64_t i : indices) key = splitmix64(key ^ splitmix64(i + 0x632be59bd9b4e019ULL));
  return Rng(key);
}

}  // namespace assocmem
