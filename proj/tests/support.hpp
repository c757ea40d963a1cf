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

// Seeded generators for property tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "assocmem/model.hpp"

namespace assocmem::testing {

struct Instance {
  EmbeddingSet emb;
  TaskSpec task;
  Weights W;
};

inline Matrix gaussian(Index rows, Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix A(rows, cols);
  for (Index k = 0; k < A.size(); ++k) A.data()[k] = g(rng);
  return A;
}

inline std::vector<double> random_simplex(Index n, Rng& rng) {
  std::exponential_distribution<double> ex(1.0);
  std::vector<double> p(static_cast<std::size_t>(n));
  double s = 0.0;
  for (double& v : p) s += (v = ex(rng) + 1e-3);
  for (double& v : p) v /= s;
  // Push the rounding residue into the largest entry so the sum is 1 to ~1 ulp.
  double total = 0.0;
  for (double v : p) total += v;
  *std::max_element(p.begin(), p.end()) += 1.0 - total;
  return p;
}

inline Instance random_instance(Index n, Index m, Index d, Rng& rng, double w_scale = 1.0) {
  Instance inst;
  inst.emb.inputs = gaussian(n, d, rng);
  inst.emb.outputs = gaussian(m, d, rng);
  std::uniform_int_distribution<Index> cls(0, m - 1);
  for (Index x = 0; x < n; ++x) inst.task.targets.push_back(cls(rng));
  inst.task.freq = random_simplex(n, rng);
  inst.W = gaussian(d, d, rng, w_scale);
  return inst;
}

inline Instance random_small_instance(Rng& rng, Index max_size = 6) {
  std::uniform_int_distribution<Index> nd(1, max_size), md(2, max_size), dd(2, max_size);
  return random_instance(nd(rng), md(rng), dd(rng), rng);
}

inline double rel_err(const Matrix& a, const Matrix& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-300});
  return (a - b).norm() / scale;
}

}  // namespace assocmem::testing
