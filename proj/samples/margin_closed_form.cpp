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

// Binary problem with orthonormal embeddings: the gradient-flow margin of
// each token follows m + exp(m) = c t + 1, solved with the Lambert W function.

#include <cstdio>

#include "assocmem/analysis.hpp"
#include "assocmem/closed_form.hpp"
#include "assocmem/dynamics.hpp"

int main() {
  using namespace assocmem;
  const auto emb = orthonormal_embeddings(3, 2, 3);
  const TaskSpec task{{0, 1, 1}, {0.5, 0.3, 0.2}};

  DynamicsConfig cfg;
  cfg.kind = DynamicsKind::GF;
  cfg.t_end = 1000.0;
  cfg.record_times = logspace(-1.0, 3.0, 9);
  const auto rec = gf_run(Matrix::Zero(3, 3), emb, task, cfg);

  std::printf("%10s", "t");
  for (int x = 1; x <= 3; ++x) std::printf("   gf m%d  closed m%d", x, x);
  std::printf("\n");
  for (std::size_t k = 0; k < rec.size(); ++k) {
    std::printf("%10.3g", rec.times[k]);
    for (Index x = 0; x < 3; ++x) {
      const auto inst = BinaryOrthogonalInstance::make(binary_rate(emb, task, x), 0.0);
      std::printf("  %8.5f  %8.5f", rec.gaps[k](x), binary_margin_closed(inst, rec.times[k]).value);
    }
    std::printf("\n");
  }
  return 0;
}
