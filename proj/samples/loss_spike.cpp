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

// Two strongly correlated tokens, one frequent and one rare. A large step
// lets the frequent token overwrite the rare one: the loss jumps above its
// starting value before settling.

#include <cmath>
#include <cstdio>

#include "assocmem/closed_form.hpp"
#include "assocmem/dynamics.hpp"

int main() {
  using namespace assocmem;
  const auto emb = correlated_pair_embeddings(0.95);
  const auto task = two_token_task(0.75);
  const auto inst = two_token_instance(emb, task);

  std::printf("%6s %14s %14s\n", "step", "loss eta=1", "loss eta=10");
  DynamicsConfig cfg;
  cfg.kind = DynamicsKind::GD;
  cfg.t_end = 35;
  cfg.eta = Schedule::constant(1.0);
  const auto slow = gd_run(Matrix::Zero(2, 2), emb, task, cfg);
  cfg.eta = Schedule::constant(10.0);
  const auto fast = gd_run(Matrix::Zero(2, 2), emb, task, cfg);
  for (std::size_t k = 0; k < slow.size(); ++k) std::printf("%6.0f %14.6f %14.6f\n", slow.times[k], slow.loss[k], fast.loss[k]);

  std::printf("\nlog 2 = %.6f\n", std::log(2.0));
  std::printf("first-step lower bound at eta = 10: %.6f\n", spike_lower_bound(inst, 10.0).value);
  return 0;
}
