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

// Particle view of the training dynamics: the score table w_ij = u_j^T W e_i
// evolves as a system of particles coupled through the input correlations
// alpha_ij = <e_i, e_j> and output correlations beta_ijk = <u_i, u_j - u_k>.
//
// The particle table is a derived view. Dynamics run on W; this module exists
// to check the reduction and to iterate the small analytic settings directly.

#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "assocmem/model.hpp"

namespace assocmem {

struct CorrelationData {
  Matrix alpha;               // N x N
  std::vector<double> beta;   // M x M x M, row-major in (i, j, k)
  Index num_classes = 0;

  double beta_at(Index i, Index j, Index k) const {
    return beta[static_cast<std::size_t>((i * num_classes + j) * num_classes + k)];
  }
};

inline CorrelationData correlations(const EmbeddingSet& emb) {
  emb.validate();
  CorrelationData c;
  c.alpha = emb.inputs * emb.inputs.transpose();
  const Matrix G = emb.outputs * emb.outputs.transpose();
  const Index M = emb.num_classes();
  c.num_classes = M;
  c.beta.assign(static_cast<std::size_t>(M * M * M), 0.0);
  for (Index i = 0; i < M; ++i)
    for (Index j = 0; j < M; ++j)
      for (Index k = 0; k < M; ++k) {
        // Written as a difference of Gram entries so beta_ijk = -beta_ikj and
        // beta_ijj = 0 hold bit for bit.
        c.beta[static_cast<std::size_t>((i * M + j) * M + k)] = G(i, j) - G(i, k);
      }
  return c;
}

struct ParticleState {
  Matrix w;  // N x M
};

inline ParticleState project(const Weights& W, const EmbeddingSet& emb) { return {scores(W, emb)}; }

// Change of every particle after one descent step of size eta:
//   dw_ij = eta sum_x weight(x) alpha_ix sum_z beta_{j f*(x) z} p(z|x)
// with weight(x) = p(x) for the full batch, or the empirical frequency of x in
// `batch` for a mini-batch.
inline Matrix particle_update(const ParticleState& state, const CorrelationData& corr, const TaskSpec& task,
                              double eta, std::optional<std::span<const Index>> batch = std::nullopt) {
  const Index N = state.w.rows();
  const Index M = state.w.cols();
  if (corr.alpha.rows() != N || corr.num_classes != M || task.num_tokens() != N)
    throw std::invalid_argument("particle_update: shape mismatch");
  if (!(eta > 0.0)) throw std::invalid_argument("particle_update: eta must be positive");

  std::vector<double> weight(static_cast<std::size_t>(N), 0.0);
  if (batch) {
    if (batch->empty()) throw std::invalid_argument("particle_update: empty batch");
    for (Index x : *batch) {
      if (x < 0 || x >= N) throw std::out_of_range("particle_update: batch token out of range");
      weight[static_cast<std::size_t>(x)] += 1.0;
    }
    for (double& w : weight) w /= static_cast<double>(batch->size());
  } else {
    weight = task.freq;
  }

  const Matrix P = softmax_rows(state.w);
  // pull(x, j) = sum_z beta_{j f*(x) z} p(z|x); z = f*(x) contributes nothing.
  Matrix pull = Matrix::Zero(N, M);
  for (Index x = 0; x < N; ++x) {
    const Index y = task.targets[static_cast<std::size_t>(x)];
    for (Index j = 0; j < M; ++j) {
      double acc = 0.0;
      for (Index z = 0; z < M; ++z)
        if (z != y) acc += corr.beta_at(j, y, z) * P(x, z);
      pull(x, j) = weight[static_cast<std::size_t>(x)] * acc;
    }
  }
  return eta * corr.alpha * pull;
}

}  // namespace assocmem
