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

// Associative memory model f_W(x) = argmax_y u_y^T W e_x trained with the
// cross-entropy loss. Every function here is pure.

#pragma once

#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "assocmem/types.hpp"

namespace assocmem {

inline void check_weights(const Weights& W, const EmbeddingSet& emb) {
  if (W.rows() != emb.dim() || W.cols() != emb.dim())
    throw std::invalid_argument("weights must be d x d with d the embedding dimension");
}

inline void check_shapes(const Weights& W, const EmbeddingSet& emb, const TaskSpec& task) {
  check_weights(W, emb);
  if (task.num_tokens() != emb.num_tokens())
    throw std::invalid_argument("task token count differs from number of input embeddings");
  if (task.freq.size() != task.targets.size())
    throw std::invalid_argument("task frequency/target length mismatch");
  for (Index y : task.targets)
    if (y < 0 || y >= emb.num_classes()) throw std::invalid_argument("task target out of range");
}

// Score table S(x, y) = u_y^T W e_x, shape N x M.
inline Matrix scores(const Weights& W, const EmbeddingSet& emb) {
  check_weights(W, emb);
  return emb.inputs * W.transpose() * emb.outputs.transpose();
}

// Row-wise softmax with the row max subtracted.
inline Matrix softmax_rows(const Matrix& S) {
  Matrix P(S.rows(), S.cols());
  for (Index x = 0; x < S.rows(); ++x) {
    const double top = S.row(x).maxCoeff();
    P.row(x) = (S.row(x).array() - top).exp();
    P.row(x) /= P.row(x).sum();
  }
  return P;
}

// log sum_z exp(s_z), stable for any finite row.
inline double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  const double top = row.maxCoeff();
  return top + std::log((row.array() - top).exp().sum());
}

// Lowest index wins ties.
inline Index argmax_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  Index best = 0;
  for (Index y = 1; y < row.size(); ++y)
    if (row(y) > row(best)) best = y;
  return best;
}

inline Index predict(const Weights& W, const EmbeddingSet& emb, Index x) {
  if (x < 0 || x >= emb.num_tokens()) throw std::out_of_range("predict: token index out of range");
  check_weights(W, emb);
  const Vector s = emb.outputs * (W * emb.inputs.row(x).transpose());
  return argmax_row(s.transpose());
}

inline std::vector<Index> predictions(const Weights& W, const EmbeddingSet& emb) {
  const Matrix S = scores(W, emb);
  std::vector<Index> out(static_cast<std::size_t>(S.rows()));
  for (Index x = 0; x < S.rows(); ++x) out[static_cast<std::size_t>(x)] = argmax_row(S.row(x));
  return out;
}

// log sum_z exp(s_z) - s_y. When s_y is the largest score this is evaluated as
// log1p of the other terms, which keeps full relative accuracy for tiny losses.
inline double token_loss(const Eigen::Ref<const Eigen::RowVectorXd>& row, Index y) {
  const double sy = row(y);
  if (sy < row.maxCoeff()) return log_sum_exp(row) - sy;
  double rest = 0.0;
  for (Index z = 0; z < row.size(); ++z)
    if (z != y) rest += std::exp(row(z) - sy);
  return std::log1p(rest);
}

inline double loss_from_scores(const Matrix& S, const TaskSpec& task) {
  double total = 0.0;
  for (Index x = 0; x < S.rows(); ++x) {
    const auto xi = static_cast<std::size_t>(x);
    total += task.freq[xi] * token_loss(S.row(x), task.targets[xi]);
  }
  return total;
}

inline double loss(const Weights& W, const EmbeddingSet& emb, const TaskSpec& task) {
  check_shapes(W, emb, task);
  return loss_from_scores(scores(W, emb), task);
}

inline double zero_one_from_scores(const Matrix& S, const TaskSpec& task) {
  double total = 0.0;
  for (Index x = 0; x < S.rows(); ++x) {
    const auto xi = static_cast<std::size_t>(x);
    if (argmax_row(S.row(x)) != task.targets[xi]) total += task.freq[xi];
  }
  return total;
}

inline double zero_one_loss(const Weights& W, const EmbeddingSet& emb, const TaskSpec& task) {
  check_shapes(W, emb, task);
  return zero_one_from_scores(scores(W, emb), task);
}

// Gradient of sum_x weight(x) * l(W; x, f*(x)):
//   sum_x weight(x) sum_z p_W(z|x) (u_z - u_{f*(x)}) e_x^T  =  U^T R^T E
// with R(x, z) = weight(x) (p_W(z|x) - [z = f*(x)]).
inline Matrix weighted_grad(const Weights& W, const EmbeddingSet& emb, const TaskSpec& task,
                            std::span<const double> weights) {
  check_shapes(W, emb, task);
  if (static_cast<Index>(weights.size()) != emb.num_tokens())
    throw std::invalid_argument("weighted_grad: one weight per token required");
  Matrix R = softmax_rows(scores(W, emb));
  for (Index x = 0; x < R.rows(); ++x) {
    const auto xi = static_cast<std::size_t>(x);
    R(x, task.targets[xi]) -= 1.0;
    R.row(x) *= weights[xi];
  }
  return emb.outputs.transpose() * R.transpose() * emb.inputs;
}

inline Matrix grad(const Weights& W, const EmbeddingSet& emb, const TaskSpec& task) {
  return weighted_grad(W, emb, task, task.freq);
}

// One score evaluation for both quantities; used by the descent loops.
inline std::pair<double, Matrix> loss_and_grad(const Weights& W, const EmbeddingSet& emb, const TaskSpec& task) {
  check_shapes(W, emb, task);
  const Matrix S = scores(W, emb);
  Matrix R = softmax_rows(S);
  double total = 0.0;
  for (Index x = 0; x < R.rows(); ++x) {
    const auto xi = static_cast<std::size_t>(x);
    const Index y = task.targets[xi];
    total += task.freq[xi] * token_loss(S.row(x), y);
    R(x, y) -= 1.0;
    R.row(x) *= task.freq[xi];
  }
  return {total, emb.outputs.transpose() * R.transpose() * emb.inputs};
}

// Hessian applied to a direction V. Differentiates the gradient along V:
// the score change is dS = E V^T U^T, the softmax responds with
// dP = P .* (dS - rowsum(P .* dS)), and the gradient changes by U^T (p .* dP)^T E.
inline Matrix hessian_vector_product(const Weights& W, const EmbeddingSet& emb, const TaskSpec& task,
                                     const Matrix& V) {
  check_shapes(W, emb, task);
  if (V.rows() != W.rows() || V.cols() != W.cols())
    throw std::invalid_argument("hessian_vector_product: direction must have the shape of W");
  const Matrix P = softmax_rows(scores(W, emb));
  const Matrix dS = emb.inputs * V.transpose() * emb.outputs.transpose();
  Matrix dP(P.rows(), P.cols());
  for (Index x = 0; x < P.rows(); ++x) {
    const double mean = P.row(x).dot(dS.row(x));
    dP.row(x) = task.freq[static_cast<std::size_t>(x)] *
                (P.row(x).array() * (dS.row(x).array() - mean)).matrix();
  }
  return emb.outputs.transpose() * dP.transpose() * emb.inputs;
}

// Dense Hessian in the column-major vec(W) basis (entry (i, j) of W sits at
// i + d*j), assembled term by term from
//   sum_x p(x) sum_{z,z'} p(z|x) ([z = z'] - p(z'|x)) vec(u_z e_x^T) vec(u_z' e_x^T)^T.
// Only meant for small d; it is the oracle for the operator form above.
inline Matrix dense_hessian(const Weights& W, const EmbeddingSet& emb, const TaskSpec& task) {
  check_shapes(W, emb, task);
  const Index d = emb.dim();
  if (d * d > 4096) throw std::invalid_argument("dense_hessian: d too large to materialize");
  const Matrix P = softmax_rows(scores(W, emb));
  const Index M = emb.num_classes();
  Matrix H = Matrix::Zero(d * d, d * d);
  std::vector<Vector> atoms(static_cast<std::size_t>(M));
  for (Index x = 0; x < emb.num_tokens(); ++x) {
    for (Index z = 0; z < M; ++z) {
      const Matrix outer = emb.outputs.row(z).transpose() * emb.inputs.row(x);
      atoms[static_cast<std::size_t>(z)] = Eigen::Map<const Vector>(outer.data(), d * d);
    }
    const double px = task.freq[static_cast<std::size_t>(x)];
    for (Index z = 0; z < M; ++z)
      for (Index zp = 0; zp < M; ++zp) {
        const double coeff = px * P(x, z) * ((z == zp ? 1.0 : 0.0) - P(x, zp));
        H.noalias() += coeff * atoms[static_cast<std::size_t>(z)] * atoms[static_cast<std::size_t>(zp)].transpose();
      }
  }
  return H;
}

// Pairwise margins m_i(x) = (u_{f*(x)} - u_i)^T W e_x and the gap
// min_{i != f*(x)} m_i(x). Token x is classified correctly iff gap > 0.
struct MarginVector {
  Vector pairwise;
  double gap = 0.0;
};

inline std::vector<MarginVector> margins_from_scores(const Matrix& S, const TaskSpec& task) {
  std::vector<MarginVector> out(static_cast<std::size_t>(S.rows()));
  for (Index x = 0; x < S.rows(); ++x) {
    const auto xi = static_cast<std::size_t>(x);
    const Index y = task.targets[xi];
    MarginVector mv;
    mv.pairwise = (S(x, y) - S.row(x).array()).matrix().transpose();
    mv.gap = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < S.cols(); ++i)
      if (i != y) mv.gap = std::min(mv.gap, mv.pairwise(i));
    out[xi] = std::move(mv);
  }
  return out;
}

inline std::vector<MarginVector> margins(const Weights& W, const EmbeddingSet& emb, const TaskSpec& task) {
  check_shapes(W, emb, task);
  return margins_from_scores(scores(W, emb), task);
}

inline Vector gap_margins(const Weights& W, const EmbeddingSet& emb, const TaskSpec& task) {
  const auto mv = margins(W, emb, task);
  Vector g(static_cast<Index>(mv.size()));
  for (std::size_t x = 0; x < mv.size(); ++x) g(static_cast<Index>(x)) = mv[x].gap;
  return g;
}

// Frobenius inner product <A, B>.
inline double inner(const Matrix& A, const Matrix& B) { return (A.array() * B.array()).sum(); }

}  // namespace assocmem
