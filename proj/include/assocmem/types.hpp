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

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "assocmem/rng.hpp"

namespace assocmem {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// The memory matrix W (d x d). Scores are u_y^T W e_x throughout.
using Weights = Matrix;

enum class EmbeddingKind { Custom, Orthonormal, CorrelatedPair, Sphere };

inline const char* to_string(EmbeddingKind k) {
  switch (k) {
    case EmbeddingKind::Custom: return "custom";
    case EmbeddingKind::Orthonormal: return "orthonormal";
    case EmbeddingKind::CorrelatedPair: return "correlated_pair";
    case EmbeddingKind::Sphere: return "sphere";
  }
  return "?";
}

// Fixed input rows e_x (N x d) and output rows u_y (M x d). The generator
// fields are bookkeeping so a run can be regenerated.
struct EmbeddingSet {
  Matrix inputs;
  Matrix outputs;
  EmbeddingKind kind = EmbeddingKind::Custom;
  double alpha = 0.0;
  double output_scale = 1.0;
  std::uint64_t seed = 0;

  Index num_tokens() const { return inputs.rows(); }
  Index num_classes() const { return outputs.rows(); }
  Index dim() const { return inputs.cols(); }

  void validate() const {
    if (inputs.rows() < 1) throw std::invalid_argument("embeddings: need at least one input token");
    if (outputs.rows() < 2) throw std::invalid_argument("embeddings: need at least two classes");
    if (inputs.cols() < 2) throw std::invalid_argument("embeddings: dimension must be >= 2");
    if (outputs.cols() != inputs.cols())
      throw std::invalid_argument("embeddings: input and output dimensions differ");
    if (!inputs.allFinite() || !outputs.allFinite())
      throw std::invalid_argument("embeddings: non-finite entry");
  }
};

// Target map f* (0-based class per token) and token frequencies p.
struct TaskSpec {
  std::vector<Index> targets;
  std::vector<double> freq;

  Index num_tokens() const { return static_cast<Index>(targets.size()); }

  void validate(Index num_classes) const {
    if (targets.empty()) throw std::invalid_argument("task: empty target map");
    if (freq.size() != targets.size())
      throw std::invalid_argument("task: frequency vector length differs from token count");
    for (Index y : targets)
      if (y < 0 || y >= num_classes) throw std::invalid_argument("task: target class out of range");
    double total = 0.0;
    for (double q : freq) {
      if (!(q >= 0.0) || !std::isfinite(q)) throw std::invalid_argument("task: negative or non-finite frequency");
      total += q;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("task: frequencies must sum to 1");
  }
};

// --- embedding generators ---------------------------------------------------

// e_x = f_x and u_y = scale * f_y for the canonical basis (f_k).
inline EmbeddingSet orthonormal_embeddings(Index n, Index m, Index d, double output_scale = 1.0) {
  if (n > d || m > d) throw std::invalid_argument("orthonormal embeddings need N <= d and M <= d");
  EmbeddingSet emb;
  emb.inputs = Matrix::Identity(n, d);
  emb.outputs = output_scale * Matrix::Identity(m, d);
  emb.kind = EmbeddingKind::Orthonormal;
  emb.output_scale = output_scale;
  emb.validate();
  return emb;
}

// Two unit inputs with <e_1, e_2> = alpha, and orthogonal outputs of norm
// `output_scale`, so that ||u_1 - u_2||^2 = 2 * output_scale^2.
inline EmbeddingSet correlated_pair_embeddings(double alpha, Index d = 2, double output_scale = 1.0) {
  if (!(alpha >= -1.0 && alpha <= 1.0)) throw std::invalid_argument("correlated pair: alpha must lie in [-1, 1]");
  if (d < 2) throw std::invalid_argument("correlated pair: dimension must be >= 2");
  EmbeddingSet emb;
  emb.inputs = Matrix::Zero(2, d);
  emb.inputs(0, 0) = 1.0;
  emb.inputs(1, 0) = alpha;
  emb.inputs(1, 1) = std::sqrt(std::max(0.0, 1.0 - alpha * alpha));
  emb.outputs = output_scale * Matrix::Identity(2, d);
  emb.kind = EmbeddingKind::CorrelatedPair;
  emb.alpha = alpha;
  emb.output_scale = output_scale;
  emb.validate();
  return emb;
}

namespace detail {
inline Matrix sphere_rows(Index rows, Index d, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix out(rows, d);
  for (Index i = 0; i < rows; ++i) {
    double norm = 0.0;
    do {
      for (Index k = 0; k < d; ++k) out(i, k) = gauss(rng);
      norm = out.row(i).norm();
    } while (norm < 1e-12);
    out.row(i) /= norm;
  }
  return out;
}
}  // namespace detail

// Inputs and outputs drawn uniformly on the unit sphere of R^d.
inline EmbeddingSet sphere_embeddings(Index n, Index m, Index d, std::uint64_t seed) {
  EmbeddingSet emb;
  Rng in_rng = make_stream(seed, {0});
  Rng out_rng = make_stream(seed, {1});
  emb.inputs = detail::sphere_rows(n, d, in_rng);
  emb.outputs = detail::sphere_rows(m, d, out_rng);
  emb.kind = EmbeddingKind::Sphere;
  emb.seed = seed;
  emb.validate();
  return emb;
}

// --- task presets -----------------------------------------------------------

inline std::vector<Index> identity_targets(Index n) {
  std::vector<Index> t(static_cast<std::size_t>(n));
  std::iota(t.begin(), t.end(), Index{0});
  return t;
}

inline std::vector<Index> modulo_targets(Index n, Index m) {
  std::vector<Index> t(static_cast<std::size_t>(n));
  for (Index x = 0; x < n; ++x) t[static_cast<std::size_t>(x)] = x % m;
  return t;
}

inline std::vector<double> uniform_freq(Index n) {
  return std::vector<double>(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n));
}

// p(x) proportional to 1/x for x = 1..N.
inline std::vector<double> zipf_freq(Index n) {
  std::vector<double> p(static_cast<std::size_t>(n));
  double total = 0.0;
  for (Index x = 0; x < n; ++x) total += 1.0 / static_cast<double>(x + 1);
  for (Index x = 0; x < n; ++x) p[static_cast<std::size_t>(x)] = (1.0 / static_cast<double>(x + 1)) / total;
  return p;
}

inline std::vector<double> pair_freq(double p1) {
  if (!(p1 > 0.0 && p1 < 1.0)) throw std::invalid_argument("pair frequencies need 0 < p1 < 1");
  return {p1, 1.0 - p1};
}

// N = 2 tokens with f*(x) = x on a correlated pair.
inline TaskSpec two_token_task(double p1) { return TaskSpec{{0, 1}, pair_freq(p1)}; }

inline void check_problem(const EmbeddingSet& emb, const TaskSpec& task) {
  emb.validate();
  task.validate(emb.num_classes());
  if (task.num_tokens() != emb.num_tokens())
    throw std::invalid_argument("task token count differs from number of input embeddings");
}

}  // namespace assocmem
