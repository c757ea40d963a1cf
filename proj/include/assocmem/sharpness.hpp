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

#include <cmath>
#include <cstdint>

#include "assocmem/model.hpp"

namespace assocmem {

struct SharpnessOptions {
  double rel_tol = 1e-8;
  int max_iter = 10000;
  std::uint64_t seed = 0x5eed;
};

struct SharpnessResult {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Top eigenvalue of the loss Hessian by power iteration on the HVP operator.
// The Hessian is PSD, so this is also its operator norm. Stops once the
// eigen-residual ||Hv - lambda v|| drops below rel_tol * lambda.
inline SharpnessResult sharpness(const Weights& W, const EmbeddingSet& emb, const TaskSpec& task,
                                 const SharpnessOptions& opt = {}) {
  check_shapes(W, emb, task);
  Rng rng = make_stream(opt.seed, {static_cast<std::uint64_t>(W.rows())});
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix v(W.rows(), W.cols());
  for (Index k = 0; k < v.size(); ++k) v.data()[k] = gauss(rng);
  v /= v.norm();

  SharpnessResult out;
  const double floor = std::numeric_limits<double>::min();
  for (int it = 1; it <= opt.max_iter; ++it) {
    const Matrix Hv = hessian_vector_product(W, emb, task, v);
    const double lambda = inner(v, Hv);
    const double hv_norm = Hv.norm();
    out.iterations = it;
    out.value = std::max(lambda, 0.0);
    if (hv_norm <= floor) {
      // v sits in the null space; curvature along every explored direction is zero
      // to working precision.
      out.value = 0.0;
      out.converged = true;
      return out;
    }
    const double residual = (Hv - lambda * v).norm();
    if (residual <= opt.rel_tol * std::abs(lambda)) {
      out.converged = true;
      return out;
    }
    v = Hv / hv_norm;
  }
  return out;
}

}  // namespace assocmem
