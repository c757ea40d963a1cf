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

// Two-dimensional coordinates that determine the loss in the small settings.
//
// Canonical (d = M = 2, any N):  gamma_i = (u_2 - u_1)^T W f_i, f_i canonical.
// TwoToken  (N = M = 2):         gamma_i = 1/2 (u_1 - u_2)^T W f_i with
//                                f_1 = e_1 + e_2, f_2 = e_1 - e_2,
//                                so m_1 = gamma1 + gamma2, m_2 = gamma2 - gamma1.

#pragma once

#include <stdexcept>
#include <utility>

#include "assocmem/model.hpp"

namespace assocmem {

enum class GammaBasis { Canonical, TwoToken };

inline const char* to_string(GammaBasis b) { return b == GammaBasis::Canonical ? "canonical" : "two_token"; }

struct GammaCoords {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  GammaBasis basis = GammaBasis::Canonical;
};

namespace detail {

inline void check_gamma_mode(const EmbeddingSet& emb, GammaBasis basis) {
  if (basis == GammaBasis::Canonical) {
    if (emb.dim() != 2 || emb.num_classes() != 2)
      throw std::invalid_argument("canonical gamma coordinates need d = M = 2");
  } else {
    if (emb.num_tokens() != 2 || emb.num_classes() != 2)
      throw std::invalid_argument("two-token gamma coordinates need N = M = 2");
  }
}

// Columns f_1, f_2 of the basis, and the row vector that gets paired with W.
inline std::pair<Matrix, Vector> gamma_frame(const EmbeddingSet& emb, GammaBasis basis) {
  const Vector u1 = emb.outputs.row(0).transpose();
  const Vector u2 = emb.outputs.row(1).transpose();
  Matrix F(emb.dim(), 2);
  Vector lead;
  if (basis == GammaBasis::Canonical) {
    F = Matrix::Identity(2, 2);
    lead = u2 - u1;
  } else {
    F.col(0) = (emb.inputs.row(0) + emb.inputs.row(1)).transpose();
    F.col(1) = (emb.inputs.row(0) - emb.inputs.row(1)).transpose();
    lead = 0.5 * (u1 - u2);
  }
  return {F, lead};
}

}  // namespace detail

inline GammaCoords gamma_coords(const Weights& W, const EmbeddingSet& emb, GammaBasis basis) {
  detail::check_gamma_mode(emb, basis);
  check_weights(W, emb);
  const auto [F, lead] = detail::gamma_frame(emb, basis);
  const Vector g = (lead.transpose() * W * F).transpose();
  return {g(0), g(1), basis};
}

// Smallest-norm W with the prescribed coordinates: W = lead a^T / ||lead||^2
// with a^T f_i = gamma_i and a in the span of the f_i. Everything the loss
// ignores is left at zero.
inline Weights w_from_gamma(const GammaCoords& g, const EmbeddingSet& emb) {
  detail::check_gamma_mode(emb, g.basis);
  const auto [F, lead] = detail::gamma_frame(emb, g.basis);
  const double lead_sq = lead.squaredNorm();
  if (lead_sq <= 0.0) throw std::invalid_argument("w_from_gamma: output embeddings coincide");
  const Eigen::Vector2d target(g.gamma1, g.gamma2);
  const Eigen::Matrix2d gram = F.transpose() * F;
  if (std::abs(gram.determinant()) < 1e-14 * (1.0 + gram.squaredNorm()))
    throw std::invalid_argument("w_from_gamma: basis vectors are linearly dependent");
  const Vector a = F * gram.ldlt().solve(target);
  return lead * a.transpose() / lead_sq;
}

inline std::pair<double, double> margins_from_gamma(const GammaCoords& g) {
  if (g.basis != GammaBasis::TwoToken) throw std::invalid_argument("margins_from_gamma: two-token basis only");
  return {g.gamma1 + g.gamma2, g.gamma2 - g.gamma1};
}

inline GammaCoords gamma_from_margins(double m1, double m2) {
  return {0.5 * (m1 - m2), 0.5 * (m1 + m2), GammaBasis::TwoToken};
}

}  // namespace assocmem
