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

// Analytic results for the small settings, used as oracles for the simulators.
//
//  * binary orthogonal gradient flow: the margin solves m + e^m = c (t - t0)
//  * multi-class orthonormal flow: conserved quantities and limit direction
//  * two correlated tokens: the (gamma1, gamma2) system, its GD envelope and
//    the first-step loss spike

#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "assocmem/dynamics.hpp"
#include "assocmem/lambert_w.hpp"
#include "assocmem/model.hpp"
#include "assocmem/ode.hpp"

namespace assocmem {

// --- binary, orthogonal embeddings -------------------------------------------

struct BinaryOrthogonalInstance {
  double c = 1.0;   // p(x) ||e_x||^2 ||u_1 - u_2||^2
  double m0 = 0.0;  // margin at t = 0
  double t0 = 0.0;  // -(exp(m0) + m0) / c

  static BinaryOrthogonalInstance make(double c, double m0) {
    if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("binary instance: c must be positive");
    if (!std::isfinite(m0)) throw std::invalid_argument("binary instance: m0 must be finite");
    return {c, m0, -(std::exp(m0) + m0) / c};
  }
};

// c_x for token x of a two-class problem.
inline double binary_rate(const EmbeddingSet& emb, const TaskSpec& task, Index x) {
  if (emb.num_classes() != 2) throw std::invalid_argument("binary_rate: two classes required");
  if (x < 0 || x >= emb.num_tokens()) throw std::out_of_range("binary_rate: token out of range");
  return task.freq[static_cast<std::size_t>(x)] * emb.inputs.row(x).squaredNorm() *
         (emb.outputs.row(0) - emb.outputs.row(1)).squaredNorm();
}

struct ClosedMargin {
  double value = 0.0;
  bool in_regime = true;  // t >= t0
};

// With s = c (t - t0) = ct + e^{m0} + m0, the margin is m = s - W0(e^s), which
// equals log W0(e^s). The log form never overflows.
inline ClosedMargin binary_margin_closed(const BinaryOrthogonalInstance& inst, double t) {
  const double s = inst.c * (t - inst.t0);
  return {std::log(lambert_w0_exp(s)), t >= inst.t0};
}

// log(c (t - t0)) - m_t, evaluated as log1p(log w / w) with w = W0(e^s) to avoid
// cancellation. Requires c (t - t0) > 0.
inline double binary_log_gap(const BinaryOrthogonalInstance& inst, double t) {
  const double s = inst.c * (t - inst.t0);
  if (!(s > 0.0)) throw std::domain_error("binary_log_gap: needs c (t - t0) > 0");
  const double w = lambert_w0_exp(s);
  return std::log1p(std::log(w) / w);
}

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

inline Interval h_bound(double x) {
  if (!(x >= 1.0)) throw std::domain_error("h_bound: x must be >= 1");
  return {0.0, 2.0 * std::log(x) / x};
}

// Loss of GD from W0 = 0 with constant eta on a binary orthogonal problem is at
// most (1 / (t eta)) sum_x p(x) / c_x.
inline double gd_loss_bound(const EmbeddingSet& emb, const TaskSpec& task, double eta, double t) {
  if (!(eta > 0.0) || !(t > 0.0)) throw std::invalid_argument("gd_loss_bound: eta and t must be positive");
  double acc = 0.0;
  for (Index x = 0; x < emb.num_tokens(); ++x) {
    const double p = task.freq[static_cast<std::size_t>(x)];
    if (p > 0.0) acc += p / binary_rate(emb, task, x);
  }
  return acc / (t * eta);
}

// --- multi-class, orthonormal embeddings ---------------------------------------

// exp(-w_i) - exp(-w_j) for every pair i < j of non-target classes, in
// lexicographic pair order.
inline std::vector<double> multiclass_invariants(const Vector& w_row, Index target) {
  if (target < 0 || target >= w_row.size()) throw std::out_of_range("multiclass_invariants: bad target");
  if (!w_row.allFinite()) throw std::invalid_argument("multiclass_invariants: non-finite scores");
  std::vector<double> out;
  for (Index i = 0; i < w_row.size(); ++i) {
    if (i == target) continue;
    for (Index j = i + 1; j < w_row.size(); ++j) {
      if (j == target) continue;
      out.push_back(std::exp(-w_row(i)) - std::exp(-w_row(j)));
    }
  }
  return out;
}

struct AsymptoticDirection {
  Matrix direction;  // sum_x Pi(u_{f*(x)}) e_x^T
  double constant = 0.0;
};

inline bool rows_orthonormal(const Matrix& rows, double tol = 1e-10) {
  const Matrix G = rows * rows.transpose();
  return (G - Matrix::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff() <= tol;
}

inline AsymptoticDirection asymptotic_direction(const EmbeddingSet& emb, const TaskSpec& task) {
  check_problem(emb, task);
  if (!rows_orthonormal(emb.inputs) || !rows_orthonormal(emb.outputs))
    throw std::invalid_argument("asymptotic_direction: orthonormal embeddings required");
  const Matrix Pi = update_span(emb).out;
  Matrix D = Matrix::Zero(emb.dim(), emb.dim());
  for (Index x = 0; x < emb.num_tokens(); ++x) {
    const Vector u = emb.outputs.row(task.targets[static_cast<std::size_t>(x)]).transpose();
    D.noalias() += (Pi * u) * emb.inputs.row(x);
  }
  const double M = static_cast<double>(emb.num_classes());
  return {D, (M - 1.0) / (std::sqrt(2.0) * M)};
}

inline double cosine_similarity(const Matrix& A, const Matrix& B) {
  const double na = A.norm();
  const double nb = B.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return inner(A, B) / (na * nb);
}

// --- two correlated tokens ------------------------------------------------------

struct TwoTokenInstance {
  double p1 = 0.5;
  double p2 = 0.5;
  double alpha = 0.0;
  double c = 1.0;   // ||u_1 - u_2||^2
  double c0 = 1.0;  // (1 - alpha) c
  bool swapped = false;  // tokens were relabelled so that p1 >= p2

  static TwoTokenInstance make(double p1, double alpha, double c = 1.0) {
    if (!(p1 > 0.0 && p1 < 1.0)) throw std::invalid_argument("two-token instance: 0 < p1 < 1 required");
    if (!(alpha >= -1.0 && alpha <= 1.0)) throw std::invalid_argument("two-token instance: |alpha| <= 1 required");
    if (!(c > 0.0)) throw std::invalid_argument("two-token instance: c must be positive");
    TwoTokenInstance inst;
    inst.p1 = p1;
    inst.p2 = 1.0 - p1;
    if (inst.p1 < inst.p2) {
      std::swap(inst.p1, inst.p2);
      inst.swapped = true;
    }
    inst.alpha = alpha;
    inst.c = c;
    inst.c0 = (1.0 - alpha) * c;
    return inst;
  }

  double gamma_bar() const { return 0.5 * std::log(p1 / p2); }
};

// Reads p1, alpha and c off a correlated-pair problem (unit inputs).
inline TwoTokenInstance two_token_instance(const EmbeddingSet& emb, const TaskSpec& task) {
  if (emb.num_tokens() != 2 || emb.num_classes() != 2) throw std::invalid_argument("two_token_instance: N = M = 2");
  const double alpha = emb.inputs.row(0).dot(emb.inputs.row(1));
  const double c = (emb.outputs.row(0) - emb.outputs.row(1)).squaredNorm();
  return TwoTokenInstance::make(task.freq[0], alpha, c);
}

struct GammaRate {
  double d_gamma1 = 0.0;
  double d_gamma2 = 0.0;
};

// Right-hand side in the rescaled time ct. The W-space gradient flow moves the
// coordinates at (c / 2) times this rate.
inline GammaRate gamma_ode_rhs(const TwoTokenInstance& inst, double gamma1, double gamma2) {
  const double s1 = 1.0 / (1.0 + std::exp(gamma2 + gamma1));
  const double s2 = 1.0 / (1.0 + std::exp(gamma2 - gamma1));
  return {(1.0 + inst.alpha) * (inst.p1 * s1 - inst.p2 * s2), (1.0 - inst.alpha) * (inst.p1 * s1 + inst.p2 * s2)};
}

inline double gamma1_limit(const TwoTokenInstance& inst) { return inst.gamma_bar(); }

// (p1 - p2) e^{-gamma2} / (2 sqrt(p1 p2)); gamma1 decreases iff sinh(gamma1 - gamma_bar) exceeds it.
inline double gamma1_threshold(const TwoTokenInstance& inst, double gamma2) {
  return (inst.p1 - inst.p2) * std::exp(-gamma2) / (2.0 * std::sqrt(inst.p1 * inst.p2));
}

// Integrates the coordinates in W-space time (rate (c / 2) * gamma_ode_rhs),
// returning them at `times`.
inline std::vector<GammaCoords> gamma_flow(const TwoTokenInstance& inst, GammaCoords start,
                                           const std::vector<double>& times, const OdeOptions& opt = {}) {
  if (times.empty()) return {};
  std::vector<GammaCoords> out;
  Vector y(2);
  y << start.gamma1, start.gamma2;
  const double scale = 0.5 * inst.c;
  auto rhs = [&](double, const Vector& g) -> Vector {
    const GammaRate r = gamma_ode_rhs(inst, g(0), g(1));
    Vector dy(2);
    dy << scale * r.d_gamma1, scale * r.d_gamma2;
    return dy;
  };
  auto observe = [&](double, const Vector& g) {
    out.push_back({g(0), g(1), GammaBasis::TwoToken});
    return true;
  };
  const OdeStats stats = integrate_dopri5(rhs, y, 0.0, times.back(), times, observe, opt);
  if (!stats.ok) throw std::runtime_error("gamma_flow: " + stats.message);
  return out;
}

// Envelope for GD with constant eta from W0 = 0.
struct GdGammaBounds {
  double gamma_bar = 0.0;
  double gamma_min = 0.0;
  double gamma_max = 0.0;
  double c1 = 0.0;  // (1 - alpha) c p2
  double c2 = 0.0;  // 8 c (1 - alpha) p1^3 / p2^2
  double eta = 0.0;

  double gamma1_lower() const { return std::min(0.0, gamma_min); }
  double gamma1_upper() const { return gamma_max; }
  // exp(gamma2(t)) >= eta c1 t / 2 + 1
  double exp_gamma2_lower(double t) const { return eta * c1 * t / 2.0 + 1.0; }
  double gamma2_lower(double t) const { return std::log(exp_gamma2_lower(t)); }
  double gamma2_upper(double t) const { return std::log(c2 * t + 1.0); }
};

inline GdGammaBounds gd_gamma_bounds(const TwoTokenInstance& inst, double eta) {
  if (!(eta >= 0.0)) throw std::invalid_argument("gd_gamma_bounds: eta must be >= 0");
  GdGammaBounds b;
  b.eta = eta;
  b.gamma_bar = inst.gamma_bar();
  const double kick = eta * inst.c * (1.0 - inst.alpha);
  b.gamma_max = b.gamma_bar + inst.p1 / (2.0 * inst.p2) + kick * inst.p1;
  b.gamma_min = b.gamma_bar - kick * inst.p2;
  b.c1 = (1.0 - inst.alpha) * inst.c * inst.p2;
  b.c2 = 8.0 * inst.c * (1.0 - inst.alpha) * inst.p1 * inst.p1 * inst.p1 / (inst.p2 * inst.p2);
  return b;
}

struct SpikeBound {
  double value = 0.0;
  bool applicable = false;
};

// Loss after one GD step from W0 = 0 is at least eta (alpha p1 - p2) p2, for
// embeddings scaled so that c / 2 = 1 (the rarer margin then moves by exactly
// eta (p2 - alpha p1)).
inline SpikeBound spike_lower_bound(const TwoTokenInstance& inst, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("spike_lower_bound: eta must be positive");
  const double excess = inst.alpha * inst.p1 - inst.p2;
  if (!(excess > 0.0)) return {0.0, false};
  return {eta * excess * inst.p2, true};
}

}  // namespace assocmem
