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

// Diagnostics built on the model: loss landscapes over gamma coordinates,
// steps-to-accuracy phase diagrams and the excess 0-1 risk of the
// cross-entropy minimizer in the underparameterized d = M = 2 setting.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "assocmem/dynamics.hpp"
#include "assocmem/gamma.hpp"
#include "assocmem/model.hpp"
#include "assocmem/parallel.hpp"
#include "assocmem/sharpness.hpp"

namespace assocmem {

// --- landscape -----------------------------------------------------------------

struct GridSpec {
  double gamma1_min = -10.0, gamma1_max = 10.0;
  double gamma2_min = -10.0, gamma2_max = 10.0;
  Index n1 = 512, n2 = 512;
  GammaBasis basis = GammaBasis::Canonical;
  bool with_sharpness = false;

  void validate() const {
    if (n1 < 2 || n2 < 2) throw std::invalid_argument("grid: need at least 2 points per axis");
    if (!(gamma1_max > gamma1_min) || !(gamma2_max > gamma2_min))
      throw std::invalid_argument("grid: empty gamma range");
  }
};

inline std::vector<double> linspace(double lo, double hi, Index n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k)
    v[static_cast<std::size_t>(k)] = (k == n - 1) ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
  return v;
}

inline std::vector<double> logspace(double lo_exp, double hi_exp, Index n) {
  std::vector<double> v = linspace(lo_exp, hi_exp, n);
  for (double& x : v) x = std::pow(10.0, x);
  return v;
}

// Fields are indexed (i1, i2) with i1 along gamma1.
struct LandscapeGrid {
  GridSpec spec;
  std::vector<double> axis1, axis2;
  Matrix loss;
  Matrix zero_one;
  std::optional<Matrix> sharpness;

  // Bilinear interpolation of `field`, clamped to the grid.
  double interpolate(const Matrix& field, double g1, double g2) const {
    auto locate = [](const std::vector<double>& axis, double g, Index& i, double& frac) {
      const double lo = axis.front(), hi = axis.back();
      const double pos = std::clamp((g - lo) / (hi - lo), 0.0, 1.0) * static_cast<double>(axis.size() - 1);
      i = std::min(static_cast<Index>(pos), static_cast<Index>(axis.size()) - 2);
      frac = pos - static_cast<double>(i);
    };
    Index i1, i2;
    double f1, f2;
    locate(axis1, g1, i1, f1);
    locate(axis2, g2, i2, f2);
    return (1 - f1) * (1 - f2) * field(i1, i2) + f1 * (1 - f2) * field(i1 + 1, i2) + (1 - f1) * f2 * field(i1, i2 + 1) +
           f1 * f2 * field(i1 + 1, i2 + 1);
  }
  double loss_at(double g1, double g2) const { return interpolate(loss, g1, g2); }
};

inline LandscapeGrid landscape(const EmbeddingSet& emb, const TaskSpec& task, const GridSpec& spec,
                               std::size_t jobs = 1) {
  spec.validate();
  check_problem(emb, task);
  detail::check_gamma_mode(emb, spec.basis);
  LandscapeGrid grid;
  grid.spec = spec;
  grid.axis1 = linspace(spec.gamma1_min, spec.gamma1_max, spec.n1);
  grid.axis2 = linspace(spec.gamma2_min, spec.gamma2_max, spec.n2);
  grid.loss.resize(spec.n1, spec.n2);
  grid.zero_one.resize(spec.n1, spec.n2);
  if (spec.with_sharpness) grid.sharpness = Matrix(spec.n1, spec.n2);
  parallel_for(static_cast<std::size_t>(spec.n1), jobs, [&](std::size_t row) {
    const auto i1 = static_cast<Index>(row);
    for (Index i2 = 0; i2 < spec.n2; ++i2) {
      const Weights W = w_from_gamma({grid.axis1[row], grid.axis2[static_cast<std::size_t>(i2)], spec.basis}, emb);
      const Matrix S = scores(W, emb);
      grid.loss(i1, i2) = loss_from_scores(S, task);
      grid.zero_one(i1, i2) = zero_one_from_scores(S, task);
      if (grid.sharpness) (*grid.sharpness)(i1, i2) = sharpness(W, emb, task).value;
    }
  });
  return grid;
}

inline void write_grid_csv(std::ostream& os, const std::vector<double>& axis1, const std::vector<double>& axis2,
                           const Matrix& field, const std::string& header) {
  os << header << '\n';
  for (std::size_t i = 0; i < axis1.size(); ++i)
    for (std::size_t j = 0; j < axis2.size(); ++j)
      os << format_double(axis1[i]) << ',' << format_double(axis2[j]) << ','
         << format_double(field(static_cast<Index>(i), static_cast<Index>(j))) << '\n';
}

// --- steps to perfect accuracy ---------------------------------------------------

enum class StepsStatus { Reached, Capped, Diverged };

inline const char* to_string(StepsStatus s) {
  switch (s) {
    case StepsStatus::Reached: return "reached";
    case StepsStatus::Capped: return "capped";
    case StepsStatus::Diverged: return "diverged";
  }
  return "?";
}

// `steps` equals the cap whenever the status is not Reached.
struct StepsResult {
  std::uint64_t steps = 0;
  StepsStatus status = StepsStatus::Reached;
};

inline constexpr std::uint64_t kDefaultStepCap = 1'000'000;

// GD from W0 = 0 with constant eta; the first t with zero 0-1 loss.
inline StepsResult steps_to_accuracy(const EmbeddingSet& emb, const TaskSpec& task, double eta,
                                     std::uint64_t cap = kDefaultStepCap, double divergence_threshold = 1e12) {
  check_problem(emb, task);
  if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("steps_to_accuracy: eta must be positive");
  const Index d = emb.dim();
  Weights W = Matrix::Zero(d, d);
  if (zero_one_from_scores(scores(W, emb), task) == 0.0) return {0, StepsStatus::Reached};
  for (std::uint64_t t = 1; t <= cap; ++t) {
    W.noalias() -= eta * grad(W, emb, task);
    const Matrix S = scores(W, emb);
    const double L = loss_from_scores(S, task);
    if (!std::isfinite(L) || L > divergence_threshold) return {cap, StepsStatus::Diverged};
    if (zero_one_from_scores(S, task) == 0.0) return {t, StepsStatus::Reached};
  }
  return {cap, StepsStatus::Capped};
}

enum class PhaseAxis { Alpha, LogRatio };

inline const char* to_string(PhaseAxis a) { return a == PhaseAxis::Alpha ? "alpha" : "log_ratio"; }

// Two-token problems on a correlated pair with orthonormal outputs. Along the
// Alpha axis p1 is fixed; along LogRatio (log(p1 / p2)) alpha is fixed.
struct PhaseSpec {
  std::vector<double> etas;
  std::vector<double> axis_values;
  PhaseAxis axis = PhaseAxis::Alpha;
  double fixed_alpha = 0.9;
  double fixed_p1 = 0.75;
  std::uint64_t cap = kDefaultStepCap;
  double output_scale = 1.0;

  void validate() const {
    if (etas.empty() || axis_values.empty()) throw std::invalid_argument("phase: empty grid");
    for (double e : etas)
      if (!(e > 0.0)) throw std::invalid_argument("phase: learning rates must be positive");
    if (cap < 1) throw std::invalid_argument("phase: cap must be >= 1");
  }
};

struct PhaseDiagram {
  PhaseSpec spec;
  // cells[a][e]: axis value a, learning rate e.
  std::vector<std::vector<StepsResult>> cells;

  std::uint64_t steps(std::size_t a, std::size_t e) const { return cells[a][e].steps; }
};

inline std::pair<EmbeddingSet, TaskSpec> phase_cell_problem(const PhaseSpec& spec, double axis_value) {
  double alpha = spec.fixed_alpha, p1 = spec.fixed_p1;
  if (spec.axis == PhaseAxis::Alpha) alpha = axis_value;
  else p1 = 1.0 / (1.0 + std::exp(-axis_value));
  return {correlated_pair_embeddings(alpha, 2, spec.output_scale), two_token_task(p1)};
}

inline PhaseDiagram phase_diagram(const PhaseSpec& spec, std::size_t jobs = 1) {
  spec.validate();
  PhaseDiagram out;
  out.spec = spec;
  const std::size_t na = spec.axis_values.size(), ne = spec.etas.size();
  out.cells.assign(na, std::vector<StepsResult>(ne));
  parallel_for(na * ne, jobs, [&](std::size_t k) {
    const std::size_t a = k / ne, e = k % ne;
    const auto [emb, task] = phase_cell_problem(spec, spec.axis_values[a]);
    out.cells[a][e] = steps_to_accuracy(emb, task, spec.etas[e], spec.cap);
  });
  return out;
}

inline void write_phase_csv(std::ostream& os, const PhaseDiagram& pd) {
  os << "eta," << to_string(pd.spec.axis) << ",steps\n";
  for (std::size_t a = 0; a < pd.cells.size(); ++a)
    for (std::size_t e = 0; e < pd.cells[a].size(); ++e)
      os << format_double(pd.spec.etas[e]) << ',' << format_double(pd.spec.axis_values[a]) << ','
         << pd.cells[a][e].steps << '\n';
}

// --- excess risk, d = M = 2 -------------------------------------------------------
//
// With two classes and d = 2 the loss depends on W only through
// a = W^T (u_2 - u_1) in R^2: token x scores s_x = a^T e_x for class 2 against
// class 1. The 0-1 loss is constant on the open sectors cut out by the lines
// a . e_x = 0, so it takes finitely many values, all reached at the zero vector,
// on the critical rays, or at sector bisectors.

struct ExcessRisk {
  double value = 0.0;
  bool separable = false;
  double min_loss = 0.0;                // infimum of the cross-entropy (0 if separable)
  double zero_one_at_minimizer = 0.0;
  double min_zero_one = 0.0;
  Eigen::Vector2d minimizer = Eigen::Vector2d::Zero();  // a = W^T (u_2 - u_1)
  Weights minimizer_weights;
};

namespace detail {

inline void check_excess_mode(const EmbeddingSet& emb, const TaskSpec& task) {
  check_problem(emb, task);
  if (emb.dim() != 2 || emb.num_classes() != 2) throw std::invalid_argument("excess_risk: needs d = M = 2");
  if ((emb.outputs.row(1) - emb.outputs.row(0)).squaredNorm() == 0.0)
    throw std::invalid_argument("excess_risk: output embeddings coincide");
}

// Signed labels: +1 when the target is the second class.
inline double label_sign(const TaskSpec& task, std::size_t x) { return task.targets[x] == 1 ? 1.0 : -1.0; }

// 0-1 loss of the reduced parameter a, treating near-zero scores as exact ties
// (ties go to the first class).
inline double reduced_zero_one(const EmbeddingSet& emb, const TaskSpec& task, const Eigen::Vector2d& a) {
  double total = 0.0;
  for (std::size_t x = 0; x < task.targets.size(); ++x) {
    const Eigen::Vector2d e = emb.inputs.row(static_cast<Index>(x)).transpose();
    double s = a.dot(e);
    if (std::abs(s) <= 1e-12 * a.norm() * e.norm()) s = 0.0;
    const bool predicts_second = s > 0.0;
    if (predicts_second != (task.targets[x] == 1)) total += task.freq[x];
  }
  return total;
}

inline double reduced_loss(const EmbeddingSet& emb, const TaskSpec& task, const Eigen::Vector2d& a,
                           Eigen::Vector2d* g = nullptr, Eigen::Matrix2d* H = nullptr) {
  double L = 0.0;
  if (g) g->setZero();
  if (H) H->setZero();
  for (std::size_t x = 0; x < task.targets.size(); ++x) {
    const double p = task.freq[x];
    if (p == 0.0) continue;
    const Eigen::Vector2d e = emb.inputs.row(static_cast<Index>(x)).transpose();
    const double z = label_sign(task, x) * a.dot(e);
    // log(1 + e^{-z}) and its derivatives, stable in both tails.
    L += p * (z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z)));
    const double sig = z > 0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));  // 1 / (1 + e^z)
    if (g) *g -= p * sig * label_sign(task, x) * e;
    if (H) *H += p * sig * (1.0 - sig) * e * e.transpose();
  }
  return L;
}

// Critical angles (a perpendicular to some e_x), their bisectors, both orientations.
inline std::vector<Eigen::Vector2d> sector_candidates(const EmbeddingSet& emb) {
  std::vector<double> angles;
  for (Index x = 0; x < emb.num_tokens(); ++x) {
    const double ex = emb.inputs(x, 0), ey = emb.inputs(x, 1);
    if (ex == 0.0 && ey == 0.0) continue;
    const double base = std::atan2(ey, ex) + 0.5 * std::numbers::pi;
    for (double shift : {0.0, std::numbers::pi}) {
      double t = std::fmod(base + shift, 2.0 * std::numbers::pi);
      if (t < 0) t += 2.0 * std::numbers::pi;
      angles.push_back(t);
    }
  }
  std::sort(angles.begin(), angles.end());
  std::vector<Eigen::Vector2d> out;
  out.emplace_back(1.0, 0.0);  // stands in for every direction when no input is nonzero
  for (std::size_t k = 0; k < angles.size(); ++k) {
    const double t = angles[k];
    const double next = (k + 1 < angles.size()) ? angles[k + 1] : angles[0] + 2.0 * std::numbers::pi;
    out.emplace_back(std::cos(t), std::sin(t));
    const double mid = 0.5 * (t + next);
    out.emplace_back(std::cos(mid), std::sin(mid));
  }
  return out;
}

}  // namespace detail

// True when some a != 0 classifies every token (p > 0) with s_x y_x >= 0 and
// at least one strictly; the loss infimum is then not attained.
inline bool is_separable(const EmbeddingSet& emb, const TaskSpec& task) {
  detail::check_excess_mode(emb, task);
  for (const auto& a : detail::sector_candidates(emb)) {
    bool ok = true, strict = false;
    for (std::size_t x = 0; x < task.targets.size() && ok; ++x) {
      if (task.freq[x] == 0.0) continue;
      const Eigen::Vector2d e = emb.inputs.row(static_cast<Index>(x)).transpose();
      double z = detail::label_sign(task, x) * a.dot(e);
      if (std::abs(z) <= 1e-12 * e.norm()) z = 0.0;
      if (z < 0.0) ok = false;
      if (z > 0.0) strict = true;
    }
    if (ok && strict) return true;
  }
  return false;
}

inline double min_zero_one_loss(const EmbeddingSet& emb, const TaskSpec& task) {
  detail::check_excess_mode(emb, task);
  double best = detail::reduced_zero_one(emb, task, Eigen::Vector2d::Zero());
  for (const auto& a : detail::sector_candidates(emb)) best = std::min(best, detail::reduced_zero_one(emb, task, a));
  return best;
}

// Minimizer of the reduced cross-entropy for a non-separable instance: best
// point of a coarse grid, then damped Newton until the gradient norm is <= tol.
inline Eigen::Vector2d reduced_minimizer(const EmbeddingSet& emb, const TaskSpec& task, double tol = 1e-10) {
  Eigen::Vector2d best = Eigen::Vector2d::Zero();
  double best_loss = detail::reduced_loss(emb, task, best);
  for (double g1 : linspace(-10.0, 10.0, 41))
    for (double g2 : linspace(-10.0, 10.0, 41)) {
      const Eigen::Vector2d a(g1, g2);
      const double L = detail::reduced_loss(emb, task, a);
      if (L < best_loss) {
        best_loss = L;
        best = a;
      }
    }
  Eigen::Vector2d a = best;
  for (int it = 0; it < 500; ++it) {
    Eigen::Vector2d g;
    Eigen::Matrix2d H;
    const double L = detail::reduced_loss(emb, task, a, &g, &H);
    if (g.norm() <= tol) break;
    H += 1e-14 * (1.0 + H.trace()) * Eigen::Matrix2d::Identity();
    Eigen::Vector2d step = -H.ldlt().solve(g);
    if (!step.allFinite() || step.dot(g) >= 0.0) step = -g;
    double t = 1.0;
    while (t > 1e-20 && detail::reduced_loss(emb, task, a + t * step) > L + 1e-4 * t * step.dot(g)) t *= 0.5;
    if (t <= 1e-20) break;
    a += t * step;
  }
  return a;
}

inline ExcessRisk excess_risk(const EmbeddingSet& emb, const TaskSpec& task) {
  detail::check_excess_mode(emb, task);
  ExcessRisk out;
  out.min_zero_one = min_zero_one_loss(emb, task);
  if (is_separable(emb, task)) {
    out.separable = true;
    out.value = 0.0;
    out.min_loss = 0.0;
    out.zero_one_at_minimizer = out.min_zero_one;
    return out;
  }
  out.minimizer = reduced_minimizer(emb, task);
  out.minimizer_weights = w_from_gamma({out.minimizer(0), out.minimizer(1), GammaBasis::Canonical}, emb);
  out.min_loss = loss(out.minimizer_weights, emb, task);
  out.zero_one_at_minimizer = zero_one_loss(out.minimizer_weights, emb, task);
  out.value = std::max(0.0, out.zero_one_at_minimizer - out.min_zero_one);
  return out;
}

// Candidate underparameterized instance number `draw` of a seeded family:
// N = 3 unit inputs at uniform angles, canonical outputs, uniform random
// targets and flat-Dirichlet frequencies.
inline std::pair<EmbeddingSet, TaskSpec> witness_candidate(std::uint64_t seed, std::uint64_t draw) {
  Rng rng = make_stream(seed, {0x3157, draw});
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_int_distribution<int> cls(0, 1);
  std::exponential_distribution<double> ex(1.0);
  EmbeddingSet emb;
  emb.inputs.resize(3, 2);
  for (Index x = 0; x < 3; ++x) {
    const double t = angle(rng);
    emb.inputs(x, 0) = std::cos(t);
    emb.inputs(x, 1) = std::sin(t);
  }
  emb.outputs = Matrix::Identity(2, 2);
  emb.seed = seed;
  TaskSpec task;
  std::vector<double> w(3);
  double total = 0.0;
  for (Index x = 0; x < 3; ++x) {
    task.targets.push_back(cls(rng));
    total += (w[static_cast<std::size_t>(x)] = ex(rng));
  }
  for (double& v : w) v /= total;
  w[2] = 1.0 - w[0] - w[1];
  task.freq = w;
  return {emb, task};
}

struct Witness {
  EmbeddingSet emb;
  TaskSpec task;
  std::uint64_t seed = 0;
  std::uint64_t draw = 0;
  ExcessRisk risk;
};

// First draw of the seeded family whose excess risk exceeds `threshold`.
inline std::optional<Witness> find_excess_risk_witness(std::uint64_t seed, double threshold = 0.0,
                                                       std::uint64_t max_draws = 100000) {
  for (std::uint64_t k = 0; k < max_draws; ++k) {
    auto [emb, task] = witness_candidate(seed, k);
    const ExcessRisk r = excess_risk(emb, task);
    if (r.value > threshold) return Witness{std::move(emb), std::move(task), seed, k, r};
  }
  return std::nullopt;
}

}  // namespace assocmem
