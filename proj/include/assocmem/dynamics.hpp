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

// Gradient flow, gradient descent, stochastic gradient descent and stochastic
// gradient flow on W, with trajectory recording.
//
// A run is deterministic given its config (including the seed) and holds no
// shared state, so independent runs may execute concurrently.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <random>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "assocmem/gamma.hpp"
#include "assocmem/model.hpp"
#include "assocmem/ode.hpp"
#include "assocmem/sharpness.hpp"

namespace assocmem {

enum class DynamicsKind { GF, GD, SGD, SGF };

inline const char* to_string(DynamicsKind k) {
  switch (k) {
    case DynamicsKind::GF: return "GF";
    case DynamicsKind::GD: return "GD";
    case DynamicsKind::SGD: return "SGD";
    case DynamicsKind::SGF: return "SGF";
  }
  return "?";
}

// Constant value, or a per-step table whose last entry is held afterwards.
struct Schedule {
  std::vector<double> values{1.0};

  static Schedule constant(double v) { return Schedule{{v}}; }
  double at(std::size_t step) const {
    if (values.empty()) throw std::invalid_argument("schedule: no values");
    return step < values.size() ? values[step] : values.back();
  }
};

struct DynamicsConfig {
  DynamicsKind kind = DynamicsKind::GD;
  Schedule eta = Schedule::constant(1.0);
  std::size_t batch_size = 1;               // SGD
  Schedule sigma = Schedule::constant(0.0);  // SGF noise scale
  double h = 1e-2;                          // SGF Euler-Maruyama step
  double t_end = 100.0;                     // steps (GD/SGD) or time (GF/SGF)
  std::uint64_t seed = 0;
  double record_every = 1.0;
  std::vector<double> record_times;         // GF/SGF override of the uniform grid
  std::optional<GammaBasis> gamma;
  bool track_sharpness = false;
  OdeOptions ode{};
  double divergence_threshold = 1e12;
  std::size_t max_batch_size = 1u << 24;
};

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<double> loss;
  std::vector<double> zero_one;
  std::vector<Vector> gaps;  // per-token gap margins at each record
  std::optional<GammaBasis> gamma_basis;
  std::vector<GammaCoords> gamma;
  bool has_sharpness = false;
  std::vector<double> sharpness;
  Weights final_weights;
  bool diverged = false;
  std::string diagnostic;

  std::size_t size() const { return times.size(); }
};

namespace detail {

inline void check_config(const DynamicsConfig& cfg, DynamicsKind expected) {
  if (cfg.kind != expected) throw std::invalid_argument(std::string("dynamics: config kind is not ") + to_string(expected));
  if (!(cfg.t_end >= 0.0) || !std::isfinite(cfg.t_end)) throw std::invalid_argument("dynamics: t_end must be >= 0");
  if (!(cfg.record_every > 0.0)) throw std::invalid_argument("dynamics: record_every must be > 0");
  for (double v : cfg.eta.values)
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("dynamics: learning rates must be finite and >= 0");
  for (double v : cfg.sigma.values)
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("dynamics: noise scales must be finite and >= 0");
}

class Recorder {
 public:
  Recorder(const EmbeddingSet& emb, const TaskSpec& task, const DynamicsConfig& cfg, TrajectoryRecord& rec)
      : emb_(emb), task_(task), cfg_(cfg), rec_(rec) {
    rec_.gamma_basis = cfg.gamma;
    rec_.has_sharpness = cfg.track_sharpness;
  }

  // Returns false (and marks the record) once the loss is non-finite or beyond the threshold.
  bool healthy(double t, double L) {
    if (std::isfinite(L) && L <= cfg_.divergence_threshold) return true;
    rec_.diverged = true;
    std::ostringstream os;
    os << "diverged at t = " << t << ": loss = " << L;
    rec_.diagnostic = os.str();
    return false;
  }

  bool record(double t, const Weights& W) {
    const Matrix S = scores(W, emb_);
    const double L = loss_from_scores(S, task_);
    if (!healthy(t, L)) return false;
    rec_.times.push_back(t);
    rec_.loss.push_back(L);
    rec_.zero_one.push_back(zero_one_from_scores(S, task_));
    const auto mv = margins_from_scores(S, task_);
    Vector g(static_cast<Index>(mv.size()));
    for (std::size_t x = 0; x < mv.size(); ++x) g(static_cast<Index>(x)) = mv[x].gap;
    rec_.gaps.push_back(std::move(g));
    if (cfg_.gamma) rec_.gamma.push_back(gamma_coords(W, emb_, *cfg_.gamma));
    if (cfg_.track_sharpness) rec_.sharpness.push_back(sharpness(W, emb_, task_).value);
    return true;
  }

 private:
  const EmbeddingSet& emb_;
  const TaskSpec& task_;
  const DynamicsConfig& cfg_;
  TrajectoryRecord& rec_;
};

inline std::size_t step_count(double t_end) {
  const double r = std::round(t_end);
  if (std::abs(r - t_end) > 1e-9) throw std::invalid_argument("dynamics: discrete t_end must be an integer step count");
  return static_cast<std::size_t>(r);
}

inline std::size_t step_stride(double record_every) {
  const double r = std::round(record_every);
  if (r < 1.0) throw std::invalid_argument("dynamics: discrete record_every must be >= 1");
  return static_cast<std::size_t>(r);
}

inline std::vector<double> uniform_times(double t_end, double every) {
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor(t_end / every + 1e-9));
  for (std::size_t k = 0; k <= n; ++k) out.push_back(static_cast<double>(k) * every);
  if (out.empty() || out.back() < t_end - 1e-12 * std::max(1.0, t_end)) out.push_back(t_end);
  else out.back() = std::min(out.back(), t_end);
  return out;
}

inline std::vector<double> output_times(const DynamicsConfig& cfg) {
  if (cfg.record_times.empty()) return uniform_times(cfg.t_end, cfg.record_every);
  std::vector<double> out = cfg.record_times;
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (out[k] < 0.0 || out[k] > cfg.t_end) throw std::invalid_argument("dynamics: record time outside [0, t_end]");
    if (k > 0 && !(out[k] > out[k - 1])) throw std::invalid_argument("dynamics: record times must increase strictly");
  }
  return out;
}

}  // namespace detail

// Orthogonal projectors onto span{u_j - u_k} (acting on the output side) and
// onto span{e_i} (input side). Every gradient lies in their tensor product
// span{(u_j - u_k) (x) e_i}, i.e. G = P_out G P_in.
struct UpdateSpan {
  Matrix out;
  Matrix in;

  Matrix project(const Matrix& G) const { return out * G * in; }
  Matrix complement(const Matrix& W) const { return W - project(W); }
};

namespace detail {
inline Matrix column_space_projector(const Matrix& cols) {
  if (cols.cols() == 0) return Matrix::Zero(cols.rows(), cols.rows());
  Eigen::JacobiSVD<Matrix> svd(cols, Eigen::ComputeThinU);
  const Vector& s = svd.singularValues();
  const double tol = std::max(cols.rows(), cols.cols()) * std::numeric_limits<double>::epsilon() *
                     (s.size() > 0 ? s(0) : 0.0);
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > tol) ++rank;
  const Matrix Q = svd.matrixU().leftCols(rank);
  return Q * Q.transpose();
}
}  // namespace detail

inline UpdateSpan update_span(const EmbeddingSet& emb) {
  const Index M = emb.num_classes();
  Matrix diffs(emb.dim(), M - 1);
  for (Index j = 1; j < M; ++j) diffs.col(j - 1) = (emb.outputs.row(j) - emb.outputs.row(0)).transpose();
  return {detail::column_space_projector(diffs), detail::column_space_projector(emb.inputs.transpose())};
}

// W_{t+1} = W_t - eta_t grad L(W_t), t_end steps.
inline TrajectoryRecord gd_run(const Weights& W0, const EmbeddingSet& emb, const TaskSpec& task,
                               const DynamicsConfig& cfg) {
  detail::check_config(cfg, DynamicsKind::GD);
  check_problem(emb, task);
  check_shapes(W0, emb, task);
  const std::size_t steps = detail::step_count(cfg.t_end);
  const std::size_t stride = detail::step_stride(cfg.record_every);

  TrajectoryRecord rec;
  detail::Recorder recorder(emb, task, cfg, rec);
  Weights W = W0;
  if (!recorder.record(0.0, W)) {
    rec.final_weights = W;
    return rec;
  }
  for (std::size_t s = 0; s < steps; ++s) {
    const double eta = cfg.eta.at(s);
    if (eta != 0.0) W.noalias() -= eta * grad(W, emb, task);
    const std::size_t t = s + 1;
    if (t % stride == 0 || t == steps) {
      if (!recorder.record(static_cast<double>(t), W)) break;
    } else if (!recorder.healthy(static_cast<double>(t), loss(W, emb, task))) {
      break;
    }
  }
  rec.final_weights = W;
  return rec;
}

// dW = -grad L(W) dt, integrated with the adaptive 5(4) pair.
inline TrajectoryRecord gf_run(const Weights& W0, const EmbeddingSet& emb, const TaskSpec& task,
                               const DynamicsConfig& cfg) {
  detail::check_config(cfg, DynamicsKind::GF);
  check_problem(emb, task);
  check_shapes(W0, emb, task);
  const std::vector<double> times = detail::output_times(cfg);
  const Index d = emb.dim();

  TrajectoryRecord rec;
  detail::Recorder recorder(emb, task, cfg, rec);
  Vector y = Eigen::Map<const Vector>(W0.data(), d * d);
  auto rhs = [&](double, const Vector& state) -> Vector {
    const Eigen::Map<const Matrix> W(state.data(), d, d);
    const Matrix G = grad(W, emb, task);
    return -Eigen::Map<const Vector>(G.data(), d * d);
  };
  auto observe = [&](double t, const Vector& state) {
    const Eigen::Map<const Matrix> W(state.data(), d, d);
    return recorder.record(t, W);
  };
  const OdeStats stats = integrate_dopri5(rhs, y, 0.0, cfg.t_end, times, observe, cfg.ode);
  if (!stats.ok) {
    rec.diverged = true;
    rec.diagnostic = "integrator aborted: " + stats.message;
  }
  rec.final_weights = Eigen::Map<const Matrix>(y.data(), d, d);
  return rec;
}

// Draws batch_size tokens i.i.d. from p; each step descends the batch loss
// sum_x (count(x) / B) l(W; x, f*(x)).
inline std::vector<double> sample_batch_weights(const TaskSpec& task, std::size_t batch_size, Rng& rng) {
  std::discrete_distribution<std::size_t> pick(task.freq.begin(), task.freq.end());
  std::vector<double> w(task.freq.size(), 0.0);
  for (std::size_t b = 0; b < batch_size; ++b) w[pick(rng)] += 1.0;
  for (double& v : w) v /= static_cast<double>(batch_size);
  return w;
}

inline TrajectoryRecord sgd_run(const Weights& W0, const EmbeddingSet& emb, const TaskSpec& task,
                                const DynamicsConfig& cfg) {
  detail::check_config(cfg, DynamicsKind::SGD);
  check_problem(emb, task);
  check_shapes(W0, emb, task);
  if (cfg.batch_size < 1 || cfg.batch_size > cfg.max_batch_size)
    throw std::invalid_argument("sgd: batch_size must be in [1, max_batch_size]");
  const std::size_t steps = detail::step_count(cfg.t_end);
  const std::size_t stride = detail::step_stride(cfg.record_every);

  TrajectoryRecord rec;
  detail::Recorder recorder(emb, task, cfg, rec);
  Rng rng = make_stream(cfg.seed, {0x5764});
  Weights W = W0;
  if (!recorder.record(0.0, W)) {
    rec.final_weights = W;
    return rec;
  }
  for (std::size_t s = 0; s < steps; ++s) {
    const std::vector<double> weights = sample_batch_weights(task, cfg.batch_size, rng);
    const double eta = cfg.eta.at(s);
    if (eta != 0.0) W.noalias() -= eta * weighted_grad(W, emb, task, weights);
    const std::size_t t = s + 1;
    if (t % stride == 0 || t == steps) {
      if (!recorder.record(static_cast<double>(t), W)) break;
    } else if (!recorder.healthy(static_cast<double>(t), loss(W, emb, task))) {
      break;
    }
  }
  rec.final_weights = W;
  return rec;
}

// Euler-Maruyama for dW = -grad L dt + sigma_t dB_t, with the Brownian
// increment projected onto the update span so the orthogonal component of W0
// is preserved exactly.
inline Matrix sgf_step(const Weights& W, const EmbeddingSet& emb, const TaskSpec& task, const UpdateSpan& span,
                       double h, double sigma, Rng& rng) {
  Matrix next = W - h * grad(W, emb, task);
  if (sigma > 0.0) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix G(W.rows(), W.cols());
    for (Index k = 0; k < G.size(); ++k) G.data()[k] = gauss(rng);
    next.noalias() += sigma * std::sqrt(h) * span.project(G);
  }
  return next;
}

inline TrajectoryRecord sgf_run(const Weights& W0, const EmbeddingSet& emb, const TaskSpec& task,
                                const DynamicsConfig& cfg) {
  detail::check_config(cfg, DynamicsKind::SGF);
  check_problem(emb, task);
  check_shapes(W0, emb, task);
  if (!(cfg.h > 0.0)) throw std::invalid_argument("sgf: step h must be > 0");
  const std::vector<double> times = detail::output_times(cfg);
  const UpdateSpan span = update_span(emb);

  TrajectoryRecord rec;
  detail::Recorder recorder(emb, task, cfg, rec);
  Rng rng = make_stream(cfg.seed, {0x5367});
  Weights W = W0;
  double t = 0.0;
  std::size_t step = 0;
  std::size_t next = 0;
  // Record points are hit by shortening the step that would cross them.
  while (next < times.size() && times[next] <= 0.0) {
    if (!recorder.record(0.0, W)) {
      rec.final_weights = W;
      return rec;
    }
    ++next;
  }
  while (t < cfg.t_end && !rec.diverged) {
    double h = cfg.h;
    const double target = next < times.size() ? times[next] : cfg.t_end;
    bool lands = false;
    if (t + h >= target - 1e-12 * std::max(1.0, target)) {
      h = target - t;
      lands = true;
    }
    if (h > 0.0) W = sgf_step(W, emb, task, span, h, cfg.sigma.at(step), rng);
    t = lands ? target : t + h;
    ++step;
    if (lands && next < times.size()) {
      if (!recorder.record(t, W)) break;
      ++next;
    } else if (!recorder.healthy(t, loss(W, emb, task))) {
      break;
    }
  }
  rec.final_weights = W;
  return rec;
}

inline TrajectoryRecord run_dynamics(const Weights& W0, const EmbeddingSet& emb, const TaskSpec& task,
                                     const DynamicsConfig& cfg) {
  switch (cfg.kind) {
    case DynamicsKind::GD: return gd_run(W0, emb, task, cfg);
    case DynamicsKind::GF: return gf_run(W0, emb, task, cfg);
    case DynamicsKind::SGD: return sgd_run(W0, emb, task, cfg);
    case DynamicsKind::SGF: return sgf_run(W0, emb, task, cfg);
  }
  throw std::invalid_argument("unknown dynamics kind");
}

// --- CSV -------------------------------------------------------------------

// 17 significant digits, '.' separator, independent of the global locale.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& rec) {
  const std::size_t n_tokens = rec.gaps.empty() ? 0 : static_cast<std::size_t>(rec.gaps.front().size());
  os << "t,loss,zero_one";
  for (std::size_t x = 0; x < n_tokens; ++x) os << ",margin_" << (x + 1);
  const bool with_gamma = rec.gamma_basis.has_value();
  if (with_gamma) os << ",gamma1,gamma2";
  if (rec.has_sharpness) os << ",sharpness";
  os << '\n';
  for (std::size_t k = 0; k < rec.size(); ++k) {
    os << format_double(rec.times[k]) << ',' << format_double(rec.loss[k]) << ',' << format_double(rec.zero_one[k]);
    for (std::size_t x = 0; x < n_tokens; ++x) os << ',' << format_double(rec.gaps[k](static_cast<Index>(x)));
    if (with_gamma) os << ',' << format_double(rec.gamma[k].gamma1) << ',' << format_double(rec.gamma[k].gamma2);
    if (rec.has_sharpness) os << ',' << format_double(rec.sharpness[k]);
    os << '\n';
  }
}

inline std::string trajectory_csv(const TrajectoryRecord& rec) {
  std::ostringstream os;
  write_trajectory_csv(os, rec);
  return os.str();
}

}  // namespace assocmem
