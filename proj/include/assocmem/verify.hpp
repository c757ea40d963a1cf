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

// Self-check suite behind `assocmem verify`. Each property runs on seeded
// random instances and reports pass/fail, a short detail and its wall time.

#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "assocmem/analysis.hpp"
#include "assocmem/closed_form.hpp"
#include "assocmem/config.hpp"
#include "assocmem/dynamics.hpp"
#include "assocmem/lambert_w.hpp"
#include "assocmem/particles.hpp"

namespace assocmem {

using GradFn = std::function<Matrix(const Weights&, const EmbeddingSet&, const TaskSpec&)>;

struct VerifyOptions {
  bool strict = false;  // closed-form comparisons at 1e-8 instead of 1e-6
  std::uint64_t seed = 0;
  GradFn grad_override;  // test hook: replaces the analytic gradient under test
  std::vector<std::string> only;  // run only properties whose name contains one of these

  double closed_form_tol() const { return strict ? 1e-8 : 1e-6; }
};

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyReport {
  std::vector<PropertyResult> results;

  bool passed() const {
    for (const auto& r : results)
      if (!r.passed) return false;
    return true;
  }
};

namespace detail {

struct Check {
  bool ok = true;
  double worst = 0.0;
  std::string note;

  void value(double v, double limit) {
    worst = std::max(worst, v);
    if (!(v <= limit)) ok = false;
  }
  void require(bool cond, const std::string& why) {
    if (!cond && ok) note = why;
    ok = ok && cond;
  }
  std::string detail(const std::string& what) const {
    std::ostringstream os;
    os << what << " = " << std::scientific << std::setprecision(3) << worst;
    if (!note.empty()) os << "; " << note;
    return os.str();
  }
};

struct Problem {
  EmbeddingSet emb;
  TaskSpec task;
  Weights W;
};

inline Problem random_problem(Rng& rng, Index max_size = 5) {
  std::uniform_int_distribution<Index> size(2, max_size);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::exponential_distribution<double> ex(1.0);
  const Index n = size(rng), m = size(rng), d = size(rng);
  Problem p;
  p.emb.inputs.resize(n, d);
  p.emb.outputs.resize(m, d);
  p.W.resize(d, d);
  for (Index k = 0; k < p.emb.inputs.size(); ++k) p.emb.inputs.data()[k] = gauss(rng) / std::sqrt(static_cast<double>(d));
  for (Index k = 0; k < p.emb.outputs.size(); ++k) p.emb.outputs.data()[k] = gauss(rng) / std::sqrt(static_cast<double>(d));
  for (Index k = 0; k < p.W.size(); ++k) p.W.data()[k] = gauss(rng);
  std::uniform_int_distribution<Index> cls(0, m - 1);
  double total = 0.0;
  for (Index x = 0; x < n; ++x) {
    p.task.targets.push_back(cls(rng));
    p.task.freq.push_back(ex(rng));
    total += p.task.freq.back();
  }
  for (double& q : p.task.freq) q /= total;
  double resid = 1.0;
  for (std::size_t x = 0; x + 1 < p.task.freq.size(); ++x) resid -= p.task.freq[x];
  p.task.freq.back() = resid;
  return p;
}

inline double rel_diff(const Matrix& a, const Matrix& b) { return (a - b).norm() / std::max(b.norm(), 1e-12); }

inline Matrix fd_grad(const Weights& W, const EmbeddingSet& emb, const TaskSpec& task, double h = 1e-5) {
  Matrix G(W.rows(), W.cols());
  Weights Wp = W;
  for (Index k = 0; k < W.size(); ++k) {
    const double w0 = W.data()[k];
    Wp.data()[k] = w0 + h;
    const double up = loss(Wp, emb, task);
    Wp.data()[k] = w0 - h;
    const double dn = loss(Wp, emb, task);
    Wp.data()[k] = w0;
    G.data()[k] = (up - dn) / (2.0 * h);
  }
  return G;
}

inline OdeOptions tight_ode() {
  OdeOptions o;
  o.atol = 1e-12;
  o.rtol = 1e-12;
  return o;
}

using PropertyFn = std::function<std::pair<bool, std::string>(const VerifyOptions&)>;

struct Property {
  std::string name;
  PropertyFn run;
};

inline std::vector<Property> properties() {
  std::vector<Property> out;

  out.push_back({"model.gradient_finite_difference", [](const VerifyOptions& o) {
                   Rng rng = make_stream(o.seed, {0x7601});
                   Check c;
                   for (int k = 0; k < 25; ++k) {
                     const auto p = random_problem(rng);
                     const Matrix g = o.grad_override ? o.grad_override(p.W, p.emb, p.task) : grad(p.W, p.emb, p.task);
                     c.value(rel_diff(g, fd_grad(p.W, p.emb, p.task)), 1e-6);
                   }
                   return std::pair{c.ok, c.detail("max relative error")};
                 }});

  out.push_back({"model.hessian_finite_difference", [](const VerifyOptions& o) {
                   Rng rng = make_stream(o.seed, {0x7602});
                   std::normal_distribution<double> gauss(0.0, 1.0);
                   Check c;
                   for (int k = 0; k < 25; ++k) {
                     const auto p = random_problem(rng);
                     Matrix V(p.W.rows(), p.W.cols());
                     for (Index q = 0; q < V.size(); ++q) V.data()[q] = gauss(rng);
                     const double h = 1e-5;
                     const Matrix fd = (grad(p.W + h * V, p.emb, p.task) - grad(p.W - h * V, p.emb, p.task)) / (2 * h);
                     c.value(rel_diff(hessian_vector_product(p.W, p.emb, p.task, V), fd), 1e-5);
                   }
                   return std::pair{c.ok, c.detail("max relative error")};
                 }});

  out.push_back({"model.sharpness_power_vs_dense", [](const VerifyOptions& o) {
                   Rng rng = make_stream(o.seed, {0x7603});
                   Check c;
                   for (int k = 0; k < 15; ++k) {
                     const auto p = random_problem(rng, 4);
                     const Matrix H = dense_hessian(p.W, p.emb, p.task);
                     Eigen::SelfAdjointEigenSolver<Matrix> es(H, Eigen::EigenvaluesOnly);
                     const double top = es.eigenvalues().cwiseAbs().maxCoeff();
                     const auto s = sharpness(p.W, p.emb, p.task);
                     c.value(std::abs(s.value - top) / std::max(top, 1e-300), 1e-8);
                   }
                   return std::pair{c.ok, c.detail("max relative error")};
                 }});

  out.push_back({"particles.match_weight_space_gd", [](const VerifyOptions& o) {
                   Rng rng = make_stream(o.seed, {0x7604});
                   Check c;
                   for (int k = 0; k < 5; ++k) {
                     auto p = random_problem(rng);
                     p.W.setZero();
                     const double eta = 0.5;
                     const auto corr = correlations(p.emb);
                     ParticleState state = project(p.W, p.emb);
                     Weights W = p.W;
                     for (int t = 0; t < 100; ++t) {
                       state.w += particle_update(state, corr, p.task, eta);
                       W -= eta * grad(W, p.emb, p.task);
                       c.value((state.w - scores(W, p.emb)).cwiseAbs().maxCoeff(), 1e-9);
                     }
                   }
                   return std::pair{c.ok, c.detail("max entrywise error")};
                 }});

  out.push_back({"dynamics.one_step_orthonormal", [](const VerifyOptions& o) {
                   Rng rng = make_stream(o.seed, {0x7605});
                   std::uniform_int_distribution<Index> size(2, 16);
                   std::uniform_real_distribution<double> log_eta(-3.0, 2.0);
                   Check c;
                   for (int k = 0; k < 20; ++k) {
                     const Index n = size(rng);
                     const auto emb = orthonormal_embeddings(n, n, n);
                     std::vector<double> p(static_cast<std::size_t>(n));
                     std::exponential_distribution<double> ex(1.0);
                     double total = 0.0;
                     for (double& q : p) total += (q = ex(rng));
                     for (double& q : p) q /= total;
                     double resid = 1.0;
                     for (std::size_t x = 0; x + 1 < p.size(); ++x) resid -= p[x];
                     p.back() = resid;
                     const TaskSpec task{identity_targets(n), p};
                     const double eta = std::pow(10.0, log_eta(rng));
                     const Weights W1 = -eta * grad(Matrix::Zero(n, n), emb, task);
                     c.require(zero_one_loss(W1, emb, task) == 0.0, "a token misclassified after one step");
                   }
                   return std::pair{c.ok, std::string(c.ok ? "all instances perfect after one step" : c.note)};
                 }});

  out.push_back({"dynamics.update_span", [](const VerifyOptions& o) {
                   Rng rng = make_stream(o.seed, {0x7606});
                   Check c;
                   for (int k = 0; k < 10; ++k) {
                     const auto p = random_problem(rng);
                     const auto span = update_span(p.emb);
                     const Matrix fixed = span.complement(p.W);
                     Weights W = p.W;
                     for (int t = 0; t < 50; ++t) W -= 0.3 * grad(W, p.emb, p.task);
                     c.value((span.complement(W) - fixed).cwiseAbs().maxCoeff() / std::max(1.0, p.W.norm()), 1e-12);
                   }
                   return std::pair{c.ok, c.detail("max complement drift")};
                 }});

  out.push_back({"dynamics.gf_multiclass_invariants", [](const VerifyOptions& o) {
                   Rng rng = make_stream(o.seed, {0x7607});
                   std::normal_distribution<double> gauss(0.0, 0.5);
                   Check c;
                   const auto emb = orthonormal_embeddings(3, 4, 4);
                   const TaskSpec task{{0, 2, 3}, {0.5, 0.3, 0.2}};
                   for (int k = 0; k < 3; ++k) {
                     Weights W0(4, 4);
                     for (Index q = 0; q < W0.size(); ++q) W0.data()[q] = gauss(rng);
                     DynamicsConfig cfg;
                     cfg.kind = DynamicsKind::GF;
                     cfg.t_end = 100.0;
                     cfg.record_every = 10.0;
                     cfg.ode = tight_ode();
                     const auto rec = gf_run(W0, emb, task, cfg);
                     const Matrix S0 = scores(W0, emb), S1 = scores(rec.final_weights, emb);
                     for (Index x = 0; x < 3; ++x) {
                       const Index y = task.targets[static_cast<std::size_t>(x)];
                       const auto a = multiclass_invariants(S0.row(x).transpose(), y);
                       const auto b = multiclass_invariants(S1.row(x).transpose(), y);
                       for (std::size_t q = 0; q < a.size(); ++q) c.value(std::abs(a[q] - b[q]), o.closed_form_tol());
                     }
                   }
                   return std::pair{c.ok, c.detail("max invariant drift")};
                 }});

  out.push_back({"closed_form.binary_margin_vs_gf", [](const VerifyOptions& o) {
                   Rng rng = make_stream(o.seed, {0x7608});
                   std::uniform_real_distribution<double> pc(0.1, 0.9), m0d(-2.0, 2.0);
                   Check c;
                   for (int k = 0; k < 5; ++k) {
                     const auto emb = orthonormal_embeddings(2, 2, 2);
                     const double p1 = pc(rng);
                     const TaskSpec task{{0, 1}, {p1, 1.0 - p1}};
                     // Start from prescribed margins: token x reads column x of W.
                     const double a = m0d(rng), b = m0d(rng);
                     Weights W0 = Matrix::Zero(2, 2);
                     W0(0, 0) = 0.5 * a;
                     W0(1, 0) = -0.5 * a;
                     W0(1, 1) = 0.5 * b;
                     W0(0, 1) = -0.5 * b;
                     DynamicsConfig cfg;
                     cfg.kind = DynamicsKind::GF;
                     cfg.t_end = 1000.0;
                     cfg.record_times = logspace(-2.0, 3.0, 60);
                     cfg.ode = tight_ode();
                     const auto rec = gf_run(W0, emb, task, cfg);
                     const Vector m0 = gap_margins(W0, emb, task);
                     for (std::size_t q = 0; q < rec.size(); ++q)
                       for (Index x = 0; x < 2; ++x) {
                         const auto inst = BinaryOrthogonalInstance::make(binary_rate(emb, task, x), m0(x));
                         c.value(std::abs(binary_margin_closed(inst, rec.times[q]).value - rec.gaps[q](x)),
                                 o.closed_form_tol());
                       }
                   }
                   return std::pair{c.ok, c.detail("sup error")};
                 }});

  out.push_back({"closed_form.lambert_w_identity", [](const VerifyOptions& o) {
                   Check c;
                   for (double e : linspace(-0.36, 6.0, 400)) {
                     const double x = e < 0 ? e : std::pow(10.0, e) - 1.0 + 1e-3;
                     if (x < -std::exp(-1.0)) continue;
                     const double w = lambert_w0(x);
                     c.value(std::abs(w * std::exp(w) - x) / std::max(std::abs(x), 1e-300), o.closed_form_tol());
                   }
                   for (double v : linspace(-5.0, 700.0, 400)) {
                     const double w = lambert_w0_exp(v);
                     c.value(std::abs(w + std::log(w) - v) / std::max(1.0, std::abs(v)), o.closed_form_tol());
                   }
                   return std::pair{c.ok, c.detail("max relative residual")};
                 }});

  out.push_back({"closed_form.log_gap_sandwich", [](const VerifyOptions&) {
                   Check c;
                   for (double x : logspace(0.0, 6.0, 1000)) {
                     const auto inst = BinaryOrthogonalInstance::make(1.0, 0.0);
                     const double gap = binary_log_gap(inst, inst.t0 + x);
                     const Interval h = h_bound(x);
                     c.require(gap >= h.lower && gap <= h.upper, "gap outside [0, 2 log(x)/x]");
                   }
                   return std::pair{c.ok, std::string(c.ok ? "1000 points inside the sandwich" : c.note)};
                 }});

  // exp(m_t) >= eta c t / 2 + 1 per token, hence loss <= 2 / (t eta) sum p / c.
  out.push_back({"closed_form.gd_margin_growth_and_loss_bound", [](const VerifyOptions& o) {
                   Rng rng = make_stream(o.seed, {0x7609});
                   std::exponential_distribution<double> ex(1.0);
                   Check c;
                   for (double eta : {0.1, 1.0}) {
                     const auto emb = orthonormal_embeddings(4, 2, 4);
                     std::vector<double> p(4);
                     double total = 0.0;
                     for (double& q : p) total += (q = ex(rng));
                     for (double& q : p) q /= total;
                     const TaskSpec task{{0, 1, 1, 0}, p};
                     Weights W = Matrix::Zero(4, 4);
                     for (int t = 1; t <= 2000; ++t) {
                       W -= eta * grad(W, emb, task);
                       const Vector m = gap_margins(W, emb, task);
                       for (Index x = 0; x < 4; ++x)
                         c.require(std::exp(m(x)) >= eta * binary_rate(emb, task, x) * t / 2.0 + 1.0,
                                   "margin below its growth bound");
                       c.require(loss(W, emb, task) <= 2.0 * gd_loss_bound(emb, task, eta, t), "loss above the bound");
                     }
                   }
                   return std::pair{c.ok, std::string(c.ok ? "bounds hold at every step" : c.note)};
                 }});

  out.push_back({"closed_form.gamma_ode_vs_gf", [](const VerifyOptions& o) {
                   Check c;
                   for (double alpha : {-0.5, 0.5, 0.95}) {
                     const auto emb = correlated_pair_embeddings(alpha);
                     const auto task = two_token_task(0.75);
                     const auto inst = two_token_instance(emb, task);
                     DynamicsConfig cfg;
                     cfg.kind = DynamicsKind::GF;
                     cfg.t_end = 100.0;
                     cfg.record_every = 5.0;
                     cfg.gamma = GammaBasis::TwoToken;
                     cfg.ode = tight_ode();
                     const auto rec = gf_run(Matrix::Zero(2, 2), emb, task, cfg);
                     const auto ode = gamma_flow(inst, {0.0, 0.0, GammaBasis::TwoToken}, rec.times, tight_ode());
                     for (std::size_t q = 0; q < rec.size(); ++q)
                       c.value(std::max(std::abs(rec.gamma[q].gamma1 - ode[q].gamma1),
                                        std::abs(rec.gamma[q].gamma2 - ode[q].gamma2)),
                               o.closed_form_tol());
                   }
                   return std::pair{c.ok, c.detail("max coordinate error")};
                 }});

  out.push_back({"closed_form.spike_bound", [](const VerifyOptions&) {
                   Check c;
                   int cases = 0;
                   for (double eta : {1.0, 5.0, 10.0})
                     for (double alpha : {0.6, 0.8, 0.95})
                       for (double p1 : {0.7, 0.8}) {
                         const auto emb = correlated_pair_embeddings(alpha);  // c = 2
                         const auto task = two_token_task(p1);
                         const auto inst = two_token_instance(emb, task);
                         const auto b = spike_lower_bound(inst, eta);
                         if (!b.applicable) continue;
                         ++cases;
                         const Weights W1 = -eta * grad(Matrix::Zero(2, 2), emb, task);
                         c.require(loss(W1, emb, task) >= b.value, "first-step loss below the bound");
                       }
                   return std::pair{c.ok, std::string(c.ok ? std::to_string(cases) + " cases hold" : c.note)};
                 }});

  out.push_back({"analysis.landscape_pointwise", [](const VerifyOptions&) {
                   Check c;
                   const auto emb = correlated_pair_embeddings(0.95);
                   const auto task = two_token_task(0.75);
                   GridSpec spec;
                   spec.n1 = spec.n2 = 17;
                   const auto g = landscape(emb, task, spec);
                   for (Index i = 0; i < spec.n1; ++i)
                     for (Index j = 0; j < spec.n2; ++j) {
                       const Weights W = w_from_gamma({g.axis1[static_cast<std::size_t>(i)],
                                                       g.axis2[static_cast<std::size_t>(j)], GammaBasis::Canonical},
                                                      emb);
                       c.value(std::abs(g.loss(i, j) - loss(W, emb, task)), 1e-12);
                     }
                   return std::pair{c.ok, c.detail("max grid error")};
                 }});

  out.push_back({"analysis.one_step_for_nonpositive_alpha", [](const VerifyOptions&) {
                   Check c;
                   for (double alpha : {-1.0, -0.5, 0.0})
                     for (double p1 : {0.5, 0.75, 0.95})
                       for (double eta : {0.01, 1.0, 100.0})
                         c.require(steps_to_accuracy(correlated_pair_embeddings(alpha), two_token_task(p1), eta).steps == 1,
                                   "more than one step needed");
                   return std::pair{c.ok, std::string(c.ok ? "27 cells need one step" : c.note)};
                 }});

  out.push_back({"analysis.excess_risk_witness", [](const VerifyOptions&) {
                   const auto w = find_excess_risk_witness(2026);
                   if (!w) return std::pair{false, std::string("no witness found")};
                   std::ostringstream os;
                   os << "seed 2026 draw " << w->draw << ": excess risk " << w->risk.value;
                   return std::pair{w->risk.value > 0.0, os.str()};
                 }});

  out.push_back({"expcli.config_rejects_unknown_key", [](const VerifyOptions&) {
                   try {
                     resolve_config(parse_toml("[dynamics]\netaa = 1\n"));
                   } catch (const ConfigError& e) {
                     return std::pair{e.key() == "dynamics.etaa", "rejected '" + e.key() + "'"};
                   }
                   return std::pair{false, std::string("unknown key accepted")};
                 }});

  return out;
}

}  // namespace detail

inline std::vector<std::string> property_names() {
  std::vector<std::string> out;
  for (const auto& p : detail::properties()) out.push_back(p.name);
  return out;
}

inline VerifyReport verify(const VerifyOptions& opt = {}) {
  VerifyReport report;
  for (const auto& p : detail::properties()) {
    if (!opt.only.empty()) {
      bool hit = false;
      for (const auto& s : opt.only) hit = hit || p.name.find(s) != std::string::npos;
      if (!hit) continue;
    }
    PropertyResult r;
    r.name = p.name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      std::tie(r.passed, r.detail) = p.run(opt);
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("threw: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.results.push_back(std::move(r));
  }
  return report;
}

inline void print_report(std::ostream& os, const VerifyReport& report) {
  std::size_t width = 0;
  for (const auto& r : report.results) width = std::max(width, r.name.size());
  std::size_t failed = 0;
  double total = 0.0;
  for (const auto& r : report.results) {
    os << (r.passed ? "PASS " : "FAIL ") << std::left << std::setw(static_cast<int>(width)) << r.name << "  "
       << std::right << std::fixed << std::setprecision(3) << std::setw(8) << r.seconds << "s  " << r.detail << '\n';
    failed += !r.passed;
    total += r.seconds;
  }
  os << (failed == 0 ? "all " : "") << report.results.size() - failed << '/' << report.results.size()
     << " properties passed in " << std::fixed << std::setprecision(2) << total << "s\n";
}

}  // namespace assocmem
