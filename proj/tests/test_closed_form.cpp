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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "assocmem/closed_form.hpp"
#include "assocmem/gamma.hpp"
#include "support.hpp"

namespace assocmem {
namespace {

// Root of y e^y = x by bisection; slow but independent of the Halley code.
double bisect_w0(double x) {
  double lo = -1.0, hi = std::max(1.0, std::log1p(x) + 1.0);
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (mid * std::exp(mid) < x ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Root of m + e^m = s by bisection.
double bisect_margin(double s) {
  double lo = std::min(s, 0.0) - 1.0, hi = std::max(s, 1.0);
  for (int k = 0; k < 300; ++k) {
    const double mid = 0.5 * (lo + hi);
    (mid + std::exp(mid) < s ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

TEST(LambertW, KnownValues) {
  EXPECT_EQ(lambert_w0(0.0), 0.0);
  EXPECT_NEAR(lambert_w0(std::numbers::e), 1.0, 1e-15);
  EXPECT_NEAR(lambert_w0(1.0), 0.5671432904097838, 1e-15);
  EXPECT_NEAR(lambert_w0(1.0), bisect_w0(1.0), 1e-15);
  EXPECT_NEAR(lambert_w0(-1.0 / std::numbers::e), -1.0, 1e-7);
}

TEST(LambertW, DomainError) {
  EXPECT_THROW(lambert_w0(-0.5), std::domain_error);
  EXPECT_THROW(lambert_w0(std::nan("")), std::domain_error);
}

TEST(LambertW, ResidualAcrossRange) {
  for (double lx = -8; lx <= 300; lx += 0.37) {
    const double x = std::exp(lx);
    const double y = lambert_w0(x);
    EXPECT_LE(std::abs(y * std::exp(y) - x), 1e-12 * std::max(1.0, x)) << x;
  }
  for (double x = -0.3678; x < 0.0; x += 0.001) {
    const double y = lambert_w0(x);
    EXPECT_LE(std::abs(y * std::exp(y) - x), 1e-12) << x;
    EXPECT_GE(y, -1.0);
  }
}

TEST(LambertW, RoundTrip) {
  for (double x = -1.0; x <= 20.0; x += 0.01) EXPECT_NEAR(lambert_w0(x * std::exp(x)), x, 1e-11) << x;
}

TEST(LambertW, ExpArgumentMatchesDirectAndBisection) {
  for (double v = -20; v <= 700; v += 1.3) {
    const double w = lambert_w0_exp(v);
    EXPECT_NEAR(w + std::log(w), v, 1e-13 * std::max(1.0, std::abs(v)));
    if (v < 600) {
      EXPECT_NEAR(w, lambert_w0(std::exp(v)), 1e-13 * std::max(1.0, w));
    }
  }
  EXPECT_NEAR(lambert_w0_exp(1e6) + std::log(lambert_w0_exp(1e6)), 1e6, 1e-9);
}

TEST(BinaryClosedForm, ExamplesAndInversion) {
  const auto inst = BinaryOrthogonalInstance::make(1.0, 0.0);
  EXPECT_NEAR(binary_margin_closed(inst, 0.0).value, 0.0, 1e-15);
  EXPECT_NEAR(binary_margin_closed(inst, std::numbers::e).value, 1.0, 1e-14);
  Rng rng = make_stream(61, {});
  std::uniform_real_distribution<double> uc(0.1, 5.0), um(-2.0, 2.0), ut(0.0, 1e3);
  for (int k = 0; k < 200; ++k) {
    const auto b = BinaryOrthogonalInstance::make(uc(rng), um(rng));
    EXPECT_NEAR(binary_margin_closed(b, 0.0).value, b.m0, 1e-12);
    const double t = ut(rng);
    const double m = binary_margin_closed(b, t).value;
    EXPECT_NEAR(m, bisect_margin(b.c * t + std::exp(b.m0) + b.m0), 1e-11 * std::max(1.0, std::abs(m)));
  }
}

TEST(BinaryClosedForm, RegimeFlag) {
  const auto inst = BinaryOrthogonalInstance::make(2.0, 1.0);
  EXPECT_TRUE(binary_margin_closed(inst, inst.t0).in_regime);
  const auto before = binary_margin_closed(inst, inst.t0 - 1.0);
  EXPECT_FALSE(before.in_regime);
  EXPECT_TRUE(std::isfinite(before.value));
}

TEST(BinaryClosedForm, MatchesGradientFlow) {
  const auto emb = orthonormal_embeddings(1, 2, 2, 1.0 / std::sqrt(2.0));
  DynamicsConfig cfg;
  cfg.kind = DynamicsKind::GF;
  cfg.t_end = 1e3;
  cfg.record_every = 10;
  const auto rec = gf_run(Matrix::Zero(2, 2), emb, TaskSpec{{0}, {1.0}}, cfg);
  const auto inst = BinaryOrthogonalInstance::make(1.0, 0.0);
  for (std::size_t k = 0; k < rec.size(); ++k)
    EXPECT_NEAR(rec.gaps[k](0), binary_margin_closed(inst, rec.times[k]).value, 1e-6);
}

TEST(HBound, Examples) {
  const auto one = h_bound(1.0);
  EXPECT_EQ(one.lower, 0.0);
  EXPECT_EQ(one.upper, 0.0);
  const auto e = h_bound(std::numbers::e);
  EXPECT_NEAR(e.upper, 2.0 / std::numbers::e, 1e-15);
  EXPECT_THROW(h_bound(0.5), std::domain_error);
  // Sandwich at x = c (t - t0) = 100.
  const auto inst = BinaryOrthogonalInstance::make(1.0, 0.0);
  const double t = 100.0 + inst.t0;
  const double gap = std::log(100.0) - binary_margin_closed(inst, t).value;
  EXPECT_GE(gap, 0.0);
  EXPECT_LE(gap, h_bound(100.0).upper);
  EXPECT_NEAR(binary_log_gap(inst, t), gap, 1e-13);
}

TEST(MulticlassInvariants, Examples) {
  Vector w(4);
  w << 0.3, 1.2, 0.3, -0.4;
  const auto v = multiclass_invariants(w, 1);
  ASSERT_EQ(v.size(), 3u);  // pairs (0,2), (0,3), (2,3)
  EXPECT_EQ(v[0], 0.0);
  EXPECT_NEAR(v[1], std::exp(-0.3) - std::exp(0.4), 1e-15);
  for (double q : multiclass_invariants(Vector::Zero(5), 2)) EXPECT_EQ(q, 0.0);
}

TEST(MulticlassInvariants, ZeroStartKeepsNonTargetScoresEqual) {
  const auto emb = orthonormal_embeddings(3, 4, 4);
  const TaskSpec task{{0, 3, 1}, {0.5, 0.3, 0.2}};
  DynamicsConfig cfg;
  cfg.kind = DynamicsKind::GF;
  cfg.t_end = 50;
  const auto W = gf_run(Matrix::Zero(4, 4), emb, task, cfg).final_weights;
  const Matrix S = scores(W, emb);
  for (Index x = 0; x < 3; ++x)
    for (double q : multiclass_invariants(S.row(x).transpose(), task.targets[x])) EXPECT_NEAR(q, 0.0, 1e-12);
}

TEST(MulticlassInvariants, DriftAlongFlowFromRandomStart) {
  const auto emb = orthonormal_embeddings(3, 3, 3);
  const TaskSpec task{{2, 0, 1}, {0.2, 0.5, 0.3}};
  Rng rng = make_stream(62, {});
  const Weights W0 = testing::gaussian(3, 3, rng);
  DynamicsConfig cfg;
  cfg.kind = DynamicsKind::GF;
  cfg.t_end = 100;
  const Matrix S0 = scores(W0, emb), S1 = scores(gf_run(W0, emb, task, cfg).final_weights, emb);
  for (Index x = 0; x < 3; ++x) {
    const auto a = multiclass_invariants(S0.row(x).transpose(), task.targets[x]);
    const auto b = multiclass_invariants(S1.row(x).transpose(), task.targets[x]);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
  }
}

TEST(AsymptoticDirection, BinaryProjectionAndConstant) {
  const auto emb = orthonormal_embeddings(1, 2, 3);
  const auto dir = asymptotic_direction(emb, TaskSpec{{0}, {1.0}});
  const Vector expect = (emb.outputs.row(0) - emb.outputs.row(1)).transpose() / 2.0;
  EXPECT_LE((dir.direction.col(0) - expect).norm(), 1e-15);
  EXPECT_NEAR(dir.direction.col(0).norm(), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(dir.constant, 1.0 / (2.0 * std::sqrt(2.0)), 1e-15);
}

TEST(AsymptoticDirection, EqualMarginsAcrossWrongClasses) {
  const auto emb = orthonormal_embeddings(4, 4, 5);
  const TaskSpec task{{3, 1, 1, 0}, uniform_freq(4)};
  const auto dir = asymptotic_direction(emb, task);
  for (Index x = 0; x < 4; ++x) {
    const Vector col = dir.direction * emb.inputs.row(x).transpose();
    const Index y = task.targets[x];
    const double first = col.dot(emb.outputs.row(y)) - col.dot(emb.outputs.row(y == 0 ? 1 : 0));
    for (Index j = 0; j < 4; ++j) {
      if (j != y) {
        EXPECT_NEAR(col.dot(emb.outputs.row(y)) - col.dot(emb.outputs.row(j)), first, 1e-14);
      }
    }
    EXPECT_NEAR(emb.outputs.row(y).dot(update_span(emb).out * emb.outputs.row(y).transpose()), 0.75, 1e-14);
  }
}

TEST(AsymptoticDirection, RejectsNonOrthonormal) {
  EXPECT_THROW(asymptotic_direction(correlated_pair_embeddings(0.3), two_token_task(0.6)), std::invalid_argument);
}

TEST(GammaOde, Examples) {
  const auto sym = TwoTokenInstance::make(0.5, 0.3);
  EXPECT_EQ(gamma_ode_rhs(sym, 0.0, 0.0).d_gamma1, 0.0);
  const auto aligned = TwoTokenInstance::make(0.7, 1.0);
  EXPECT_EQ(gamma_ode_rhs(aligned, 0.4, -1.0).d_gamma2, 0.0);
  Rng rng = make_stream(63, {});
  std::normal_distribution<double> g(0.0, 3.0);
  const auto inst = TwoTokenInstance::make(0.8, 0.4);
  for (int k = 0; k < 100; ++k) EXPECT_GT(gamma_ode_rhs(inst, g(rng), g(rng)).d_gamma2, 0.0);
}

TEST(GammaOde, MatchesProjectedGradientFlow) {
  Rng rng = make_stream(64, {});
  std::uniform_real_distribution<double> ua(-0.9, 0.95), up(0.5, 0.95), us(0.5, 2.0);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int k = 0; k < 50; ++k) {
    const double alpha = ua(rng), p1 = up(rng);
    const auto emb = correlated_pair_embeddings(alpha, 3, us(rng));
    const auto task = two_token_task(p1);
    const GammaCoords start{g(rng), g(rng), GammaBasis::TwoToken};
    const Weights W = w_from_gamma(start, emb);
    const Matrix dW = -grad(W, emb, task);
    const auto [F, lead] = detail::gamma_frame(emb, GammaBasis::TwoToken);
    const Vector flow = (lead.transpose() * dW * F).transpose();
    const auto inst = two_token_instance(emb, task);
    ASSERT_FALSE(inst.swapped);
    const auto rate = gamma_ode_rhs(inst, start.gamma1, start.gamma2);
    EXPECT_NEAR(flow(0), 0.5 * inst.c * rate.d_gamma1, 1e-12);
    EXPECT_NEAR(flow(1), 0.5 * inst.c * rate.d_gamma2, 1e-12);
  }
}

TEST(GammaOde, SignRule) {
  for (double p1 : {0.5, 0.6, 0.75, 0.9})
    for (double alpha : {-0.5, 0.0, 0.5, 0.95}) {
      const auto inst = TwoTokenInstance::make(p1, alpha);
      for (double g1 = -5; g1 <= 5; g1 += 0.25)
        for (double g2 = -5; g2 <= 8; g2 += 0.25) {
          const double rate = gamma_ode_rhs(inst, g1, g2).d_gamma1;
          const double lhs = std::sinh(g1 - inst.gamma_bar()), rhs = gamma1_threshold(inst, g2);
          if (std::abs(lhs - rhs) < 1e-9 * (1.0 + std::abs(rhs))) continue;  // boundary
          EXPECT_EQ(rate <= 0.0, lhs >= rhs) << p1 << ' ' << alpha << ' ' << g1 << ' ' << g2;
        }
    }
}

TEST(GammaOde, Gamma2Increases) {
  const auto inst = TwoTokenInstance::make(0.7, 0.6, 2.0);
  std::vector<double> times;
  for (int k = 0; k <= 200; ++k) times.push_back(k * 5.0);
  const auto traj = gamma_flow(inst, {0.0, 0.0, GammaBasis::TwoToken}, times);
  for (std::size_t k = 1; k < traj.size(); ++k) EXPECT_GT(traj[k].gamma2, traj[k - 1].gamma2);
}

TEST(Gamma1Limit, Examples) {
  EXPECT_EQ(gamma1_limit(TwoTokenInstance::make(0.5, 0.2)), 0.0);
  EXPECT_NEAR(gamma1_limit(TwoTokenInstance::make(0.75, 0.2)), 0.549306, 1e-6);
  EXPECT_NEAR(gamma1_limit(TwoTokenInstance::make(0.25, 0.2)), 0.5 * std::log(3.0), 1e-15);
  const auto inst = TwoTokenInstance::make(0.75, 0.5, 2.0);
  const auto traj = gamma_flow(inst, {0.0, 0.0, GammaBasis::TwoToken}, {1e4});
  EXPECT_LE(std::abs(traj.back().gamma1 - gamma1_limit(inst)), 1e-2);
}

TEST(GdGammaBounds, Examples) {
  const auto inst = TwoTokenInstance::make(0.75, 0.5, 2.0);
  const auto still = gd_gamma_bounds(inst, 0.0);
  EXPECT_EQ(still.gamma1_lower(), 0.0);
  EXPECT_NEAR(still.gamma1_upper(), inst.gamma_bar() + 0.75 / 0.5, 1e-15);
  const auto sym = gd_gamma_bounds(TwoTokenInstance::make(0.5, 0.5), 1e-3);
  EXPECT_LE(sym.gamma1_lower(), 0.0);
  EXPECT_GE(sym.gamma1_upper(), 0.0);
  EXPECT_LT(sym.gamma1_upper() - sym.gamma1_lower(), 0.51);
}

TEST(GdGammaBounds, SymmetricTrajectoryStaysAtZero) {
  const auto emb = correlated_pair_embeddings(0.5);
  DynamicsConfig cfg;
  cfg.eta = Schedule::constant(0.01);
  cfg.t_end = 500;
  cfg.gamma = GammaBasis::TwoToken;
  const auto rec = gd_run(Matrix::Zero(2, 2), emb, two_token_task(0.5), cfg);
  const auto b = gd_gamma_bounds(TwoTokenInstance::make(0.5, 0.5, 2.0), 0.01);
  for (const auto& g : rec.gamma) {
    EXPECT_NEAR(g.gamma1, 0.0, 1e-12);
    EXPECT_GE(g.gamma1, b.gamma1_lower() - 1e-12);
    EXPECT_LE(g.gamma1, b.gamma1_upper());
  }
}

TEST(SpikeBound, Examples) {
  const auto edge = spike_lower_bound(TwoTokenInstance::make(0.75, 0.25 / 0.75), 3.0);
  EXPECT_EQ(edge.value, 0.0);
  const auto fig = spike_lower_bound(TwoTokenInstance::make(0.75, 0.95), 10.0);
  EXPECT_TRUE(fig.applicable);
  EXPECT_NEAR(fig.value, 1.15625, 1e-14);
  EXPECT_FALSE(spike_lower_bound(TwoTokenInstance::make(0.75, 0.2), 10.0).applicable);
}

double first_step_loss(double eta, double alpha, double p1, double scale, double* m2) {
  const auto emb = correlated_pair_embeddings(alpha, 2, scale);
  const auto task = two_token_task(p1);
  const Weights W1 = -eta * grad(Matrix::Zero(2, 2), emb, task);
  *m2 = margins(W1, emb, task)[1].gap;
  return loss(W1, emb, task);
}

TEST(SpikeBound, SweepWithProofNormalization) {
  // Orthonormal outputs give c = 2, the scaling under which the rarer margin
  // moves by exactly eta (p2 - alpha p1).
  int checked = 0;
  for (double eta : {1.0, 5.0, 10.0, 50.0})
    for (double alpha : {0.5, 0.8, 0.95})
      for (double p1 : {0.6, 0.75, 0.9}) {
        const auto inst = TwoTokenInstance::make(p1, alpha, 2.0);
        const auto bound = spike_lower_bound(inst, eta);
        double m2 = 0.0;
        const double L = first_step_loss(eta, alpha, p1, 1.0, &m2);
        EXPECT_NEAR(m2, eta * (inst.p2 - alpha * inst.p1), 1e-12 * eta);
        if (!bound.applicable) continue;
        ++checked;
        EXPECT_GE(L, bound.value) << eta << ' ' << alpha << ' ' << p1;
      }
  EXPECT_GT(checked, 20);
}

TEST(SpikeBound, NormalizationFreeChain) {
  for (double scale : {1.0 / std::sqrt(2.0), 1.0, 2.0})
    for (double eta : {1.0, 5.0, 10.0, 50.0})
      for (double alpha : {0.5, 0.8, 0.95})
        for (double p1 : {0.6, 0.75, 0.9}) {
          double m2 = 0.0;
          const double L = first_step_loss(eta, alpha, p1, scale, &m2);
          const double p2 = 1.0 - p1;
          const double rare = p2 * std::log1p(std::exp(-m2));
          // Same quantity two ways once the frequent token's loss underflows.
          EXPECT_GE(L, rare * (1.0 - 1e-12));
          EXPECT_GE(rare, -p2 * m2);
          EXPECT_GE(L, -p2 * m2);
        }
}

TEST(GdLossBound, Examples) {
  const auto emb = orthonormal_embeddings(4, 2, 4);
  const TaskSpec task{{0, 1, 1, 0}, uniform_freq(4)};
  // c_x = 2 p = 1/2 for each token, so the sum is 4 * (1/4) / (1/2) = 2.
  EXPECT_NEAR(gd_loss_bound(emb, task, 1.0, 1.0), 2.0, 1e-15);
  EXPECT_NEAR(gd_loss_bound(emb, task, 0.1, 50.0), 2.0 / 5.0, 1e-15);
  EXPECT_THROW(gd_loss_bound(emb, task, 0.0, 1.0), std::invalid_argument);
}

TEST(GdLossBound, MarginGrowthAndFactorTwoEnvelope) {
  const auto emb = orthonormal_embeddings(4, 2, 4);
  const TaskSpec task{{0, 1, 1, 0}, {0.1, 0.2, 0.3, 0.4}};
  for (double eta : {0.1, 1.0, 5.0}) {
    std::vector<double> m(4, 0.0);  // scalar recursion m += eta c sigma(-m), one per token
    Weights W = Matrix::Zero(4, 4);
    for (int t = 1; t <= 3000; ++t) {
      W -= eta * grad(W, emb, task);
      const Vector gm = gap_margins(W, emb, task);
      double L = 0.0;
      for (Index x = 0; x < 4; ++x) {
        const double c = 2.0 * task.freq[x];
        auto& mx = m[static_cast<std::size_t>(x)];
        mx += eta * c / (1.0 + std::exp(mx));
        ASSERT_NEAR(gm(x), mx, 1e-9 * (1.0 + mx));
        EXPECT_GE(std::exp(mx), eta * c * t / 2.0 + 1.0);
        L += task.freq[x] * std::log1p(std::exp(-mx));
      }
      EXPECT_NEAR(loss(W, emb, task), L, 1e-12);
      EXPECT_LE(L, 2.0 * gd_loss_bound(emb, task, eta, t));
    }
  }
}

}  // namespace
}  // namespace assocmem
