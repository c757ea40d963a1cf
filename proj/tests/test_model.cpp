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

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

#include "assocmem/model.hpp"
#include "assocmem/sharpness.hpp"
#include "support.hpp"

namespace assocmem {
namespace {

using testing::random_instance;
using testing::random_small_instance;
using testing::rel_err;

// Score by explicit loops, no matrix products.
double naive_score(const Weights& W, const EmbeddingSet& emb, Index x, Index y) {
  double s = 0.0;
  for (Index a = 0; a < emb.dim(); ++a)
    for (Index b = 0; b < emb.dim(); ++b) s += emb.outputs(y, a) * W(a, b) * emb.inputs(x, b);
  return s;
}

double naive_loss(const Weights& W, const EmbeddingSet& emb, const TaskSpec& task) {
  double total = 0.0;
  for (Index x = 0; x < emb.num_tokens(); ++x) {
    double z = 0.0;
    for (Index y = 0; y < emb.num_classes(); ++y) z += std::exp(naive_score(W, emb, x, y));
    total += task.freq[static_cast<std::size_t>(x)] *
             (std::log(z) - naive_score(W, emb, x, task.targets[static_cast<std::size_t>(x)]));
  }
  return total;
}

Index naive_predict(const Weights& W, const EmbeddingSet& emb, Index x) {
  Index best = 0;
  double top = naive_score(W, emb, x, 0);
  for (Index y = 1; y < emb.num_classes(); ++y) {
    const double s = naive_score(W, emb, x, y);
    if (s > top) {
      top = s;
      best = y;
    }
  }
  return best;
}

Matrix fd_grad(const Weights& W, const EmbeddingSet& emb, const TaskSpec& task, double h) {
  Matrix G(W.rows(), W.cols());
  for (Index k = 0; k < W.size(); ++k) {
    Weights Wp = W, Wm = W;
    Wp.data()[k] += h;
    Wm.data()[k] -= h;
    G.data()[k] = (loss(Wp, emb, task) - loss(Wm, emb, task)) / (2.0 * h);
  }
  return G;
}

TEST(Predict, ZeroWeightsPredictFirstClass) {
  const auto emb = orthonormal_embeddings(3, 3, 4);
  const Weights W = Matrix::Zero(4, 4);
  for (Index x = 0; x < 3; ++x) EXPECT_EQ(predict(W, emb, x), 0);
}

TEST(Predict, SingleOuterProduct) {
  const auto emb = orthonormal_embeddings(2, 2, 2);
  const Weights W = emb.outputs.row(1).transpose() * emb.inputs.row(0);
  EXPECT_EQ(predict(W, emb, 0), 1);
}

TEST(Predict, MatchesScoreEnumeration) {
  Rng rng = make_stream(11, {});
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = random_small_instance(rng);
    for (Index x = 0; x < inst.emb.num_tokens(); ++x)
      EXPECT_EQ(predict(inst.W, inst.emb, x), naive_predict(inst.W, inst.emb, x));
  }
}

TEST(Predict, RejectsBadToken) {
  const auto emb = orthonormal_embeddings(2, 2, 2);
  const Weights W = Matrix::Zero(2, 2);
  EXPECT_THROW(predict(W, emb, 2), std::out_of_range);
  EXPECT_THROW(predict(W, emb, -1), std::out_of_range);
}

TEST(Loss, ZeroWeightsGiveLogM) {
  for (Index m : {2, 3, 5}) {
    const auto emb = orthonormal_embeddings(3, m, 5);
    const TaskSpec task{modulo_targets(3, m), uniform_freq(3)};
    EXPECT_NEAR(loss(Matrix::Zero(5, 5), emb, task), std::log(static_cast<double>(m)), 1e-15);
  }
  const auto emb = orthonormal_embeddings(2, 2, 2);
  EXPECT_NEAR(loss(Matrix::Zero(2, 2), emb, two_token_task(0.7)), 0.693147, 1e-6);
}

TEST(Loss, MatchesNaiveSummation) {
  Rng rng = make_stream(12, {});
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = random_instance(3, 3, 4, rng);
    EXPECT_NEAR(loss(inst.W, inst.emb, inst.task), naive_loss(inst.W, inst.emb, inst.task), 1e-12);
  }
}

TEST(Loss, RejectsShapeMismatch) {
  const auto emb = orthonormal_embeddings(2, 2, 3);
  EXPECT_THROW(loss(Matrix::Zero(2, 2), emb, two_token_task(0.5)), std::invalid_argument);
  const TaskSpec bad{{0, 1, 0}, uniform_freq(3)};
  EXPECT_THROW(loss(Matrix::Zero(3, 3), emb, bad), std::invalid_argument);
}

TEST(Loss, FiniteForHugeWeights) {
  Rng rng = make_stream(13, {});
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = random_small_instance(rng);
    inst.W *= 1e4 / inst.W.norm();
    const double L = loss(inst.W, inst.emb, inst.task);
    EXPECT_TRUE(std::isfinite(L));
    EXPECT_GE(L, 0.0);
  }
}

TEST(Loss, Convexity) {
  Rng rng = make_stream(14, {});
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = random_small_instance(rng);
    const Weights W2 = testing::gaussian(inst.W.rows(), inst.W.cols(), rng, 2.0);
    const double lam = unif(rng);
    const double mid = loss(lam * inst.W + (1 - lam) * W2, inst.emb, inst.task);
    EXPECT_LE(mid, lam * loss(inst.W, inst.emb, inst.task) + (1 - lam) * loss(W2, inst.emb, inst.task) + 1e-12);
  }
}

TEST(ZeroOne, RealizingWeightsScoreZero) {
  const auto emb = orthonormal_embeddings(4, 4, 4);
  const TaskSpec task{{2, 0, 3, 1}, uniform_freq(4)};
  Weights W = Matrix::Zero(4, 4);
  for (Index x = 0; x < 4; ++x) W += emb.outputs.row(task.targets[x]).transpose() * emb.inputs.row(x);
  EXPECT_EQ(zero_one_loss(W, emb, task), 0.0);
}

TEST(ZeroOne, ZeroWeightsMissEveryNonFirstTarget) {
  const auto emb = orthonormal_embeddings(3, 3, 3);
  const TaskSpec task{{1, 2, 1}, {0.2, 0.3, 0.5}};
  EXPECT_EQ(zero_one_loss(Matrix::Zero(3, 3), emb, task), 1.0);
}

TEST(ZeroOne, MatchesEnumeration) {
  Rng rng = make_stream(15, {});
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = random_small_instance(rng);
    double expect = 0.0;
    for (Index x = 0; x < inst.emb.num_tokens(); ++x)
      if (naive_predict(inst.W, inst.emb, x) != inst.task.targets[x]) expect += inst.task.freq[x];
    EXPECT_DOUBLE_EQ(zero_one_loss(inst.W, inst.emb, inst.task), expect);
  }
}

TEST(Grad, ProjectionAtZeroIsOne) {
  const auto emb = orthonormal_embeddings(1, 2, 3);
  const TaskSpec task{{0}, {1.0}};
  const Matrix G = grad(Matrix::Zero(3, 3), emb, task);
  const Matrix dir = (emb.outputs.row(1) - emb.outputs.row(0)).transpose() * emb.inputs.row(0);
  EXPECT_NEAR(inner(G, dir), 1.0, 1e-15);
}

TEST(Grad, FiniteDifferences) {
  Rng rng = make_stream(16, {});
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = random_small_instance(rng);
    const Matrix G = grad(inst.W, inst.emb, inst.task);
    const Matrix F = fd_grad(inst.W, inst.emb, inst.task, 1e-5);
    EXPECT_LE(rel_err(G, F), 1e-6) << "trial " << trial;
  }
}

TEST(Grad, AnnihilatesDirectionsOrthogonalToInputs) {
  Rng rng = make_stream(17, {});
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = random_instance(2, 3, 5, rng);
    // Orthogonal complement of the input rows.
    Eigen::FullPivLU<Matrix> lu(inst.emb.inputs);
    const Matrix kernel = lu.kernel();
    const Matrix G = grad(inst.W, inst.emb, inst.task);
    EXPECT_LE((G * kernel).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Grad, LossAndGradAgree) {
  Rng rng = make_stream(18, {});
  const auto inst = random_small_instance(rng);
  const auto [L, G] = loss_and_grad(inst.W, inst.emb, inst.task);
  EXPECT_DOUBLE_EQ(L, loss(inst.W, inst.emb, inst.task));
  EXPECT_LE(rel_err(G, grad(inst.W, inst.emb, inst.task)), 1e-15);
}

TEST(Hessian, ZeroDirection) {
  Rng rng = make_stream(19, {});
  const auto inst = random_small_instance(rng);
  const Matrix Z = Matrix::Zero(inst.W.rows(), inst.W.cols());
  EXPECT_EQ(hessian_vector_product(inst.W, inst.emb, inst.task, Z).norm(), 0.0);
}

TEST(Hessian, PositiveSemidefinite) {
  Rng rng = make_stream(20, {});
  const auto inst = random_small_instance(rng);
  for (int k = 0; k < 100; ++k) {
    const Matrix V = testing::gaussian(inst.W.rows(), inst.W.cols(), rng);
    EXPECT_GE(inner(V, hessian_vector_product(inst.W, inst.emb, inst.task, V)), -1e-14);
  }
}

TEST(Hessian, FiniteDifferenceOfGradient) {
  Rng rng = make_stream(21, {});
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = random_small_instance(rng);
    const Matrix V = testing::gaussian(inst.W.rows(), inst.W.cols(), rng);
    const double h = 1e-5;
    const Matrix fd = (grad(inst.W + h * V, inst.emb, inst.task) - grad(inst.W - h * V, inst.emb, inst.task)) / (2 * h);
    EXPECT_LE(rel_err(hessian_vector_product(inst.W, inst.emb, inst.task, V), fd), 1e-5) << "trial " << trial;
  }
}

TEST(Hessian, Symmetric) {
  Rng rng = make_stream(22, {});
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = random_small_instance(rng);
    const Matrix V1 = testing::gaussian(inst.W.rows(), inst.W.cols(), rng);
    const Matrix V2 = testing::gaussian(inst.W.rows(), inst.W.cols(), rng);
    const double a = inner(V1, hessian_vector_product(inst.W, inst.emb, inst.task, V2));
    const double b = inner(V2, hessian_vector_product(inst.W, inst.emb, inst.task, V1));
    EXPECT_NEAR(a, b, 1e-10 * std::max(1.0, std::abs(a)));
  }
}

TEST(Hessian, DenseMatchesOperatorColumns) {
  Rng rng = make_stream(23, {});
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = random_small_instance(rng, 4);
    const Index d = inst.emb.dim();
    const Matrix H = dense_hessian(inst.W, inst.emb, inst.task);
    for (Index k = 0; k < d * d; ++k) {
      Matrix V = Matrix::Zero(d, d);
      V.data()[k] = 1.0;
      const Matrix col = hessian_vector_product(inst.W, inst.emb, inst.task, V);
      EXPECT_LE((H.col(k) - Eigen::Map<const Vector>(col.data(), d * d)).norm(), 1e-12 * std::max(1.0, H.norm()));
    }
  }
}

TEST(Margins, ZeroWeights) {
  const auto emb = orthonormal_embeddings(3, 3, 3);
  const TaskSpec task{{0, 1, 2}, uniform_freq(3)};
  for (const auto& mv : margins(Matrix::Zero(3, 3), emb, task)) {
    EXPECT_EQ(mv.pairwise.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(mv.gap, 0.0);
  }
}

TEST(Margins, PrescribedBinaryMargin) {
  const auto emb = orthonormal_embeddings(2, 2, 3);
  const TaskSpec task{{0, 1}, uniform_freq(2)};
  const double m = 2.5;
  const Vector diff = (emb.outputs.row(0) - emb.outputs.row(1)).transpose();
  const Weights W = m * diff * emb.inputs.row(0) / (diff.squaredNorm() * emb.inputs.row(0).squaredNorm());
  EXPECT_NEAR(margins(W, emb, task)[0].pairwise(1), m, 1e-15);
}

TEST(Margins, MatchEnumerationAndGapIsMinimum) {
  Rng rng = make_stream(24, {});
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = random_small_instance(rng);
    const auto mv = margins(inst.W, inst.emb, inst.task);
    bool all_positive = true;
    for (Index x = 0; x < inst.emb.num_tokens(); ++x) {
      const Index y = inst.task.targets[x];
      double gap = std::numeric_limits<double>::infinity();
      for (Index i = 0; i < inst.emb.num_classes(); ++i) {
        const double expect = naive_score(inst.W, inst.emb, x, y) - naive_score(inst.W, inst.emb, x, i);
        EXPECT_NEAR(mv[x].pairwise(i), expect, 1e-12 * (1.0 + std::abs(expect)));
        if (i != y) gap = std::min(gap, mv[x].pairwise(i));
      }
      EXPECT_EQ(mv[x].gap, gap);
      all_positive = all_positive && (inst.task.freq[x] == 0.0 || mv[x].gap > 0.0);
    }
    EXPECT_EQ(all_positive, zero_one_loss(inst.W, inst.emb, inst.task) == 0.0);
  }
}

TEST(Sharpness, MatchesDenseEigensolver) {
  Rng rng = make_stream(25, {});
  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_int_distribution<Index> nd(1, 5), md(2, 4), dd(2, 4);
    const auto inst = random_instance(nd(rng), md(rng), dd(rng), rng);
    const Matrix H = dense_hessian(inst.W, inst.emb, inst.task);
    const double top = Eigen::SelfAdjointEigenSolver<Matrix>(H).eigenvalues().maxCoeff();
    const auto est = sharpness(inst.W, inst.emb, inst.task);
    EXPECT_NEAR(est.value, top, 1e-8 * top) << "trial " << trial;
  }
}

TEST(Sharpness, SingleTokenAtZero) {
  const auto emb = orthonormal_embeddings(1, 2, 2);
  const TaskSpec task{{0}, {1.0}};
  const Weights W = Matrix::Zero(2, 2);
  const double expect = 0.25 * (emb.outputs.row(0) - emb.outputs.row(1)).squaredNorm();
  const Matrix H = dense_hessian(W, emb, task);
  EXPECT_NEAR(Eigen::SelfAdjointEigenSolver<Matrix>(H).eigenvalues().maxCoeff(), expect, 1e-14);
  EXPECT_NEAR(sharpness(W, emb, task).value, expect, 1e-8 * expect);
}

TEST(Sharpness, VanishesAlongSeparatingRay) {
  const auto emb = orthonormal_embeddings(3, 3, 3);
  const TaskSpec task{{0, 1, 2}, uniform_freq(3)};
  Weights D = Matrix::Zero(3, 3);
  for (Index x = 0; x < 3; ++x) D += emb.outputs.row(x).transpose() * emb.inputs.row(x);
  double prev = sharpness(D, emb, task).value;
  for (double s : {5.0, 20.0, 80.0}) {
    const double cur = sharpness(s * D, emb, task).value;
    EXPECT_LT(cur, prev);
    prev = cur;
  }
  EXPECT_LT(prev, 1e-20);
}

}  // namespace
}  // namespace assocmem
