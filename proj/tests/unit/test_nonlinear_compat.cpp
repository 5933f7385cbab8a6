#include <gtest/gtest.h>

#include "test_util.hpp"
#include "zsl/eval.hpp"
#include "zsl/nonlinear_compat.hpp"
#include "zsl/splitgen.hpp"

namespace zsl {
namespace {

using test::random_matrix;
using test::random_vector;

TEST(LatemCompatibility, SingleMatrixEqualsBilinear) {
  Rng rng(1);
  const Matrix W = random_matrix(rng, 3, 2);
  const Vector x = random_vector(rng, 3), y = random_vector(rng, 2);
  const LatemScore s = latem_compatibility(LatemModel{{W}}, x, y);
  EXPECT_EQ(s.value, compatibility(BilinearModel{W}, x, y));
  EXPECT_EQ(s.selected, 0);
}

TEST(LatemCompatibility, MaxOverMatrices) {
  const LatemModel m{{-Matrix::Identity(1, 1), 3.0 * Matrix::Identity(1, 1)}};
  const LatemScore s = latem_compatibility(m, Vector::Ones(1), Vector::Ones(1));
  EXPECT_EQ(s.value, 3.0);
  EXPECT_EQ(s.selected, 1);
}

TEST(LatemCompatibility, SelectionMatchesEnumerationAndDominatesEachMap) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    LatemModel m;
    for (int k = 0; k < 4; ++k) m.W.push_back(random_matrix(rng, 3, 2));
    const Vector x = random_vector(rng, 3), y = random_vector(rng, 2);
    const LatemScore s = latem_compatibility(m, x, y);
    int best = 0;
    for (int k = 0; k < 4; ++k) {
      const double v = x.dot(m.W[k] * y);
      EXPECT_GE(s.value, v);
      if (v > x.dot(m.W[best] * y)) best = k;
    }
    EXPECT_EQ(s.selected, best);
  }
}

TEST(LatemLoss, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  int checked = 0;
  while (checked < 100) {
    LatemModel m;
    for (int k = 0; k < 2; ++k) m.W.push_back(random_matrix(rng, 3, 4, 0.5));
    const Vector x = random_vector(rng, 3);
    const Matrix phi = random_matrix(rng, 4, 4);
    const Index t = static_cast<Index>(rng.index(4));
    // Skip points near a hinge or latent-selection kink.
    bool kink = false;
    Vector s(4);
    for (Index c = 0; c < 4; ++c) {
      const Vector y = phi.row(c).transpose();
      const double a = x.dot(m.W[0] * y), b = x.dot(m.W[1] * y);
      kink |= std::abs(a - b) < 1e-3;
      s[c] = std::max(a, b);
    }
    for (Index c = 0; c < 4; ++c) kink |= c != t && std::abs(1.0 + s[c] - s[t]) < 1e-3;
    if (kink || latem_loss(m, x, phi, t) == 0.0) continue;

    const auto g = latem_loss_gradient(m, x, phi, t);
    for (int k = 0; k < 2; ++k) {
      const Matrix fd = test::finite_difference(
          [&](const Matrix& Wk) {
            LatemModel p = m;
            p.W[static_cast<std::size_t>(k)] = Wk;
            return latem_loss(p, x, phi, t);
          },
          m.W[static_cast<std::size_t>(k)]);
      EXPECT_LT(test::relative_error(g[static_cast<std::size_t>(k)], fd), 1e-4);
    }
    ++checked;
  }
}

TrainingSet synthetic_train(DatasetBundle* out = nullptr) {
  const DatasetBundle b = make_synthetic(SyntheticConfig{}).bundle;
  if (out) *out = b;
  return make_training_set(b, b.split.seen_classes());
}

TEST(TrainLatem, SingleMatrixReducesToDevise) {
  const TrainingSet data = synthetic_train();
  SgdConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 9;
  const LatemModel l = train_latem(data, cfg, 1);
  ASSERT_EQ(l.K(), 1);
  EXPECT_TRUE(same_matrix(l.W[0], train_sgd(RankingLoss::devise, data, cfg).W));
}

TEST(TrainLatem, Deterministic) {
  const TrainingSet data = synthetic_train();
  SgdConfig cfg;
  cfg.epochs = 3;
  const LatemModel a = train_latem(data, cfg, 3), b = train_latem(data, cfg, 3);
  for (int k = 0; k < 3; ++k) EXPECT_TRUE(same_matrix(a.W[k], b.W[k]));
  EXPECT_THROW(train_latem(data, cfg, 0), ConfigError);
}

// Each class shows up in two visual modes, x = +-M phi(y) + noise; one
// bilinear map cannot serve both signs.
TEST(TrainLatem, TwoMatricesHandleBimodalData) {
  Rng rng(4);
  const Index a = 6, d = 8, C = 12, per = 40;
  Matrix phi = random_matrix(rng, C, a);
  for (Index c = 0; c < C; ++c) phi.row(c).normalize();
  const Matrix M = random_matrix(rng, d, a);
  DatasetBundle b;
  b.class_embeddings = phi;
  b.features.resize(C * per, d);
  for (Index c = 0; c < C; ++c) {
    for (Index k = 0; k < per; ++k) {
      const double sign = k % 2 ? 1.0 : -1.0;
      b.features.row(c * per + k) = (sign * M * phi.row(c).transpose() + random_vector(rng, d, 0.05)).transpose();
      b.labels.push_back(static_cast<ClassId>(c));
    }
  }
  b.split.train_classes = {0, 1, 2, 3, 4, 5, 6, 7, 8};
  b.split.test_unseen_classes = {9, 10, 11};
  const TrainingSet data = make_training_set(b, b.split.train_classes);
  SgdConfig cfg;
  cfg.epochs = 30;
  const double k1 = evaluate_zsl(LatemMethod(train_latem(data, cfg, 1)), b, b.split.test_unseen_classes).acc_unseen;
  const double k2 = evaluate_zsl(LatemMethod(train_latem(data, cfg, 2)), b, b.split.test_unseen_classes).acc_unseen;
  EXPECT_GE(k2, k1);
  EXPECT_GT(k2, 0.9);
}

TEST(CmtMap, Examples) {
  Rng rng(5);
  CmtModel zero{random_matrix(rng, 3, 4), Matrix::Zero(4, 5)};
  EXPECT_TRUE(cmt_map(zero, random_vector(rng, 5)).isZero(0.0));
  const CmtModel id{Matrix::Identity(1, 1), Matrix::Identity(1, 1)};
  EXPECT_NEAR(cmt_map(id, Vector::Constant(1, 0.5))[0], 0.4621, 5e-5);
  EXPECT_THROW(cmt_map(id, Vector::Ones(2)), DataError);
}

TEST(CmtMap, OutputBoundedByRowSums) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const CmtModel m{random_matrix(rng, 3, 4), random_matrix(rng, 4, 5, 10.0)};
    const Vector out = cmt_map(m, random_vector(rng, 5, 10.0));
    for (Index j = 0; j < 3; ++j) EXPECT_LE(std::abs(out[j]), m.W1.row(j).cwiseAbs().sum());
  }
}

TEST(CmtMap, JacobianMatchesFiniteDifferences) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const CmtModel m{random_matrix(rng, 3, 4), random_matrix(rng, 4, 5, 0.5)};
    const Vector x = random_vector(rng, 5);
    const Vector pre = m.W2 * x;
    const Matrix J = m.W1 * (1.0 - pre.array().tanh().square()).matrix().asDiagonal() * m.W2;
    Matrix fd(3, 5);
    for (Index j = 0; j < 5; ++j) {
      Vector up = x, down = x;
      up[j] += 1e-5;
      down[j] -= 1e-5;
      fd.col(j) = (cmt_map(m, up) - cmt_map(m, down)) / 2e-5;
    }
    EXPECT_LT(test::relative_error(J, fd), 1e-4);
  }
}

TEST(CmtGradient, MatchesFiniteDifferences) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const CmtModel m{random_matrix(rng, 3, 4), random_matrix(rng, 4, 5, 0.5)};
    const Vector x = random_vector(rng, 5), target = random_vector(rng, 3);
    const CmtGradient g = cmt_sample_gradient(m, x, target);
    EXPECT_NEAR(g.loss, (target - cmt_map(m, x)).squaredNorm(), 1e-12);
    const Matrix fd1 = test::finite_difference(
        [&](const Matrix& W1) { return (target - cmt_map(CmtModel{W1, m.W2}, x)).squaredNorm(); }, m.W1);
    const Matrix fd2 = test::finite_difference(
        [&](const Matrix& W2) { return (target - cmt_map(CmtModel{m.W1, W2}, x)).squaredNorm(); }, m.W2);
    EXPECT_LT(test::relative_error(g.dW1, fd1), 1e-4);
    EXPECT_LT(test::relative_error(g.dW2, fd2), 1e-4);
  }
}

TEST(TrainCmt, ZeroLossFixedPoint) {
  Rng rng(9);
  const CmtModel init{random_matrix(rng, 2, 3), random_matrix(rng, 3, 4)};
  TrainingSet data;
  data.features = random_matrix(rng, 2, 4);
  Matrix emb(2, 2);
  for (Index i = 0; i < 2; ++i) emb.row(i) = cmt_map(init, data.features.row(i).transpose()).transpose();
  data.classes = CandidateView({0, 1}, emb);
  data.targets = {0, 1};
  SgdConfig cfg;
  cfg.epochs = 10;
  const CmtModel out = train_cmt(data, cfg, init);
  EXPECT_TRUE(same_matrix(out.W1, init.W1));
  EXPECT_TRUE(same_matrix(out.W2, init.W2));
}

TEST(TrainCmt, SyntheticUnseenAccuracy) {
  DatasetBundle b;
  const TrainingSet data = synthetic_train(&b);
  const CmtMethod m(train_cmt(data, SgdConfig{}, 32));
  EXPECT_GE(evaluate_zsl(m, b, b.split.test_unseen_classes).acc_unseen, 0.9);
}

TEST(QuantileOf, LinearInterpolation) {
  EXPECT_EQ(quantile_of({3, 1, 2}, 0.5), 2.0);
  EXPECT_EQ(quantile_of({1, 2, 3, 4}, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile_of({1, 2}, 0.25), 1.25);
  EXPECT_THROW(quantile_of({}, 0.5), DataError);
}

// Identity map on a 2-d embedding space, so distances are easy to place.
struct NoveltyFixture {
  CmtModel model{Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  TrainingSet data;
  NoveltyFixture() {
    data.classes = CandidateView({0, 1}, (Matrix(2, 2) << 0, 0, 0.5, 0).finished());
    data.features.resize(8, 2);
    // class 0 images at atanh of small offsets along y
    for (int i = 0; i < 4; ++i) {
      data.features.row(i) << 0.0, std::atanh(0.01 * (i + 1));
      data.targets.push_back(0);
    }
    for (int i = 0; i < 4; ++i) {
      data.features.row(4 + i) << std::atanh(0.5), std::atanh(0.01 * (i + 1));
      data.targets.push_back(1);
    }
  }
};

TEST(FitNovelty, FullQuantileFlagsNoTrainingImage) {
  NoveltyFixture f;
  const NoveltyDetector det = fit_novelty(f.model, f.data, 1.0);
  for (Index i = 0; i < f.data.size(); ++i) {
    EXPECT_FALSE(is_novel(det, cmt_map(f.model, f.data.features.row(i).transpose())));
  }
}

TEST(FitNovelty, MedianFlagsHalf) {
  NoveltyFixture f;
  const NoveltyDetector det = fit_novelty(f.model, f.data, 0.5);
  int flagged = 0;
  for (Index i = 0; i < f.data.size(); ++i) flagged += is_novel(det, cmt_map(f.model, f.data.features.row(i).transpose()));
  EXPECT_EQ(flagged, 4);
}

TEST(FitNovelty, FarPointIsNovelAndEmptyClassIsAnError) {
  NoveltyFixture f;
  const NoveltyDetector det = fit_novelty(f.model, f.data, 0.95);
  EXPECT_TRUE(is_novel(det, (Vector(2) << 0.25, 0.9).finished()));
  f.data.targets.assign(8, 0);
  EXPECT_THROW(fit_novelty(f.model, f.data, 0.95), DataError);
  EXPECT_THROW(fit_novelty(f.model, f.data, 0.0), ConfigError);
}

TEST(CmtStarPredict, Routing) {
  NoveltyFixture f;
  const NoveltyDetector det = fit_novelty(f.model, f.data, 0.95);
  const CandidateView seen = f.data.classes;
  const CandidateView unseen({7, 8}, (Matrix(2, 2) << 0, 0.9, 0.9, 0.9).finished());
  // Mapped exactly onto seen class 1's embedding.
  EXPECT_EQ(cmt_star_predict(f.model, det, (Vector(2) << std::atanh(0.5), 0.0).finished(), seen, unseen), 1);
  // Mapped far from both seen embeddings: goes to the unseen side.
  const ClassId far = cmt_star_predict(f.model, det, (Vector(2) << 0.0, std::atanh(0.8)).finished(), seen, unseen);
  EXPECT_TRUE(unseen.contains(far));
  EXPECT_EQ(far, 7);
}

TEST(CmtStarMethod, ScorerAgreesWithRoutingOnSyntheticData) {
  DatasetBundle b;
  const TrainingSet data = synthetic_train(&b);
  CmtModel model = train_cmt(data, SgdConfig{}, 16);
  NoveltyDetector det = fit_novelty(model, data, 0.95);
  const CmtStarMethod m(model, det);
  const CandidateView all = restrict_candidates(b, b.split.all_classes());
  const CandidateView seen = restrict_candidates(b, b.split.seen_classes());
  const CandidateView unseen = restrict_candidates(b, b.split.test_unseen_classes);
  const auto scorer = m.bind(all);
  for (Index i = 0; i < b.num_images(); i += 3) {
    const Vector x = b.features.row(i).transpose();
    const ClassId p = scorer->predict(x);
    EXPECT_EQ(p, cmt_star_predict(model, det, x, seen, unseen));
    EXPECT_EQ(p, argmax_class(scorer->scores(x), all));
    EXPECT_EQ(seen.contains(p), !is_novel(det, cmt_map(model, x)));
  }
}

}  // namespace
}  // namespace zsl
