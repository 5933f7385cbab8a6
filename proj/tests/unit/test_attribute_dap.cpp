#include <gtest/gtest.h>

#include "test_util.hpp"
#include "zsl/attribute_dap.hpp"
#include "zsl/eval.hpp"
#include "zsl/splitgen.hpp"

namespace zsl {
namespace {

using test::random_matrix;
using test::random_vector;

TEST(BinarizeAttributes, Examples) {
  const Matrix two = (Matrix(2, 1) << 0.2, 0.8).finished();
  const BinarizedAttributes b = binarize_attributes(two);
  EXPECT_EQ(b.bits(0, 0), 0);
  EXPECT_EQ(b.bits(1, 0), 1);
  EXPECT_DOUBLE_EQ(b.thresholds[0], 0.5);

  const Matrix binary = (Matrix(4, 2) << 1, 0, 0, 1, 1, 1, 0, 0).finished();
  EXPECT_TRUE(binarize_attributes(binary).bits == binary.cast<int>());

  EXPECT_THROW(binarize_attributes(Matrix::Constant(3, 1, 0.7)), DataError);
}

TEST(SignatureTable, RejectsDuplicatesAndNonBinary) {
  BitMatrix bits(2, 2);
  bits << 1, 0, 1, 0;
  EXPECT_THROW(AttributeSignatureTable({0, 1}, bits), DataError);
  bits << 1, 2, 0, 0;
  EXPECT_THROW(AttributeSignatureTable({0, 1}, bits), DataError);
  bits << 1, 0, 0, 1;
  EXPECT_NO_THROW(AttributeSignatureTable({0, 1}, bits));
}

// Bank with fixed outputs: zero weights and bias logit(p).
AttributeClassifierBank constant_bank(const std::vector<double>& p, Index d = 1) {
  AttributeClassifierBank bank;
  for (double v : p) bank.classifiers.push_back({Vector::Zero(d), std::log(v / (1.0 - v))});
  bank.priors = Vector::Constant(static_cast<Index>(p.size()), 0.5);
  return bank;
}

TEST(DapPosterior, SingleAttributeExample) {
  const auto bank = constant_bank({0.8});
  BitMatrix bits(2, 1);
  bits << 1, 0;
  const AttributeSignatureTable sig({0, 1}, bits);
  const Vector post = dap_posterior(bank, sig, Vector::Zero(1));
  EXPECT_NEAR(post[0], 1.6, 1e-12);
  EXPECT_NEAR(post[1], 0.4, 1e-12);
}

TEST(DapPosterior, LogSpaceMatchesDirectProduct) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    AttributeClassifierBank bank;
    for (int m = 0; m < 2; ++m) bank.classifiers.push_back({random_vector(rng, 3), rng.normal()});
    bank.priors = (Vector(2) << 0.2 + 0.6 * rng.uniform(), 0.2 + 0.6 * rng.uniform()).finished();
    BitMatrix bits(3, 2);
    bits << 0, 1, 1, 0, 1, 1;
    const AttributeSignatureTable sig({0, 1, 2}, bits);
    const Vector x = random_vector(rng, 3);
    const Vector p = bank.predict(x);
    const Vector got = dap_posterior(bank, sig, x);
    for (Index c = 0; c < 3; ++c) {
      double direct = 1.0;
      for (Index m = 0; m < 2; ++m) {
        const double pr = bank.priors[m];
        direct *= bits(c, m) ? p[m] / pr : (1.0 - p[m]) / (1.0 - pr);
      }
      EXPECT_NEAR(got[c], direct, 1e-12 * std::max(1.0, direct));
    }
  }
}

TEST(DapPosterior, PositiveFiniteUnderClamping) {
  const auto bank = constant_bank({1.0 - 1e-17, 1e-300, 0.5});
  BitMatrix bits(2, 3);
  bits << 1, 1, 1, 0, 0, 0;
  const Vector post = dap_posterior(bank, AttributeSignatureTable({0, 1}, bits), Vector::Zero(1));
  EXPECT_TRUE(post.allFinite());
  EXPECT_GT(post.minCoeff(), 0.0);
}

TEST(DapPosterior, SharedBitsDoNotChangeArgmax) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    AttributeClassifierBank bank;
    for (int m = 0; m < 4; ++m) bank.classifiers.push_back({random_vector(rng, 2), rng.normal()});
    bank.priors = Vector::Constant(4, 0.5);
    BitMatrix bits(3, 4);
    bits << 1, 0, 1, 1, 0, 1, 1, 0, 1, 1, 1, 1;  // attribute 2 equal across candidates
    const AttributeSignatureTable full({0, 1, 2}, bits);
    AttributeClassifierBank reduced = bank;
    reduced.classifiers.erase(reduced.classifiers.begin() + 2);
    reduced.priors = Vector::Constant(3, 0.5);
    BitMatrix rbits(3, 3);
    rbits << bits.col(0), bits.col(1), bits.col(3);
    const AttributeSignatureTable small({0, 1, 2}, rbits);
    const Vector x = random_vector(rng, 2);
    const CandidateView view({0, 1, 2}, Matrix::Identity(3, 3));
    EXPECT_EQ(argmax_class(dap_log_posterior(bank, full, x), view),
              argmax_class(dap_log_posterior(reduced, small, x), view));
  }
}

TEST(DapPosterior, MatchingSignatureWins) {
  // Calibrated predictions equal to class 1's signature.
  AttributeClassifierBank bank = constant_bank({0.9, 0.1, 0.9});
  BitMatrix bits(3, 3);
  bits << 0, 0, 1, 1, 0, 1, 1, 1, 1;
  const AttributeSignatureTable sig({0, 1, 2}, bits);
  const CandidateView view({0, 1, 2}, Matrix::Identity(3, 3));
  EXPECT_EQ(argmax_class(dap_log_posterior(bank, sig, Vector::Zero(1)), view), 1);
}

// Attribute m is on iff feature m is positive, and classes sit at +-1 corners.
TrainingSet aligned_data(Rng& rng, Matrix* class_bits_out) {
  const Index M = 3;
  Matrix corners(4, M);
  corners << 1, 1, -1, 1, -1, 1, -1, 1, 1, -1, -1, -1;
  TrainingSet data;
  data.classes = CandidateView({0, 1, 2, 3}, corners);
  data.features.resize(4 * 30, M);
  for (Index c = 0; c < 4; ++c) {
    for (Index k = 0; k < 30; ++k) {
      data.features.row(c * 30 + k) = (corners.row(c).transpose() + random_vector(rng, M, 0.3)).transpose();
      data.targets.push_back(c);
    }
  }
  *class_bits_out = corners;
  return data;
}

TEST(TrainAttributeBank, AlignedAttributeIsConfident) {
  Rng rng(6);
  Matrix corners;
  const TrainingSet data = aligned_data(rng, &corners);
  const BinarizedAttributes bin = binarize_attributes(corners);
  const AttributeClassifierBank bank = train_attribute_bank(data, bin.bits, 1e-3);
  // held-out positives for attribute 0
  for (int k = 0; k < 20; ++k) {
    Vector x = random_vector(rng, 3, 0.3);
    x[0] += 1.0;
    EXPECT_GT(bank.classifiers[0].probability(x), 0.9);
  }
}

TEST(TrainAttributeBank, HeavyRegularizationGivesConstantOutput) {
  Rng rng(7);
  Matrix corners;
  const TrainingSet data = aligned_data(rng, &corners);
  const BinarizedAttributes bin = binarize_attributes(corners);
  const AttributeClassifierBank bank = train_attribute_bank(data, bin.bits, 1e6);
  for (const auto& clf : bank.classifiers) {
    EXPECT_LT(clf.weights.norm(), 1e-4);
    EXPECT_NEAR(clf.probability(random_vector(rng, 3, 5.0)), sigmoid(clf.bias), 1e-3);
  }
}

TEST(TrainAttributeBank, DeterministicAndPolarityChecked) {
  Rng rng(8);
  Matrix corners;
  const TrainingSet data = aligned_data(rng, &corners);
  const BinarizedAttributes bin = binarize_attributes(corners);
  const auto a = train_attribute_bank(data, bin.bits, 1e-2), b = train_attribute_bank(data, bin.bits, 1e-2);
  for (std::size_t m = 0; m < a.classifiers.size(); ++m) {
    EXPECT_TRUE(same_matrix(a.classifiers[m].weights, b.classifiers[m].weights));
    EXPECT_EQ(a.classifiers[m].bias, b.classifiers[m].bias);
  }
  BitMatrix one_sided = bin.bits;
  one_sided.col(1).setOnes();
  EXPECT_THROW(train_attribute_bank(data, one_sided, 1e-2), DataError);
}

TEST(TrainDap, SyntheticUnseenAccuracy) {
  const DatasetBundle b = make_synthetic(SyntheticConfig{}).bundle;
  const auto dap = train_dap(make_training_set(b, b.split.seen_classes()), 1e-3);
  EXPECT_GE(evaluate_zsl(*dap, b, b.split.test_unseen_classes).acc_unseen, 0.6);
}

}  // namespace
}  // namespace zsl
