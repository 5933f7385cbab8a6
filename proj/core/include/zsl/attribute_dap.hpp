#pragma once

#include "zsl/method.hpp"
#include "zsl/optim.hpp"

namespace zsl {

using BitMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

/// Continuous attributes turned into bits by per-column mean thresholds.
struct BinarizedAttributes {
  Vector thresholds;  // one per attribute
  BitMatrix bits;     // rows aligned with the input table
};

/// bit = 1 iff value >= mean of its column over the table's rows.
/// Throws DataError on a constant column.
BinarizedAttributes binarize_attributes(const Matrix& table);

/// Applies previously learned thresholds to another table.
BitMatrix apply_thresholds(const Matrix& table, const Vector& thresholds);

/// Binary class signatures for one candidate set. Identical rows make the
/// posterior ambiguous and are rejected at construction.
class AttributeSignatureTable {
 public:
  AttributeSignatureTable(ClassIds ids, BitMatrix bits);

  const ClassIds& ids() const { return ids_; }
  const BitMatrix& bits() const { return bits_; }
  Index num_attributes() const { return bits_.cols(); }

 private:
  ClassIds ids_;
  BitMatrix bits_;
};

/// Builds the signature table of a candidate view with the given thresholds.
AttributeSignatureTable signatures_for(const CandidateView& candidates, const Vector& thresholds);

struct AttributeClassifierBank {
  static constexpr double kClamp = 1e-6;

  std::vector<BinaryLogistic> classifiers;  // one per attribute
  Vector priors;                            // p(a_m = 1), in (0, 1)

  Index size() const { return static_cast<Index>(classifiers.size()); }
  /// p(a_m = 1 | x) for every attribute, clamped to [kClamp, 1 - kClamp].
  Vector predict(const Vector& x) const;
};

/// One regularized logistic classifier per attribute, trained on images
/// labelled with their class's bit. `class_bits` rows align with data.classes.
/// Throws DataError when an attribute has a single polarity in the data.
AttributeClassifierBank train_attribute_bank(const TrainingSet& data, const BitMatrix& class_bits, double reg,
                                             double prior = 0.5);

/// log of prod_m p_m(x)^a (1-p_m(x))^(1-a) / (prior^a (1-prior)^(1-a)) per class.
Vector dap_log_posterior(const AttributeClassifierBank& bank, const AttributeSignatureTable& signatures,
                         const Vector& x);

/// exp of dap_log_posterior.
Vector dap_posterior(const AttributeClassifierBank& bank, const AttributeSignatureTable& signatures,
                     const Vector& x);

class DapMethod final : public TrainedMethod {
 public:
  DapMethod(AttributeClassifierBank bank, Vector thresholds)
      : bank_(std::move(bank)), thresholds_(std::move(thresholds)) {}
  std::string name() const override { return "dap"; }
  const AttributeClassifierBank& bank() const { return bank_; }
  std::unique_ptr<CandidateScorer> bind(const CandidateView& candidates) const override;

 private:
  AttributeClassifierBank bank_;
  Vector thresholds_;
};

/// Binarizes over the training classes, trains the bank and wraps it.
std::unique_ptr<DapMethod> train_dap(const TrainingSet& data, double reg, double prior = 0.5);

}  // namespace zsl
