#include "zsl/attribute_dap.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace zsl {

BinarizedAttributes binarize_attributes(const Matrix& table) {
  if (table.rows() == 0) throw DataError("binarize: empty table");
  if (!table.allFinite()) throw DataError("binarize: non-finite attribute value");
  BinarizedAttributes out;
  out.thresholds = table.colwise().mean().transpose();
  for (Index m = 0; m < table.cols(); ++m) {
    if (table.col(m).maxCoeff() == table.col(m).minCoeff()) {
      throw DataError("binarize: attribute " + std::to_string(m) + " is constant across classes");
    }
  }
  out.bits = apply_thresholds(table, out.thresholds);
  return out;
}

BitMatrix apply_thresholds(const Matrix& table, const Vector& thresholds) {
  if (table.cols() != thresholds.size()) throw DataError("binarize: attribute count mismatch");
  BitMatrix bits(table.rows(), table.cols());
  for (Index c = 0; c < table.rows(); ++c)
    for (Index m = 0; m < table.cols(); ++m) bits(c, m) = table(c, m) >= thresholds[m] ? 1 : 0;
  return bits;
}

AttributeSignatureTable::AttributeSignatureTable(ClassIds ids, BitMatrix bits)
    : ids_(std::move(ids)), bits_(std::move(bits)) {
  if (static_cast<Index>(ids_.size()) != bits_.rows()) throw DataError("signature table: id/row count mismatch");
  if ((bits_.array() != 0 && bits_.array() != 1).any()) throw DataError("signature table: entries must be 0 or 1");
  std::map<std::vector<int>, ClassId> rows;
  for (Index c = 0; c < bits_.rows(); ++c) {
    std::vector<int> row(static_cast<std::size_t>(bits_.cols()));
    for (Index m = 0; m < bits_.cols(); ++m) row[static_cast<std::size_t>(m)] = bits_(c, m);
    auto [it, inserted] = rows.emplace(std::move(row), ids_[static_cast<std::size_t>(c)]);
    if (!inserted) {
      throw DataError("signature table: classes " + std::to_string(it->second) + " and " +
                      std::to_string(ids_[static_cast<std::size_t>(c)]) + " have identical attribute signatures");
    }
  }
}

AttributeSignatureTable signatures_for(const CandidateView& candidates, const Vector& thresholds) {
  return AttributeSignatureTable(candidates.ids(), apply_thresholds(candidates.embeddings(), thresholds));
}

Vector AttributeClassifierBank::predict(const Vector& x) const {
  Vector p(size());
  for (Index m = 0; m < size(); ++m) {
    p[m] = std::clamp(classifiers[static_cast<std::size_t>(m)].probability(x), kClamp, 1.0 - kClamp);
  }
  return p;
}

AttributeClassifierBank train_attribute_bank(const TrainingSet& data, const BitMatrix& class_bits, double reg,
                                             double prior) {
  if (!(reg > 0.0)) throw ConfigError("dap: reg must be positive");
  if (!(prior > 0.0 && prior < 1.0)) throw ConfigError("dap: attribute prior must be in (0, 1)");
  if (class_bits.rows() != data.classes.size()) throw DataError("dap: signature rows do not match classes");
  if (data.size() == 0) throw DataError("dap: empty training set");

  AttributeClassifierBank bank;
  bank.priors = Vector::Constant(class_bits.cols(), prior);
  Vector labels(data.size());
  for (Index m = 0; m < class_bits.cols(); ++m) {
    for (Index i = 0; i < data.size(); ++i) labels[i] = class_bits(data.targets[static_cast<std::size_t>(i)], m);
    const double positives = labels.sum();
    if (positives == 0.0 || positives == static_cast<double>(data.size())) {
      throw DataError("dap: attribute " + std::to_string(m) + " has a single polarity in the training data");
    }
    bank.classifiers.push_back(fit_binary_logistic(data.features, labels, reg));
  }
  return bank;
}

Vector dap_log_posterior(const AttributeClassifierBank& bank, const AttributeSignatureTable& signatures,
                         const Vector& x) {
  if (signatures.num_attributes() != bank.size()) throw DataError("dap: attribute count mismatch");
  const Vector p = bank.predict(x);
  const Vector log_p = p.array().log();
  const Vector log_q = (1.0 - p.array()).log();
  const Vector log_prior = bank.priors.array().log();
  const Vector log_not_prior = (1.0 - bank.priors.array()).log();
  const BitMatrix& bits = signatures.bits();
  Vector out = Vector::Zero(bits.rows());
  for (Index c = 0; c < bits.rows(); ++c) {
    double s = 0.0;
    for (Index m = 0; m < bits.cols(); ++m) {
      s += bits(c, m) ? log_p[m] - log_prior[m] : log_q[m] - log_not_prior[m];
    }
    out[c] = s;
  }
  return out;
}

Vector dap_posterior(const AttributeClassifierBank& bank, const AttributeSignatureTable& signatures,
                     const Vector& x) {
  return dap_log_posterior(bank, signatures, x).array().exp();
}

std::unique_ptr<CandidateScorer> DapMethod::bind(const CandidateView& candidates) const {
  return make_scorer(candidates, [this, table = signatures_for(candidates, thresholds_)](const Vector& x) {
    return dap_log_posterior(bank_, table, x);
  });
}

std::unique_ptr<DapMethod> train_dap(const TrainingSet& data, double reg, double prior) {
  const BinarizedAttributes binary = binarize_attributes(data.classes.embeddings());
  return std::make_unique<DapMethod>(train_attribute_bank(data, binary.bits, reg, prior), binary.thresholds);
}

}  // namespace zsl
