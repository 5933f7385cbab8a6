#pragma once

#include <cstdint>
#include <string>

#include "zsl/method.hpp"

namespace zsl {

/// Bilinear compatibility F(x, y) = x^T W phi(y), W is d x a.
struct BilinearModel {
  Matrix W;
};

enum class RankingLoss { devise, ale, sje };

std::string to_string(RankingLoss loss);

struct SgdConfig {
  double learning_rate = 0.01;
  int epochs = 50;
  std::uint64_t seed = 0;
  /// Margin cost for a wrong class; the true class always costs 0.
  double margin = 1.0;
};

/// ESZSL regularizer weights. The weight on ||W||^2 is tied to gamma*lambda,
/// which makes the regularized square loss separable into two ridge solves.
struct EszslConfig {
  double gamma = 1.0;
  double lambda = 1.0;

  double beta() const { return gamma * lambda; }
};

/// x^T W y. Throws DataError on dimension mismatch.
double compatibility(const BilinearModel& model, const Vector& x, const Vector& y);

/// Loss of one sample and its gradient with respect to the class scores.
struct ScoreLoss {
  double value = 0.0;
  Vector score_gradient;
};

/// l_k = sum_{i=1..k} 1/i, with l_0 = 0.
double ale_rank_weight(int k);

/// Ranking losses over a score vector (one entry per training class) with
/// the true class at position `truth`.
ScoreLoss ranking_loss(RankingLoss kind, const Vector& scores, Index truth, double margin = 1.0);

/// Per-sample losses of a bilinear model; `class_embeddings` holds one row
/// per training class and `truth` is the row of the sample's class.
double devise_loss(const BilinearModel& model, const Vector& x, const Matrix& class_embeddings, Index truth,
                   double margin = 1.0);
double ale_loss(const BilinearModel& model, const Vector& x, const Matrix& class_embeddings, Index truth,
                double margin = 1.0);
double sje_loss(const BilinearModel& model, const Vector& x, const Matrix& class_embeddings, Index truth,
                double margin = 1.0);

/// Subgradient of the per-sample loss with respect to W.
Matrix bilinear_loss_gradient(RankingLoss kind, const BilinearModel& model, const Vector& x,
                              const Matrix& class_embeddings, Index truth, double margin = 1.0);

/// Per-sample SGD from W = 0 over shuffled training images.
/// Throws TrainingError if W becomes non-finite.
BilinearModel train_sgd(RankingLoss kind, const TrainingSet& data, const SgdConfig& config);

/// Closed-form minimizer of ||X W S^T - Y||^2 + gamma ||W S^T||^2
/// + lambda ||X W||^2 + gamma*lambda ||W||^2, where X is N x d, S is z x a and
/// Y is N x z. Throws TrainingError if the system is singular.
Matrix eszsl_solve(const Matrix& X, const Matrix& S, const Matrix& Y, const EszslConfig& config);

double eszsl_objective(const Matrix& X, const Matrix& S, const Matrix& Y, const Matrix& W,
                       const EszslConfig& config);

/// One-hot targets for `data` (N x z).
Matrix one_hot_targets(const TrainingSet& data);

BilinearModel train_eszsl(const TrainingSet& data, const EszslConfig& config);

/// TrainedMethod adapter: scores are x^T W phi(c).
class BilinearMethod final : public TrainedMethod {
 public:
  BilinearMethod(std::string name, BilinearModel model) : name_(std::move(name)), model_(std::move(model)) {}

  std::string name() const override { return name_; }
  const BilinearModel& model() const { return model_; }
  std::unique_ptr<CandidateScorer> bind(const CandidateView& candidates) const override;

 private:
  std::string name_;
  BilinearModel model_;
};

}  // namespace zsl
