#include "zsl/linear_compat.hpp"

#include <cmath>

#include "zsl/rng.hpp"

namespace zsl {

std::string to_string(RankingLoss loss) {
  switch (loss) {
    case RankingLoss::devise: return "devise";
    case RankingLoss::ale: return "ale";
    case RankingLoss::sje: return "sje";
  }
  return "unknown";
}

double compatibility(const BilinearModel& model, const Vector& x, const Vector& y) {
  if (x.size() != model.W.rows() || y.size() != model.W.cols()) {
    throw DataError("compatibility: dimension mismatch (x " + std::to_string(x.size()) + ", W " +
                    std::to_string(model.W.rows()) + "x" + std::to_string(model.W.cols()) + ", y " +
                    std::to_string(y.size()) + ")");
  }
  return x.dot(model.W * y);
}

double ale_rank_weight(int k) {
  double sum = 0.0;
  for (int i = 1; i <= k; ++i) sum += 1.0 / i;
  return sum;
}

ScoreLoss ranking_loss(RankingLoss kind, const Vector& scores, Index truth, double margin) {
  const Index z = scores.size();
  ScoreLoss out;
  out.score_gradient = Vector::Zero(z);
  const double s_true = scores[truth];

  switch (kind) {
    case RankingLoss::devise: {
      for (Index y = 0; y < z; ++y) {
        if (y == truth) continue;
        const double h = margin + scores[y] - s_true;
        if (h > 0.0) {
          out.value += h;
          out.score_gradient[y] += 1.0;
          out.score_gradient[truth] -= 1.0;
        }
      }
      break;
    }
    case RankingLoss::ale: {
      // r counts wrong classes whose margin-augmented score reaches the true score.
      int rank = 0;
      for (Index y = 0; y < z; ++y) {
        if (y != truth && scores[y] + margin >= s_true) ++rank;
      }
      if (rank == 0) break;
      const double weight = ale_rank_weight(rank) / rank;
      for (Index y = 0; y < z; ++y) {
        if (y == truth) continue;
        const double h = margin + scores[y] - s_true;
        if (h > 0.0) {
          out.value += weight * h;
          out.score_gradient[y] += weight;
          out.score_gradient[truth] -= weight;
        }
      }
      break;
    }
    case RankingLoss::sje: {
      // The max includes the true class at zero cost, so the loss is >= 0.
      Index best = truth;
      double best_value = s_true;
      for (Index y = 0; y < z; ++y) {
        if (y == truth) continue;
        const double v = margin + scores[y];
        if (v > best_value) {
          best_value = v;
          best = y;
        }
      }
      out.value = best_value - s_true;
      if (best != truth) {
        out.score_gradient[best] += 1.0;
        out.score_gradient[truth] -= 1.0;
      }
      break;
    }
  }
  return out;
}

namespace {

Vector bilinear_scores(const BilinearModel& model, const Vector& x, const Matrix& class_embeddings) {
  if (x.size() != model.W.rows() || class_embeddings.cols() != model.W.cols()) {
    throw DataError("bilinear scores: dimension mismatch");
  }
  return class_embeddings * (model.W.transpose() * x);
}

}  // namespace

double devise_loss(const BilinearModel& model, const Vector& x, const Matrix& class_embeddings, Index truth,
                   double margin) {
  return ranking_loss(RankingLoss::devise, bilinear_scores(model, x, class_embeddings), truth, margin).value;
}

double ale_loss(const BilinearModel& model, const Vector& x, const Matrix& class_embeddings, Index truth,
                double margin) {
  return ranking_loss(RankingLoss::ale, bilinear_scores(model, x, class_embeddings), truth, margin).value;
}

double sje_loss(const BilinearModel& model, const Vector& x, const Matrix& class_embeddings, Index truth,
                double margin) {
  return ranking_loss(RankingLoss::sje, bilinear_scores(model, x, class_embeddings), truth, margin).value;
}

Matrix bilinear_loss_gradient(RankingLoss kind, const BilinearModel& model, const Vector& x,
                              const Matrix& class_embeddings, Index truth, double margin) {
  const ScoreLoss loss = ranking_loss(kind, bilinear_scores(model, x, class_embeddings), truth, margin);
  // dF(x, y)/dW = x phi(y)^T
  return x * (class_embeddings.transpose() * loss.score_gradient).transpose();
}

BilinearModel train_sgd(RankingLoss kind, const TrainingSet& data, const SgdConfig& config) {
  if (!(config.learning_rate > 0.0)) throw ConfigError("train_sgd: learning_rate must be positive");
  if (config.epochs < 0) throw ConfigError("train_sgd: epochs must be nonnegative");
  if (data.size() == 0) throw DataError("train_sgd: empty training set");

  const Matrix& S = data.classes.embeddings();
  BilinearModel model{Matrix::Zero(data.features.cols(), S.cols())};
  std::vector<Index> order(static_cast<std::size_t>(data.size()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    for (Index i : order) {
      const Vector x = data.features.row(i).transpose();
      const Vector scores = S * (model.W.transpose() * x);
      const ScoreLoss loss = ranking_loss(kind, scores, data.targets[static_cast<std::size_t>(i)], config.margin);
      if (!scores.allFinite() || !std::isfinite(loss.value)) {
        throw TrainingError(to_string(kind) + ": scores diverged (non-finite) in epoch " + std::to_string(epoch) +
                            " with learning rate " + std::to_string(config.learning_rate));
      }
      if (loss.value <= 0.0) continue;
      model.W.noalias() -= config.learning_rate * x * (S.transpose() * loss.score_gradient).transpose();
    }
    if (!model.W.allFinite()) {
      throw TrainingError(to_string(kind) + ": W diverged (non-finite) in epoch " + std::to_string(epoch) +
                          " with learning rate " + std::to_string(config.learning_rate));
    }
  }
  return model;
}

namespace {

Eigen::LDLT<Matrix> checked_ldlt(const Matrix& A, const char* what) {
  Eigen::LDLT<Matrix> ldlt(A);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-13 ||
      ldlt.vectorD().minCoeff() <= 1e-13 * ldlt.vectorD().cwiseAbs().maxCoeff()) {
    throw TrainingError(std::string("eszsl: singular system in ") + what +
                        " (increase gamma/lambda or check for rank-deficient data)");
  }
  return ldlt;
}

}  // namespace

Matrix eszsl_solve(const Matrix& X, const Matrix& S, const Matrix& Y, const EszslConfig& config) {
  if (config.gamma < 0.0 || config.lambda < 0.0) throw ConfigError("eszsl: gamma and lambda must be >= 0");
  if (X.rows() != Y.rows() || S.rows() != Y.cols()) throw DataError("eszsl: dimension mismatch");
  const Index d = X.cols();
  const Index a = S.cols();
  // (X^T X + gamma I) W (S^T S + lambda I) = X^T Y S
  const Matrix left = X.transpose() * X + config.gamma * Matrix::Identity(d, d);
  const Matrix right = S.transpose() * S + config.lambda * Matrix::Identity(a, a);
  const Matrix rhs = X.transpose() * Y * S;
  const Matrix partial = checked_ldlt(left, "feature Gram matrix").solve(rhs);
  // right is symmetric: W = partial * right^{-1} = (right^{-1} partial^T)^T
  Matrix W = checked_ldlt(right, "embedding Gram matrix").solve(partial.transpose()).transpose();
  if (!W.allFinite()) throw TrainingError("eszsl: non-finite solution");
  return W;
}

double eszsl_objective(const Matrix& X, const Matrix& S, const Matrix& Y, const Matrix& W,
                       const EszslConfig& config) {
  const Matrix WS = W * S.transpose();
  return (X * WS - Y).squaredNorm() + config.gamma * WS.squaredNorm() + config.lambda * (X * W).squaredNorm() +
         config.beta() * W.squaredNorm();
}

Matrix one_hot_targets(const TrainingSet& data) {
  Matrix Y = Matrix::Zero(data.size(), data.classes.size());
  for (Index i = 0; i < data.size(); ++i) Y(i, data.targets[static_cast<std::size_t>(i)]) = 1.0;
  return Y;
}

BilinearModel train_eszsl(const TrainingSet& data, const EszslConfig& config) {
  if (data.size() == 0) throw DataError("eszsl: empty training set");
  return BilinearModel{eszsl_solve(data.features, data.classes.embeddings(), one_hot_targets(data), config)};
}

std::unique_ptr<CandidateScorer> BilinearMethod::bind(const CandidateView& candidates) const {
  if (candidates.embeddings().cols() != model_.W.cols()) throw DataError(name_ + ": embedding dimension mismatch");
  // Project class embeddings once: scores = x^T (W S^T).
  Matrix projected = model_.W * candidates.embeddings().transpose();
  return make_scorer(candidates, [projected = std::move(projected)](const Vector& x) -> Vector {
    return projected.transpose() * x;
  });
}

}  // namespace zsl
