#include "zsl/nonlinear_compat.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

#include "zsl/rng.hpp"

namespace zsl {

namespace {

/// Per-class latent-max scores and the selected matrix of each class.
struct LatemScores {
  Vector value;
  std::vector<int> selected;
};

LatemScores latem_scores(const LatemModel& model, const Vector& x, const Matrix& S) {
  LatemScores out;
  out.value = S * (model.W[0].transpose() * x);
  out.selected.assign(static_cast<std::size_t>(S.rows()), 0);
  for (int k = 1; k < model.K(); ++k) {
    const Vector s = S * (model.W[static_cast<std::size_t>(k)].transpose() * x);
    for (Index c = 0; c < s.size(); ++c) {
      if (s[c] > out.value[c]) {
        out.value[c] = s[c];
        out.selected[static_cast<std::size_t>(c)] = k;
      }
    }
  }
  return out;
}

void check_latem(const LatemModel& model, Index d, Index a) {
  if (model.W.empty()) throw DataError("latem: model has no matrices");
  for (const Matrix& W : model.W) {
    if (W.rows() != d || W.cols() != a) throw DataError("latem: shape mismatch");
  }
}

double distance(const Vector& a, const Vector& b) { return (a - b).norm(); }

Index nearest(const Vector& mapped, const CandidateView& view) {
  Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index c = 0; c < view.size(); ++c) {
    const double d = (view.embeddings().row(c).transpose() - mapped).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace

LatemScore latem_compatibility(const LatemModel& model, const Vector& x, const Vector& y) {
  check_latem(model, x.size(), y.size());
  LatemScore out{x.dot(model.W[0] * y), 0};
  for (int k = 1; k < model.K(); ++k) {
    const double s = x.dot(model.W[static_cast<std::size_t>(k)] * y);
    if (s > out.value) out = {s, k};
  }
  return out;
}

double latem_loss(const LatemModel& model, const Vector& x, const Matrix& class_embeddings, Index truth,
                  double margin) {
  check_latem(model, x.size(), class_embeddings.cols());
  return ranking_loss(RankingLoss::devise, latem_scores(model, x, class_embeddings).value, truth, margin).value;
}

std::vector<Matrix> latem_loss_gradient(const LatemModel& model, const Vector& x, const Matrix& class_embeddings,
                                        Index truth, double margin) {
  check_latem(model, x.size(), class_embeddings.cols());
  const LatemScores scores = latem_scores(model, x, class_embeddings);
  const ScoreLoss loss = ranking_loss(RankingLoss::devise, scores.value, truth, margin);
  std::vector<Matrix> grads;
  for (int k = 0; k < model.K(); ++k) {
    Vector g = Vector::Zero(loss.score_gradient.size());
    for (Index c = 0; c < g.size(); ++c) {
      if (scores.selected[static_cast<std::size_t>(c)] == k) g[c] = loss.score_gradient[c];
    }
    grads.push_back(x * (class_embeddings.transpose() * g).transpose());
  }
  return grads;
}

LatemModel train_latem(const TrainingSet& data, const SgdConfig& config, int K) {
  if (K < 1) throw ConfigError("latem: K must be >= 1");
  if (!(config.learning_rate > 0.0)) throw ConfigError("latem: learning_rate must be positive");
  if (config.epochs < 0) throw ConfigError("latem: epochs must be nonnegative");
  if (data.size() == 0) throw DataError("latem: empty training set");

  const Matrix& S = data.classes.embeddings();
  LatemModel model;
  model.W.assign(static_cast<std::size_t>(K), Matrix::Zero(data.features.cols(), S.cols()));
  std::vector<Index> order(static_cast<std::size_t>(data.size()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Same shuffle stream as train_sgd, so K = 1 reproduces DEVISE exactly.
    Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    for (Index i : order) {
      const Vector x = data.features.row(i).transpose();
      const LatemScores scores = latem_scores(model, x, S);
      const ScoreLoss loss =
          ranking_loss(RankingLoss::devise, scores.value, data.targets[static_cast<std::size_t>(i)], config.margin);
      if (!scores.value.allFinite() || !std::isfinite(loss.value)) {
        throw TrainingError("latem: diverged (non-finite scores) in epoch " + std::to_string(epoch) +
                            " with learning rate " + std::to_string(config.learning_rate));
      }
      if (loss.value <= 0.0) continue;
      if (K == 1) {
        model.W[0].noalias() -= config.learning_rate * x * (S.transpose() * loss.score_gradient).transpose();
        continue;
      }
      for (int k = 0; k < K; ++k) {
        Vector g = Vector::Zero(loss.score_gradient.size());
        bool any = false;
        for (Index c = 0; c < g.size(); ++c) {
          if (scores.selected[static_cast<std::size_t>(c)] == k && loss.score_gradient[c] != 0.0) {
            g[c] = loss.score_gradient[c];
            any = true;
          }
        }
        if (any) model.W[static_cast<std::size_t>(k)].noalias() -= config.learning_rate * x * (S.transpose() * g).transpose();
      }
    }
    for (const Matrix& W : model.W) {
      if (!W.allFinite()) {
        throw TrainingError("latem: diverged (non-finite weights) in epoch " + std::to_string(epoch) +
                            " with learning rate " + std::to_string(config.learning_rate));
      }
    }
  }
  return model;
}

std::unique_ptr<CandidateScorer> LatemMethod::bind(const CandidateView& candidates) const {
  check_latem(model_, model_.W[0].rows(), candidates.embeddings().cols());
  std::vector<Matrix> projected;
  for (const Matrix& W : model_.W) projected.push_back(W * candidates.embeddings().transpose());
  return make_scorer(candidates, [projected = std::move(projected)](const Vector& x) -> Vector {
    Vector best = projected[0].transpose() * x;
    for (std::size_t k = 1; k < projected.size(); ++k) best = best.cwiseMax(projected[k].transpose() * x);
    return best;
  });
}

Vector cmt_map(const CmtModel& model, const Vector& x) {
  if (model.W2.cols() != x.size() || model.W1.cols() != model.W2.rows()) {
    throw DataError("cmt: shape mismatch (W1 " + std::to_string(model.W1.rows()) + "x" +
                    std::to_string(model.W1.cols()) + ", W2 " + std::to_string(model.W2.rows()) + "x" +
                    std::to_string(model.W2.cols()) + ", x " + std::to_string(x.size()) + ")");
  }
  return model.W1 * (model.W2 * x).array().tanh().matrix();
}

CmtModel cmt_init(Index feature_dim, Index embedding_dim, Index hidden, std::uint64_t seed) {
  if (hidden < 1) throw ConfigError("cmt: hidden width must be >= 1");
  Rng rng(mix_seed(seed, 0xC317));
  CmtModel model{Matrix(embedding_dim, hidden), Matrix(hidden, feature_dim)};
  const double s2 = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  const double s1 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (Index j = 0; j < model.W2.cols(); ++j)
    for (Index i = 0; i < model.W2.rows(); ++i) model.W2(i, j) = s2 * rng.normal();
  for (Index j = 0; j < model.W1.cols(); ++j)
    for (Index i = 0; i < model.W1.rows(); ++i) model.W1(i, j) = s1 * rng.normal();
  return model;
}

CmtGradient cmt_sample_gradient(const CmtModel& model, const Vector& x, const Vector& target) {
  const Vector hidden = (model.W2 * x).array().tanh().matrix();
  const Vector residual = model.W1 * hidden - target;
  CmtGradient g;
  g.loss = residual.squaredNorm();
  g.dW1 = 2.0 * residual * hidden.transpose();
  const Vector back = (2.0 * (model.W1.transpose() * residual)).array() * (1.0 - hidden.array().square());
  g.dW2 = back * x.transpose();
  return g;
}

CmtModel train_cmt(const TrainingSet& data, const SgdConfig& config, Index hidden) {
  return train_cmt(data, config, cmt_init(data.features.cols(), data.classes.embeddings().cols(), hidden, config.seed));
}

CmtModel train_cmt(const TrainingSet& data, const SgdConfig& config, CmtModel model) {
  if (!(config.learning_rate > 0.0)) throw ConfigError("cmt: learning_rate must be positive");
  if (config.epochs < 0) throw ConfigError("cmt: epochs must be nonnegative");
  if (data.size() == 0) throw DataError("cmt: empty training set");
  if (model.W2.cols() != data.features.cols() || model.W1.rows() != data.classes.embeddings().cols()) {
    throw DataError("cmt: initial weights do not match the training data");
  }

  std::vector<Index> order(static_cast<std::size_t>(data.size()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    for (Index i : order) {
      const Vector x = data.features.row(i).transpose();
      const Vector target = data.classes.embedding(data.targets[static_cast<std::size_t>(i)]);
      const CmtGradient g = cmt_sample_gradient(model, x, target);
      if (g.loss == 0.0) continue;
      model.W1 -= config.learning_rate * g.dW1;
      model.W2 -= config.learning_rate * g.dW2;
    }
    if (!model.W1.allFinite() || !model.W2.allFinite()) {
      throw TrainingError("cmt: diverged (non-finite weights) in epoch " + std::to_string(epoch) +
                          " with learning rate " + std::to_string(config.learning_rate));
    }
  }
  return model;
}

double quantile_of(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

NoveltyDetector fit_novelty(const CmtModel& model, const TrainingSet& data, double quantile) {
  if (!(quantile > 0.0 && quantile <= 1.0)) throw ConfigError("novelty quantile must be in (0, 1]");
  std::vector<std::vector<double>> distances(static_cast<std::size_t>(data.classes.size()));
  for (Index i = 0; i < data.size(); ++i) {
    const Index c = data.targets[static_cast<std::size_t>(i)];
    distances[static_cast<std::size_t>(c)].push_back(
        distance(cmt_map(model, data.features.row(i).transpose()), data.classes.embedding(c)));
  }
  NoveltyDetector detector{data.classes, Vector(data.classes.size())};
  for (Index c = 0; c < data.classes.size(); ++c) {
    auto& dist = distances[static_cast<std::size_t>(c)];
    if (dist.empty()) {
      throw DataError("novelty: seen class " + std::to_string(data.classes.id(c)) + " has no training images");
    }
    detector.thresholds[c] = quantile_of(std::move(dist), quantile);
  }
  return detector;
}

bool is_novel(const NoveltyDetector& detector, const Vector& mapped) {
  const Index c = nearest(mapped, detector.seen);
  return distance(mapped, detector.seen.embedding(c)) > detector.thresholds[c];
}

ClassId cmt_star_predict(const CmtModel& model, const NoveltyDetector& detector, const Vector& x,
                         const CandidateView& seen, const CandidateView& unseen) {
  if (seen.empty() && unseen.empty()) throw DataError("cmt_star: empty candidate set");
  const Vector mapped = cmt_map(model, x);
  const bool novel = is_novel(detector, mapped);
  const bool use_unseen = seen.empty() || (novel && !unseen.empty());
  const CandidateView& side = use_unseen ? unseen : seen;
  const ClassId predicted = side.id(nearest(mapped, side));
  assert(use_unseen ? unseen.contains(predicted) : seen.contains(predicted));
  assert(!(novel && !unseen.empty()) || unseen.contains(predicted));
  return predicted;
}

std::unique_ptr<CandidateScorer> CmtMethod::bind(const CandidateView& candidates) const {
  if (candidates.embeddings().cols() != model_.W1.rows()) throw DataError("cmt: embedding dimension mismatch");
  return make_scorer(candidates, [this, table = candidates.embeddings()](const Vector& x) -> Vector {
    const Vector mapped = cmt_map(model_, x);
    return -(table.rowwise() - mapped.transpose()).rowwise().squaredNorm();
  });
}

namespace {

class CmtStarScorer final : public CandidateScorer {
 public:
  CmtStarScorer(const CmtModel& model, const NoveltyDetector& detector, const CandidateView& candidates)
      : CandidateScorer(candidates), model_(model), detector_(detector) {
    ClassIds seen, unseen;
    for (ClassId id : candidates.ids()) (detector.seen.contains(id) ? seen : unseen).push_back(id);
    seen_ = candidates.restrict(seen);
    unseen_ = candidates.restrict(unseen);
  }

  Vector scores(const Vector& x) const override {
    const Vector mapped = cmt_map(model_, x);
    const bool use_unseen = seen_.empty() || (is_novel(detector_, mapped) && !unseen_.empty());
    const CandidateView& side = use_unseen ? unseen_ : seen_;
    Vector out = Vector::Constant(candidates().size(), -std::numeric_limits<double>::infinity());
    for (Index c = 0; c < candidates().size(); ++c) {
      if (side.contains(candidates().id(c))) {
        out[c] = -(candidates().embeddings().row(c).transpose() - mapped).squaredNorm();
      }
    }
    return out;
  }

  ClassId predict(const Vector& x) const override {
    const ClassId id = cmt_star_predict(model_, detector_, x, seen_, unseen_);
    assert(id == argmax_class(scores(x), candidates()));
    return id;
  }

 private:
  const CmtModel& model_;
  const NoveltyDetector& detector_;
  CandidateView seen_;
  CandidateView unseen_;
};

}  // namespace

std::unique_ptr<CandidateScorer> CmtStarMethod::bind(const CandidateView& candidates) const {
  if (candidates.embeddings().cols() != model_.W1.rows()) throw DataError("cmt_star: embedding dimension mismatch");
  return std::make_unique<CmtStarScorer>(model_, detector_, candidates);
}

}  // namespace zsl
