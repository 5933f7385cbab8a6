#include "zsl/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "zsl/optim.hpp"

namespace zsl {

namespace {

Matrix with_bias_column(const Matrix& X) {
  Matrix out(X.rows(), X.cols() + 1);
  out.leftCols(X.cols()) = X;
  out.col(X.cols()).setOnes();
  return out;
}

Vector with_bias(const Vector& x) {
  Vector out(x.size() + 1);
  out.head(x.size()) = x;
  out[x.size()] = 1.0;
  return out;
}

Vector softmax(const Vector& logits) {
  const Vector e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

Eigen::LDLT<Matrix> checked_ldlt(const Matrix& A, const std::string& what) {
  Eigen::LDLT<Matrix> ldlt(A);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-13 ||
      ldlt.vectorD().minCoeff() <= 1e-13 * ldlt.vectorD().cwiseAbs().maxCoeff()) {
    throw TrainingError(what + ": singular system (rcond " + std::to_string(ldlt.rcond()) + ")");
  }
  return ldlt;
}

}  // namespace

Vector SeenClassifier::probabilities(const Vector& x) const {
  if (x.size() + 1 != weights.cols()) throw DataError("seen classifier: feature dimension mismatch");
  return softmax(weights * with_bias(x));
}

SeenClassifier train_seen_classifier(const TrainingSet& data, double reg) {
  if (!(reg > 0.0)) throw ConfigError("seen classifier: reg must be positive");
  const auto counts = data.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      throw DataError("seen classifier: class " + std::to_string(data.classes.id(static_cast<Index>(c))) +
                      " has no training images");
    }
  }
  const Matrix X = with_bias_column(data.features);
  const Index n = X.rows();
  const Index z = data.classes.size();
  const Index p = X.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  auto objective = [&](const Vector& params, Vector& grad) {
    const Eigen::Map<const Matrix> W(params.data(), z, p);
    Matrix logits = X * W.transpose();  // n x z
    double loss = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double mx = logits.row(i).maxCoeff();
      logits.row(i).array() = (logits.row(i).array() - mx).exp();
      const double sum = logits.row(i).sum();
      logits.row(i) /= sum;
      loss -= std::log(std::max(logits(i, data.targets[static_cast<std::size_t>(i)]), 1e-300));
      logits(i, data.targets[static_cast<std::size_t>(i)]) -= 1.0;  // now P - Y
    }
    grad.resize(params.size());
    Eigen::Map<Matrix> G(grad.data(), z, p);
    G = inv_n * logits.transpose() * X + reg * W;
    return inv_n * loss + 0.5 * reg * W.squaredNorm();
  };

  const LbfgsResult fit = minimize_lbfgs(objective, Vector::Zero(z * p));
  SeenClassifier clf{data.classes, Eigen::Map<const Matrix>(fit.x.data(), z, p)};
  if (!clf.weights.allFinite()) throw TrainingError("seen classifier: non-finite weights");
  return clf;
}

Vector conse_embed(const SeenClassifier& classifier, const Vector& x, int T) {
  const Index z = classifier.classes.size();
  if (T < 1 || T > z) throw ConfigError("conse: T must be in [1, " + std::to_string(z) + "]");
  const Vector p = classifier.probabilities(x);
  std::vector<Index> order(static_cast<std::size_t>(z));
  std::iota(order.begin(), order.end(), Index{0});
  // Positions follow ascending class id, so a stable sort breaks ties by id.
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return p[a] > p[b]; });
  Vector embed = Vector::Zero(classifier.classes.embeddings().cols());
  double total = 0.0;
  for (int t = 0; t < T; ++t) {
    const Index c = order[static_cast<std::size_t>(t)];
    embed += p[c] * classifier.classes.embeddings().row(c).transpose();
    total += p[c];
  }
  return embed / total;
}

namespace {

Vector cosine_scores(const Vector& embed, const Matrix& unit_rows) {
  const double norm = embed.norm();
  if (norm == 0.0) throw DataError("conse: zero-norm combined embedding");
  return unit_rows * (embed / norm);
}

Matrix unit_rows(const Matrix& table) {
  Matrix out = table;
  for (Index c = 0; c < out.rows(); ++c) {
    const double n = out.row(c).norm();
    if (n == 0.0) throw DataError("conse: zero-norm class embedding in row " + std::to_string(c));
    out.row(c) /= n;
  }
  return out;
}

}  // namespace

ClassId conse_predict(const SeenClassifier& classifier, const Vector& x, int T, const CandidateView& candidates) {
  return argmax_class(cosine_scores(conse_embed(classifier, x, T), unit_rows(candidates.embeddings())), candidates);
}

ConseMethod::ConseMethod(SeenClassifier classifier, int T) : classifier_(std::move(classifier)), T_(T) {
  if (T_ < 1 || T_ > classifier_.classes.size()) {
    throw ConfigError("conse: T must be in [1, " + std::to_string(classifier_.classes.size()) + "]");
  }
}

std::unique_ptr<CandidateScorer> ConseMethod::bind(const CandidateView& candidates) const {
  return make_scorer(candidates, [this, rows = unit_rows(candidates.embeddings())](const Vector& x) {
    return cosine_scores(conse_embed(classifier_, x, T_), rows);
  });
}

Vector project_to_simplex(const Vector& v) {
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0) theta = candidate;
  }
  return (v.array() - theta).cwiseMax(0.0);
}

SimplexFit simplex_least_squares(const Matrix& basis, const Vector& target, int iterations) {
  if (basis.rows() == 0) throw DataError("simplex fit: empty basis");
  if (basis.cols() != target.size()) throw DataError("simplex fit: dimension mismatch");
  const Index z = basis.rows();
  const Matrix gram = basis * basis.transpose();
  const Vector linear = basis * target;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double lipschitz = std::max(2.0 * eig.eigenvalues().maxCoeff(), 1e-12);

  auto gradient = [&](const Vector& w) -> Vector { return 2.0 * (gram * w - linear); };

  // Accelerated projected gradient (FISTA) with a fixed step 1/L.
  Vector w = Vector::Constant(z, 1.0 / static_cast<double>(z));
  Vector y = w;
  double t = 1.0;
  for (int it = 0; it < iterations; ++it) {
    const Vector next = project_to_simplex(y - gradient(y) / lipschitz);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - w);
    w = next;
    t = t_next;
  }
  SimplexFit fit;
  fit.weights = w;
  fit.residual = (basis.transpose() * w - target).norm();
  fit.stationarity = lipschitz * (w - project_to_simplex(w - gradient(w) / lipschitz)).norm();
  return fit;
}

Vector SseModel::class_mixture(const Vector& class_embedding) const {
  const SimplexFit fit = simplex_least_squares(encoder.classes.embeddings(), class_embedding);
  if (!fit.weights.allFinite() || fit.stationarity > stationarity_tolerance) {
    throw TrainingError("sse: simplex solver did not converge (residual " + std::to_string(fit.residual) +
                        ", stationarity " + std::to_string(fit.stationarity) + ")");
  }
  return fit.weights;
}

SseModel sse_fit(const TrainingSet& data, double reg) { return SseModel{train_seen_classifier(data, reg)}; }

std::unique_ptr<CandidateScorer> SseMethod::bind(const CandidateView& candidates) const {
  Matrix mixtures(candidates.size(), model_.encoder.classes.size());
  for (Index c = 0; c < candidates.size(); ++c) {
    mixtures.row(c) = model_.class_mixture(candidates.embedding(c)).transpose();
  }
  return make_scorer(candidates, [this, mixtures = std::move(mixtures)](const Vector& x) -> Vector {
    return mixtures * model_.image_mixture(x);
  });
}

Vector sync_alignment_weights(const Vector& class_embedding, const Matrix& phantom_embeddings, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("sync: sigma must be positive");
  if (phantom_embeddings.cols() != class_embedding.size()) throw DataError("sync: embedding dimension mismatch");
  const Vector d2 = (phantom_embeddings.rowwise() - class_embedding.transpose()).rowwise().squaredNorm();
  return softmax(-d2 / (2.0 * sigma * sigma));
}

Vector SyncModel::synthesize(const Vector& class_embedding) const {
  return phantom_classifiers.transpose() * sync_alignment_weights(class_embedding, phantom_embeddings, sigma);
}

double sync_distortion(const Matrix& seen_classifiers, const Matrix& alignment, const Matrix& phantom_classifiers) {
  return (seen_classifiers - alignment * phantom_classifiers).squaredNorm();
}

SyncModel sync_train(const TrainingSet& data, double sigma, double reg, double phantom_ridge) {
  if (!(sigma > 0.0)) throw ConfigError("sync: sigma must be positive");
  if (!(reg > 0.0)) throw ConfigError("sync: reg must be positive");
  if (phantom_ridge < 0.0) throw ConfigError("sync: phantom_ridge must be >= 0");
  if (data.size() == 0) throw DataError("sync: empty training set");

  SyncModel model;
  model.sigma = sigma;
  model.phantom_embeddings = data.classes.embeddings();
  const Index z = data.classes.size();
  const Index R = model.phantom_embeddings.rows();

  // One-vs-rest ridge regression on +-1 targets.
  const Matrix X = with_bias_column(data.features);
  Matrix Y = Matrix::Constant(X.rows(), z, -1.0);
  for (Index i = 0; i < X.rows(); ++i) Y(i, data.targets[static_cast<std::size_t>(i)]) = 1.0;
  const Matrix gram = X.transpose() * X + reg * Matrix::Identity(X.cols(), X.cols());
  model.seen_classifiers = checked_ldlt(gram, "sync seen classifiers").solve(X.transpose() * Y).transpose();

  model.alignment.resize(z, R);
  for (Index c = 0; c < z; ++c) {
    model.alignment.row(c) =
        sync_alignment_weights(data.classes.embedding(c), model.phantom_embeddings, sigma).transpose();
  }
  const Matrix normal = model.alignment.transpose() * model.alignment + phantom_ridge * Matrix::Identity(R, R);
  model.phantom_classifiers =
      checked_ldlt(normal, "sync phantom classifiers").solve(model.alignment.transpose() * model.seen_classifiers);
  if (!model.phantom_classifiers.allFinite()) throw TrainingError("sync: non-finite phantom classifiers");
  return model;
}

Vector sync_synthesize(const SyncModel& model, const Vector& unseen_embedding) {
  return model.synthesize(unseen_embedding);
}

std::unique_ptr<CandidateScorer> SyncMethod::bind(const CandidateView& candidates) const {
  Matrix classifiers(candidates.size(), model_.phantom_classifiers.cols());
  for (Index c = 0; c < candidates.size(); ++c) {
    classifiers.row(c) = model_.synthesize(candidates.embedding(c)).transpose();
  }
  return make_scorer(candidates, [classifiers = std::move(classifiers)](const Vector& x) -> Vector {
    if (x.size() + 1 != classifiers.cols()) throw DataError("sync: feature dimension mismatch");
    return classifiers * with_bias(x);
  });
}

}  // namespace zsl
