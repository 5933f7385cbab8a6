#pragma once

#include "zsl/method.hpp"

namespace zsl {

/// Multinomial logistic classifier over the training classes.
struct SeenClassifier {
  CandidateView classes;  // training classes, output order
  Matrix weights;         // z x (d + 1), last column is the bias

  /// p_tr(. | x); nonnegative and sums to 1.
  Vector probabilities(const Vector& x) const;
};

/// Minimizes mean cross-entropy + (reg/2)||weights||^2 (bias included, so
/// reg -> infinity gives the uniform distribution). Deterministic.
SeenClassifier train_seen_classifier(const TrainingSet& data, double reg);

/// (1/Z) sum_{t=1..T} p(f(x,t)|x) s(f(x,t)) with f(x,t) the t-th most likely
/// training class (probability ties broken by class id).
Vector conse_embed(const SeenClassifier& classifier, const Vector& x, int T);

/// Argmax of cosine similarity between conse_embed(x) and each candidate.
ClassId conse_predict(const SeenClassifier& classifier, const Vector& x, int T, const CandidateView& candidates);

class ConseMethod final : public TrainedMethod {
 public:
  ConseMethod(SeenClassifier classifier, int T);
  std::string name() const override { return "conse"; }
  std::unique_ptr<CandidateScorer> bind(const CandidateView& candidates) const override;

 private:
  SeenClassifier classifier_;
  int T_;
};

/// Euclidean projection onto the probability simplex.
Vector project_to_simplex(const Vector& v);

struct SimplexFit {
  Vector weights;          // on the simplex
  double residual = 0.0;   // ||basis^T w - target||
  double stationarity = 0.0;  // norm of the projected-gradient step
};

/// min ||basis^T w - target||^2 over the simplex by projected gradient with a
/// fixed iteration count, starting from the uniform vector. `basis` holds one
/// row per mixture component.
SimplexFit simplex_least_squares(const Matrix& basis, const Vector& target, int iterations = 500);

/// Semantic similarity embedding, simplified: classes become simplex mixtures
/// of training-class embeddings (psi) and images become seen-class posteriors
/// (pi); the score of class u is pi(x)^T psi(phi(u)).
struct SseModel {
  SeenClassifier encoder;
  double stationarity_tolerance = 1e-3;

  Vector image_mixture(const Vector& x) const { return encoder.probabilities(x); }
  /// Throws TrainingError with the residual when the solver has not settled.
  Vector class_mixture(const Vector& class_embedding) const;
};

SseModel sse_fit(const TrainingSet& data, double reg);

class SseMethod final : public TrainedMethod {
 public:
  explicit SseMethod(SseModel model) : model_(std::move(model)) {}
  std::string name() const override { return "sse"; }
  const SseModel& model() const { return model_; }
  std::unique_ptr<CandidateScorer> bind(const CandidateView& candidates) const override;

 private:
  SseModel model_;
};

/// s_r = softmax_r(-||phi - b_r||^2 / (2 sigma^2)).
Vector sync_alignment_weights(const Vector& class_embedding, const Matrix& phantom_embeddings, double sigma);

/// Synthesized classifiers. Classifier vectors live in R^(d+1): the last
/// coordinate multiplies a constant 1 appended to x.
struct SyncModel {
  Matrix phantom_classifiers;  // R x (d + 1), rows v_r
  Matrix phantom_embeddings;   // R x a, rows b_r
  double sigma = 1.0;
  Matrix seen_classifiers;     // z x (d + 1), rows w_c
  Matrix alignment;            // z x R, rows s_c

  /// w_u = sum_r s_ur v_r.
  Vector synthesize(const Vector& class_embedding) const;
};

/// Distortion sum_c ||w_c - sum_r s_cr v_r||^2.
double sync_distortion(const Matrix& seen_classifiers, const Matrix& alignment, const Matrix& phantom_classifiers);

/// Phantom embeddings pinned to the training-class embeddings; seen
/// classifiers by one-vs-rest ridge regression on +-1 targets with weight
/// `reg`; phantom classifiers minimize the distortion (plus
/// `phantom_ridge`*||V||^2). Throws TrainingError on a singular system.
SyncModel sync_train(const TrainingSet& data, double sigma, double reg, double phantom_ridge = 0.0);

Vector sync_synthesize(const SyncModel& model, const Vector& unseen_embedding);

class SyncMethod final : public TrainedMethod {
 public:
  explicit SyncMethod(SyncModel model) : model_(std::move(model)) {}
  std::string name() const override { return "sync"; }
  const SyncModel& model() const { return model_; }
  std::unique_ptr<CandidateScorer> bind(const CandidateView& candidates) const override;

 private:
  SyncModel model_;
};

}  // namespace zsl
