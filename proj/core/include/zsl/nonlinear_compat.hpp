#pragma once

#include <vector>

#include "zsl/linear_compat.hpp"

namespace zsl {

/// Piecewise-linear compatibility: max over K bilinear maps.
struct LatemModel {
  std::vector<Matrix> W;  // K matrices, each d x a

  int K() const { return static_cast<int>(W.size()); }
};

struct LatemScore {
  double value = 0.0;
  int selected = 0;  // index of the maximizing matrix, smallest on ties
};

LatemScore latem_compatibility(const LatemModel& model, const Vector& x, const Vector& y);

/// Ranking (DEVISE) loss of one sample under the latent-max compatibility.
double latem_loss(const LatemModel& model, const Vector& x, const Matrix& class_embeddings, Index truth,
                  double margin = 1.0);

/// Subgradient with respect to each W_i; only selected matrices receive mass.
std::vector<Matrix> latem_loss_gradient(const LatemModel& model, const Vector& x, const Matrix& class_embeddings,
                                        Index truth, double margin = 1.0);

/// SGD on the ranking loss from all-zero matrices. With K = 1 this performs
/// exactly the DEVISE updates of train_sgd.
LatemModel train_latem(const TrainingSet& data, const SgdConfig& config, int K);

class LatemMethod final : public TrainedMethod {
 public:
  explicit LatemMethod(LatemModel model) : model_(std::move(model)) {}
  std::string name() const override { return "latem"; }
  const LatemModel& model() const { return model_; }
  std::unique_ptr<CandidateScorer> bind(const CandidateView& candidates) const override;

 private:
  LatemModel model_;
};

/// Two-layer map from image features into the class-embedding space:
/// W1 * tanh(W2 * x), W1 is a x h and W2 is h x d.
struct CmtModel {
  Matrix W1;
  Matrix W2;

  Index hidden() const { return W2.rows(); }
};

Vector cmt_map(const CmtModel& model, const Vector& x);

/// Seeded Gaussian initialization scaled by 1/sqrt(fan_in).
CmtModel cmt_init(Index feature_dim, Index embedding_dim, Index hidden, std::uint64_t seed);

struct CmtGradient {
  double loss = 0.0;  // ||target - map(x)||^2
  Matrix dW1;
  Matrix dW2;
};

CmtGradient cmt_sample_gradient(const CmtModel& model, const Vector& x, const Vector& target);

/// Squared-error SGD from cmt_init(seed).
CmtModel train_cmt(const TrainingSet& data, const SgdConfig& config, Index hidden);
/// Squared-error SGD from the given weights.
CmtModel train_cmt(const TrainingSet& data, const SgdConfig& config, CmtModel initial);

/// Per-seen-class distance thresholds in the embedding space.
struct NoveltyDetector {
  CandidateView seen;  // seen classes and their embeddings
  Vector thresholds;   // aligned with `seen`
};

/// Threshold of each class = `quantile` (linear interpolation) of the
/// distances between its mapped training images and its embedding.
NoveltyDetector fit_novelty(const CmtModel& model, const TrainingSet& data, double quantile);

/// Linear-interpolation quantile of `values` (sorted copy), q in [0, 1].
double quantile_of(std::vector<double> values, double q);

/// Novel when the nearest seen class is farther than its threshold.
bool is_novel(const NoveltyDetector& detector, const Vector& mapped);

/// Routes to the unseen candidates when novel, otherwise to the seen ones,
/// and predicts the nearest class embedding there. An empty side is skipped.
ClassId cmt_star_predict(const CmtModel& model, const NoveltyDetector& detector, const Vector& x,
                         const CandidateView& seen, const CandidateView& unseen);

/// Scores are negative squared distances to the mapped point.
class CmtMethod : public TrainedMethod {
 public:
  explicit CmtMethod(CmtModel model) : model_(std::move(model)) {}
  std::string name() const override { return "cmt"; }
  const CmtModel& model() const { return model_; }
  std::unique_ptr<CandidateScorer> bind(const CandidateView& candidates) const override;

 protected:
  CmtModel model_;
};

/// CMT with novelty routing. Candidates the detector knows as seen form the
/// seen side; all others the unseen side. Candidates on the side not chosen
/// score -infinity, so argmax over scores equals cmt_star_predict.
class CmtStarMethod final : public CmtMethod {
 public:
  CmtStarMethod(CmtModel model, NoveltyDetector detector)
      : CmtMethod(std::move(model)), detector_(std::move(detector)) {}
  std::string name() const override { return "cmt_star"; }
  const NoveltyDetector& detector() const { return detector_; }
  std::unique_ptr<CandidateScorer> bind(const CandidateView& candidates) const override;

 private:
  NoveltyDetector detector_;
};

}  // namespace zsl
