#pragma once

#include <memory>
#include <string>

#include "zsl/datamodel.hpp"

namespace zsl {

/// Index of the best class; exact ties go to the smallest class id.
/// Throws DataError on an empty candidate set.
Index argmax_position(const Vector& scores, const CandidateView& candidates);
ClassId argmax_class(const Vector& scores, const CandidateView& candidates);

/// A trained method bound to one candidate set.
///
/// Binding lets a method precompute per-class quantities (synthesized
/// classifiers, signature tables, mixture weights) once per evaluation.
class CandidateScorer {
 public:
  explicit CandidateScorer(CandidateView candidates);
  virtual ~CandidateScorer() = default;

  const CandidateView& candidates() const { return candidates_; }

  /// One score per candidate, in candidate order. Higher is better.
  virtual Vector scores(const Vector& x) const = 0;

  virtual ClassId predict(const Vector& x) const { return argmax_class(scores(x), candidates_); }

 private:
  CandidateView candidates_;
};

/// Uniform scoring contract shared by every zero-shot method.
class TrainedMethod {
 public:
  virtual ~TrainedMethod() = default;

  virtual std::string name() const = 0;

  virtual std::unique_ptr<CandidateScorer> bind(const CandidateView& candidates) const = 0;

  Vector scores(const Vector& x, const CandidateView& candidates) const { return bind(candidates)->scores(x); }
  ClassId predict(const Vector& x, const CandidateView& candidates) const { return bind(candidates)->predict(x); }
};

/// Scorer from a callable mapping x to per-candidate scores.
template <class Fn>
class LambdaScorer final : public CandidateScorer {
 public:
  LambdaScorer(CandidateView candidates, Fn fn) : CandidateScorer(std::move(candidates)), fn_(std::move(fn)) {}
  Vector scores(const Vector& x) const override { return fn_(x); }

 private:
  Fn fn_;
};

template <class Fn>
std::unique_ptr<CandidateScorer> make_scorer(CandidateView candidates, Fn fn) {
  return std::make_unique<LambdaScorer<Fn>>(std::move(candidates), std::move(fn));
}

}  // namespace zsl
