#include "zsl/method.hpp"

namespace zsl {

Index argmax_position(const Vector& scores, const CandidateView& candidates) {
  if (candidates.empty()) throw DataError("empty candidate set");
  if (scores.size() != candidates.size()) throw DataError("score vector does not match candidate set");
  // Candidate views are sorted by id, so the first maximum has the smallest id.
  Index best = 0;
  for (Index i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

ClassId argmax_class(const Vector& scores, const CandidateView& candidates) {
  return candidates.id(argmax_position(scores, candidates));
}

CandidateScorer::CandidateScorer(CandidateView candidates) : candidates_(std::move(candidates)) {
  if (candidates_.empty()) throw DataError("empty candidate set");
}

}  // namespace zsl
