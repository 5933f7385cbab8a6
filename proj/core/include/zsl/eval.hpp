#pragma once

#include <map>
#include <optional>

#include "zsl/method.hpp"

namespace zsl {

/// Accuracies of one evaluation, as fractions in [0, 1].
struct EvalReport {
  double acc_unseen = 0.0;                // ts
  std::optional<double> acc_seen;         // tr, GZSL only
  std::optional<double> harmonic_mean;    // H, GZSL only
  std::map<ClassId, double> per_class;    // every evaluated class
};

/// Mean over `classes` of the within-class hit rate.
/// Throws DataError on length mismatch, a truth outside `classes`, or a class
/// without instances.
double per_class_top1(const std::vector<ClassId>& predictions, const std::vector<ClassId>& truths,
                      const ClassIds& classes, std::map<ClassId, double>* breakdown = nullptr);

/// 2 tr ts / (tr + ts), and 0 when both are 0.
double harmonic_mean(double acc_tr, double acc_ts);

/// Predictions for the given image rows against one candidate set.
std::vector<ClassId> predict_images(const TrainedMethod& method, const DatasetBundle& bundle,
                                    const std::vector<std::size_t>& images, const CandidateView& candidates);

/// Images labelled with a class in `classes`, excluding held-out seen-test
/// images.
std::vector<std::size_t> images_of(const DatasetBundle& bundle, const ClassIds& classes);

/// Candidates restricted to `target_classes`; all their non-held-out images.
EvalReport evaluate_zsl(const TrainedMethod& method, const DatasetBundle& bundle, const ClassIds& target_classes);

/// Candidates are seen and unseen classes together. ts over the unseen test
/// images, tr over the held-out seen-test images.
EvalReport evaluate_gzsl(const TrainedMethod& method, const DatasetBundle& bundle);

}  // namespace zsl
