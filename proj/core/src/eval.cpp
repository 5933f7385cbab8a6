#include "zsl/eval.hpp"

#include <algorithm>

namespace zsl {

double per_class_top1(const std::vector<ClassId>& predictions, const std::vector<ClassId>& truths,
                      const ClassIds& classes, std::map<ClassId, double>* breakdown) {
  if (predictions.size() != truths.size()) throw DataError("per-class top-1: prediction/truth length mismatch");
  if (classes.empty()) throw DataError("per-class top-1: empty class set");
  std::map<ClassId, std::pair<std::size_t, std::size_t>> tally;  // hits, total
  for (ClassId c : classes) tally[c] = {0, 0};
  for (std::size_t i = 0; i < truths.size(); ++i) {
    auto it = tally.find(truths[i]);
    if (it == tally.end()) throw DataError("per-class top-1: truth " + std::to_string(truths[i]) + " not in class set");
    ++it->second.second;
    if (predictions[i] == truths[i]) ++it->second.first;
  }
  double sum = 0.0;
  for (const auto& [c, counts] : tally) {
    if (counts.second == 0) throw DataError("per-class top-1: class " + std::to_string(c) + " has no instances");
    const double acc = static_cast<double>(counts.first) / static_cast<double>(counts.second);
    if (breakdown) (*breakdown)[c] = acc;
    sum += acc;
  }
  return sum / static_cast<double>(tally.size());
}

double harmonic_mean(double acc_tr, double acc_ts) {
  if (acc_tr + acc_ts == 0.0) return 0.0;
  return 2.0 * acc_tr * acc_ts / (acc_tr + acc_ts);
}

std::vector<ClassId> predict_images(const TrainedMethod& method, const DatasetBundle& bundle,
                                    const std::vector<std::size_t>& images, const CandidateView& candidates) {
  const auto scorer = method.bind(candidates);
  std::vector<ClassId> out;
  out.reserve(images.size());
  for (std::size_t i : images) out.push_back(scorer->predict(bundle.features.row(static_cast<Index>(i)).transpose()));
  return out;
}

std::vector<std::size_t> images_of(const DatasetBundle& bundle, const ClassIds& classes) {
  return training_images(bundle, classes);
}

namespace {

std::vector<ClassId> labels_at(const DatasetBundle& bundle, const std::vector<std::size_t>& images) {
  std::vector<ClassId> out;
  out.reserve(images.size());
  for (std::size_t i : images) out.push_back(bundle.labels[i]);
  return out;
}

}  // namespace

EvalReport evaluate_zsl(const TrainedMethod& method, const DatasetBundle& bundle, const ClassIds& target_classes) {
  if (target_classes.empty()) throw DataError("evaluate_zsl: empty target class set");
  const ClassIds targets = sorted_unique(target_classes);
  const CandidateView candidates = restrict_candidates(bundle, targets);
  const auto images = images_of(bundle, targets);
  EvalReport report;
  report.acc_unseen =
      per_class_top1(predict_images(method, bundle, images, candidates), labels_at(bundle, images), targets,
                     &report.per_class);
  return report;
}

EvalReport evaluate_gzsl(const TrainedMethod& method, const DatasetBundle& bundle) {
  const SplitSpec& split = bundle.split;
  if (split.test_seen_image_indices.empty()) throw DataError("evaluate_gzsl: split has no seen-class test images");
  if (split.test_unseen_classes.empty()) throw DataError("evaluate_gzsl: split has no unseen test classes");
  const CandidateView candidates = restrict_candidates(bundle, split.all_classes());
  const auto scorer = method.bind(candidates);
  auto run = [&](const std::vector<std::size_t>& images) {
    std::vector<ClassId> preds;
    preds.reserve(images.size());
    for (std::size_t i : images) preds.push_back(scorer->predict(bundle.features.row(static_cast<Index>(i)).transpose()));
    return preds;
  };

  const ClassIds unseen = sorted_unique(split.test_unseen_classes);
  const auto unseen_images = images_of(bundle, unseen);
  std::vector<std::size_t> seen_images = split.test_seen_image_indices;
  std::sort(seen_images.begin(), seen_images.end());
  ClassIds seen_present;
  for (std::size_t i : seen_images) seen_present.push_back(bundle.labels[i]);
  seen_present = sorted_unique(std::move(seen_present));

  EvalReport report;
  report.acc_unseen =
      per_class_top1(run(unseen_images), labels_at(bundle, unseen_images), unseen, &report.per_class);
  report.acc_seen = per_class_top1(run(seen_images), labels_at(bundle, seen_images), seen_present, &report.per_class);
  report.harmonic_mean = harmonic_mean(*report.acc_seen, report.acc_unseen);
  return report;
}

}  // namespace zsl
