#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "zsl/types.hpp"

namespace zsl {

/// Class partition of one dataset.
///
/// Train, val and unseen-test classes are pairwise disjoint. The seen-test
/// image indices hold back images of train/val classes for generalized
/// zero-shot evaluation; they are never used for training.
struct SplitSpec {
  std::string name;
  ClassIds train_classes;
  ClassIds val_classes;
  ClassIds test_unseen_classes;
  std::vector<std::size_t> test_seen_image_indices;

  /// Sorted union of train and val classes.
  ClassIds seen_classes() const;
  /// Sorted union of seen and unseen test classes.
  ClassIds all_classes() const;

  friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

/// Features, labels, class embeddings and split of one benchmark dataset.
///
/// Row i of `features` is the image embedding of image i, labelled
/// `labels[i]`. Row c of `class_embeddings` is the embedding of class c.
struct DatasetBundle {
  Matrix features;                       // N x d
  std::vector<ClassId> labels;           // N
  Matrix class_embeddings;               // C x a
  SplitSpec split;
  std::vector<std::string> class_names;  // empty, or exactly C entries

  Index num_images() const { return features.rows(); }
  Index feature_dim() const { return features.cols(); }
  Index num_classes() const { return class_embeddings.rows(); }
  Index embedding_dim() const { return class_embeddings.cols(); }

  friend bool operator==(const DatasetBundle& a, const DatasetBundle& b);
};

/// Checks every bundle invariant; throws DataError naming the violation.
void validate(const DatasetBundle& bundle);

/// Validates a split against a label vector and class count.
void validate_split(const SplitSpec& split, const std::vector<ClassId>& labels, Index num_classes);

/// Reads features.csv, labels.csv, class_embeddings.csv, splits.json and the
/// optional class_names.txt from `dir`.
DatasetBundle load_dataset(const std::filesystem::path& dir);

/// Reads one splits.json without validating it against a dataset.
SplitSpec load_split(const std::filesystem::path& path);

/// Writes the canonical textual rendering of `bundle` into `dir`.
void save_dataset(const DatasetBundle& bundle, const std::filesystem::path& dir);

/// Shortest round-trip decimal rendering of a double ('.' radix).
std::string format_real(double value);

enum class Normalization { none, l2_rows };

Normalization parse_normalization(const std::string& text);

Matrix normalize_features(const Matrix& features, Normalization mode);

/// A subset of class-embedding rows keyed by class id, sorted by id.
class CandidateView {
 public:
  CandidateView() = default;
  /// `ids` must be unique; rows are reordered into ascending id order.
  CandidateView(ClassIds ids, Matrix embeddings);

  const ClassIds& ids() const { return ids_; }
  const Matrix& embeddings() const { return embeddings_; }
  Index size() const { return static_cast<Index>(ids_.size()); }
  bool empty() const { return ids_.empty(); }
  ClassId id(Index pos) const { return ids_[static_cast<std::size_t>(pos)]; }
  Vector embedding(Index pos) const { return embeddings_.row(pos).transpose(); }
  std::optional<Index> position_of(ClassId id) const;
  bool contains(ClassId id) const { return position_of(id).has_value(); }

  /// Sub-view over `class_set`; every id must already be in this view.
  CandidateView restrict(const ClassIds& class_set) const;

  friend bool operator==(const CandidateView& a, const CandidateView& b);

 private:
  ClassIds ids_;
  Matrix embeddings_;
};

CandidateView restrict_candidates(const DatasetBundle& bundle, const ClassIds& class_set);

/// Images and class table handed to a trainer.
///
/// `targets[i]` is the position of image i's class within `classes`.
struct TrainingSet {
  Matrix features;
  std::vector<Index> targets;
  CandidateView classes;

  Index size() const { return features.rows(); }
  /// Number of images of each class, aligned with `classes`.
  std::vector<std::size_t> class_counts() const;
};

/// Images whose label is in `classes`, excluding the held-out seen-test
/// images of the split.
std::vector<std::size_t> training_images(const DatasetBundle& bundle, const ClassIds& classes);

TrainingSet make_training_set(const DatasetBundle& bundle, const ClassIds& classes);

/// Rows of `features` at `rows`.
Matrix gather_rows(const Matrix& features, const std::vector<std::size_t>& rows);

/// Exact equality; false (not an assertion) on shape mismatch.
bool same_matrix(const Matrix& a, const Matrix& b);

/// Sorted, deduplicated copy.
ClassIds sorted_unique(ClassIds ids);

}  // namespace zsl
