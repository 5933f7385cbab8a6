#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "zsl/datamodel.hpp"

namespace zsl {

/// Lowercase, with whitespace and underscores collapsed to single spaces and
/// trimmed. "Giant_Panda " and "giant  panda" compare equal.
std::string normalize_class_name(const std::string& name);

/// One class name per line; blank lines skipped, CR stripped.
std::vector<std::string> read_class_list(const std::filesystem::path& path);

struct SplitViolation {
  enum class Kind { leakage, overlap };
  Kind kind;
  ClassId class_id;
  std::string message;
};

/// Unseen test classes whose normalized name is in `pretrain`, followed by
/// classes listed in more than one of train/val/test. `names[c]` names class
/// c. Throws DataError when `pretrain` is nonempty and a split class has no
/// name.
std::vector<SplitViolation> audit_overlap(const SplitSpec& split, const std::vector<std::string>& names,
                                          const std::vector<std::string>& pretrain);

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

/// Test classes are drawn from classes absent from `pretrain`, train and val
/// from the rest. A `holdout` fraction (rounded down) of every seen class's
/// images becomes test_seen_image_indices. Class c is names[c]; `labels`
/// gives each image's class. Throws DataError when too few clean classes
/// exist.
SplitSpec propose_split(const std::vector<ClassId>& labels, const std::vector<std::string>& names,
                        const std::vector<std::string>& pretrain, const SplitCounts& counts, std::uint64_t seed,
                        double holdout = 0.2);

/// k repartitions of train+val keeping |val| and the test side fixed. Val
/// sets are pairwise disjoint whenever k*|val| <= |train+val|; otherwise each
/// fold draws its own val set. Throws ConfigError for k < 2 or k larger than
/// the seen-class pool.
std::vector<SplitSpec> make_validation_folds(const SplitSpec& split, int k, std::uint64_t seed);

struct SyntheticConfig {
  std::size_t n_train = 20;
  std::size_t n_val = 5;
  std::size_t n_test = 5;
  Index attr_dim = 10;
  Index feat_dim = 20;
  std::size_t images_per_class = 50;
  double noise_sigma = 0.05;
  std::uint64_t seed = 7;
  double holdout = 0.2;
  double max_cosine = 0.95;

  std::size_t n_classes() const { return n_train + n_val + n_test; }
};

struct SyntheticData {
  DatasetBundle bundle;
  Matrix generator;  // M*, d x a
};

/// Unit-norm class attributes with pairwise cosine below cfg.max_cosine,
/// features M* phi(y) + N(0, noise^2). Class ids are train, then val, then
/// test. Throws ConfigError when the attributes cannot be separated.
SyntheticData make_synthetic(const SyntheticConfig& cfg);

}  // namespace zsl
