#include "zsl/splitgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "zsl/rng.hpp"

namespace zsl {

std::string normalize_class_name(const std::string& name) {
  std::string out;
  bool pending_space = false;
  for (unsigned char ch : name) {
    if (std::isspace(ch) || ch == '_') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(ch)));
  }
  return out;
}

std::vector<std::string> read_class_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing file: " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (normalize_class_name(line).empty()) continue;
    out.push_back(line);
  }
  return out;
}

namespace {

ClassIds intersection(ClassIds a, ClassIds b) {
  a = sorted_unique(std::move(a));
  b = sorted_unique(std::move(b));
  ClassIds out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

std::vector<SplitViolation> audit_overlap(const SplitSpec& split, const std::vector<std::string>& names,
                                          const std::vector<std::string>& pretrain) {
  std::vector<SplitViolation> out;
  if (!pretrain.empty()) {
    std::set<std::string> pre;
    for (const auto& n : pretrain) pre.insert(normalize_class_name(n));
    for (ClassId c : split.all_classes()) {
      if (c < 0 || static_cast<std::size_t>(c) >= names.size() || normalize_class_name(names[c]).empty()) {
        throw DataError("audit: class " + std::to_string(c) + " has no name");
      }
    }
    for (ClassId c : sorted_unique(split.test_unseen_classes)) {
      if (pre.count(normalize_class_name(names[c]))) {
        out.push_back({SplitViolation::Kind::leakage, c,
                       "test class " + std::to_string(c) + " (" + names[c] + ") appears in the pretraining list"});
      }
    }
  }
  const std::pair<const char*, const ClassIds*> sets[] = {
      {"train", &split.train_classes}, {"val", &split.val_classes}, {"test", &split.test_unseen_classes}};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = i + 1; j < 3; ++j) {
      for (ClassId c : intersection(*sets[i].second, *sets[j].second)) {
        out.push_back({SplitViolation::Kind::overlap, c,
                       "class " + std::to_string(c) + " is in both " + sets[i].first + " and " + sets[j].first});
      }
    }
  }
  return out;
}

namespace {

std::vector<std::size_t> holdout_images(const std::vector<ClassId>& labels, const ClassIds& seen, double fraction,
                                        std::uint64_t seed) {
  std::vector<std::size_t> out;
  for (ClassId c : seen) {
    std::vector<std::size_t> images;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) images.push_back(i);
    Rng rng(mix_seed(seed, 0x4000 + static_cast<std::uint64_t>(c)));
    rng.shuffle(images);
    const auto take = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(images.size())));
    out.insert(out.end(), images.begin(), images.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

SplitSpec propose_split(const std::vector<ClassId>& labels, const std::vector<std::string>& names,
                        const std::vector<std::string>& pretrain, const SplitCounts& counts, std::uint64_t seed,
                        double holdout) {
  if (!(holdout >= 0.0 && holdout < 1.0)) throw ConfigError("propose_split: holdout must be in [0, 1)");
  if (counts.train == 0 || counts.test == 0) throw ConfigError("propose_split: train and test counts must be positive");
  const std::size_t C = names.size();
  if (counts.train + counts.val + counts.test > C) {
    throw ConfigError("propose_split: class counts exceed the " + std::to_string(C) + " available classes");
  }
  std::set<std::string> pre;
  for (const auto& n : pretrain) pre.insert(normalize_class_name(n));

  ClassIds clean, tainted;
  for (std::size_t c = 0; c < C; ++c) {
    (pre.count(normalize_class_name(names[c])) ? tainted : clean).push_back(static_cast<ClassId>(c));
  }
  if (clean.size() < counts.test) {
    throw DataError("propose_split: insufficient clean classes (" + std::to_string(clean.size()) + " outside the " +
                    "pretraining list, " + std::to_string(counts.test) + " needed for test)");
  }
  Rng rng(mix_seed(seed, 1));
  rng.shuffle(clean);
  SplitSpec split;
  split.name = "PS";
  split.test_unseen_classes.assign(clean.begin(), clean.begin() + static_cast<std::ptrdiff_t>(counts.test));

  ClassIds rest = tainted;
  rest.insert(rest.end(), clean.begin() + static_cast<std::ptrdiff_t>(counts.test), clean.end());
  std::sort(rest.begin(), rest.end());
  Rng rest_rng(mix_seed(seed, 2));
  rest_rng.shuffle(rest);
  split.train_classes.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(counts.train));
  split.val_classes.assign(rest.begin() + static_cast<std::ptrdiff_t>(counts.train),
                           rest.begin() + static_cast<std::ptrdiff_t>(counts.train + counts.val));
  split.train_classes = sorted_unique(split.train_classes);
  split.val_classes = sorted_unique(split.val_classes);
  split.test_unseen_classes = sorted_unique(split.test_unseen_classes);
  split.test_seen_image_indices = holdout_images(labels, split.seen_classes(), holdout, mix_seed(seed, 3));
  return split;
}

std::vector<SplitSpec> make_validation_folds(const SplitSpec& split, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("validation folds: k must be at least 2");
  ClassIds pool = split.seen_classes();
  const std::size_t n_val = split.val_classes.size();
  if (n_val == 0 || n_val >= pool.size()) throw ConfigError("validation folds: need both train and val classes");
  if (static_cast<std::size_t>(k) > pool.size()) {
    throw ConfigError("validation folds: k=" + std::to_string(k) + " exceeds the " + std::to_string(pool.size()) +
                      " train+val classes");
  }
  const bool disjoint = static_cast<std::size_t>(k) * n_val <= pool.size();
  ClassIds shuffled = pool;
  Rng(mix_seed(seed, 0x5000)).shuffle(shuffled);

  std::vector<SplitSpec> folds;
  for (int f = 0; f < k; ++f) {
    ClassIds order = shuffled;
    std::size_t start = static_cast<std::size_t>(f) * n_val;
    if (!disjoint) {
      order = pool;
      Rng(mix_seed(seed, 0x5001 + static_cast<std::uint64_t>(f))).shuffle(order);
      start = 0;
    }
    SplitSpec fold = split;
    fold.name = split.name + "/fold" + std::to_string(f);
    fold.val_classes.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                            order.begin() + static_cast<std::ptrdiff_t>(start + n_val));
    fold.val_classes = sorted_unique(fold.val_classes);
    fold.train_classes.clear();
    for (ClassId c : pool)
      if (!std::binary_search(fold.val_classes.begin(), fold.val_classes.end(), c)) fold.train_classes.push_back(c);
    folds.push_back(std::move(fold));
  }
  return folds;
}

SyntheticData make_synthetic(const SyntheticConfig& cfg) {
  if (cfg.n_train == 0 || cfg.n_test == 0) throw ConfigError("synthetic: need train and test classes");
  if (cfg.attr_dim < 1 || cfg.feat_dim < 1) throw ConfigError("synthetic: dimensions must be >= 1");
  if (cfg.images_per_class == 0) throw ConfigError("synthetic: images_per_class must be >= 1");
  if (!(cfg.noise_sigma >= 0.0) || !std::isfinite(cfg.noise_sigma)) throw ConfigError("synthetic: noise_sigma must be >= 0");
  if (!(cfg.holdout >= 0.0 && cfg.holdout < 1.0)) throw ConfigError("synthetic: holdout must be in [0, 1)");
  const auto C = static_cast<Index>(cfg.n_classes());
  const Index a = cfg.attr_dim;
  const Index d = cfg.feat_dim;

  Rng attr_rng(mix_seed(cfg.seed, 1));
  Matrix phi(C, a);
  constexpr int kMaxRetries = 1000;
  for (Index c = 0; c < C; ++c) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxRetries && !placed; ++attempt) {
      Vector v(a);
      for (Index j = 0; j < a; ++j) v[j] = attr_rng.normal();
      const double n = v.norm();
      if (n == 0.0) continue;
      v /= n;
      placed = true;
      for (Index o = 0; o < c && placed; ++o) placed = phi.row(o).dot(v) < cfg.max_cosine;
      if (placed) phi.row(c) = v.transpose();
    }
    if (!placed) {
      throw ConfigError("synthetic: could not place class " + std::to_string(c) + " below cosine " +
                        std::to_string(cfg.max_cosine) + " after " + std::to_string(kMaxRetries) + " retries");
    }
  }

  Rng gen_rng(mix_seed(cfg.seed, 2));
  Matrix M(d, a);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < a; ++j) M(i, j) = gen_rng.normal();

  Rng noise_rng(mix_seed(cfg.seed, 3));
  const auto per = static_cast<Index>(cfg.images_per_class);
  SyntheticData out;
  DatasetBundle& b = out.bundle;
  b.features.resize(C * per, d);
  b.labels.reserve(static_cast<std::size_t>(C * per));
  for (Index c = 0; c < C; ++c) {
    const Vector mean = M * phi.row(c).transpose();
    for (Index k = 0; k < per; ++k) {
      const Index row = c * per + k;
      for (Index j = 0; j < d; ++j) b.features(row, j) = mean[j] + cfg.noise_sigma * noise_rng.normal();
      b.labels.push_back(static_cast<ClassId>(c));
    }
  }
  b.class_embeddings = phi;
  ClassId next = 0;
  for (std::size_t i = 0; i < cfg.n_train; ++i) b.split.train_classes.push_back(next++);
  for (std::size_t i = 0; i < cfg.n_val; ++i) b.split.val_classes.push_back(next++);
  for (std::size_t i = 0; i < cfg.n_test; ++i) b.split.test_unseen_classes.push_back(next++);
  b.split.name = "PS";
  b.split.test_seen_image_indices = holdout_images(b.labels, b.split.seen_classes(), cfg.holdout, mix_seed(cfg.seed, 4));
  for (Index c = 0; c < C; ++c) {
    char name[32];
    std::snprintf(name, sizeof name, "class_%03d", static_cast<int>(c));
    b.class_names.emplace_back(name);
  }
  validate(b);
  out.generator = M;
  return out;
}

}  // namespace zsl
