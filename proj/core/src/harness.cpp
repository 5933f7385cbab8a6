#include "zsl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "zsl/attribute_dap.hpp"
#include "zsl/eval.hpp"
#include "zsl/hybrid.hpp"
#include "zsl/linear_compat.hpp"
#include "zsl/nonlinear_compat.hpp"
#include "zsl/rng.hpp"

namespace zsl {

using nlohmann::json;

namespace {

int as_int(const Hyperparams& hp, const std::string& key, int min) {
  const double v = hp.at(key);
  if (v != std::floor(v) || v < min || v > 1e9) {
    throw ConfigError(key + " must be an integer >= " + std::to_string(min) + ", got " + format_real(v));
  }
  return static_cast<int>(v);
}

SgdConfig sgd_config(const Hyperparams& hp, std::uint64_t seed) {
  SgdConfig cfg;
  cfg.learning_rate = hp.at("learning_rate");
  cfg.epochs = as_int(hp, "epochs", 0);
  cfg.seed = seed;
  return cfg;
}

MethodEntry ranking_entry(RankingLoss kind) {
  return {to_string(kind),
          {{"learning_rate", 0.01}, {"epochs", 20}},
          [kind](const TrainingSet& data, const Hyperparams& hp, std::uint64_t seed) -> std::unique_ptr<TrainedMethod> {
            return std::make_unique<BilinearMethod>(to_string(kind), train_sgd(kind, data, sgd_config(hp, seed)));
          }};
}

std::vector<MethodEntry> build_registry() {
  std::vector<MethodEntry> r;
  r.push_back({"dap",
               {{"reg", 1e-3}, {"prior", 0.5}},
               [](const TrainingSet& data, const Hyperparams& hp, std::uint64_t) -> std::unique_ptr<TrainedMethod> {
                 return train_dap(data, hp.at("reg"), hp.at("prior"));
               }});
  r.push_back({"conse",
               {{"reg", 1e-3}, {"T", 3}},
               [](const TrainingSet& data, const Hyperparams& hp, std::uint64_t) -> std::unique_ptr<TrainedMethod> {
                 const int T = as_int(hp, "T", 1);
                 return std::make_unique<ConseMethod>(train_seen_classifier(data, hp.at("reg")), T);
               }});
  r.push_back({"cmt",
               {{"learning_rate", 0.01}, {"epochs", 50}, {"hidden", 32}},
               [](const TrainingSet& data, const Hyperparams& hp, std::uint64_t seed) -> std::unique_ptr<TrainedMethod> {
                 return std::make_unique<CmtMethod>(train_cmt(data, sgd_config(hp, seed), as_int(hp, "hidden", 1)));
               }});
  r.push_back({"cmt_star",
               {{"learning_rate", 0.01}, {"epochs", 50}, {"hidden", 32}, {"quantile", 0.95}},
               [](const TrainingSet& data, const Hyperparams& hp, std::uint64_t seed) -> std::unique_ptr<TrainedMethod> {
                 CmtModel model = train_cmt(data, sgd_config(hp, seed), as_int(hp, "hidden", 1));
                 NoveltyDetector detector = fit_novelty(model, data, hp.at("quantile"));
                 return std::make_unique<CmtStarMethod>(std::move(model), std::move(detector));
               }});
  r.push_back({"sse",
               {{"reg", 1e-3}},
               [](const TrainingSet& data, const Hyperparams& hp, std::uint64_t) -> std::unique_ptr<TrainedMethod> {
                 return std::make_unique<SseMethod>(sse_fit(data, hp.at("reg")));
               }});
  r.push_back({"latem",
               {{"learning_rate", 0.01}, {"epochs", 20}, {"K", 2}},
               [](const TrainingSet& data, const Hyperparams& hp, std::uint64_t seed) -> std::unique_ptr<TrainedMethod> {
                 return std::make_unique<LatemMethod>(train_latem(data, sgd_config(hp, seed), as_int(hp, "K", 1)));
               }});
  r.push_back(ranking_entry(RankingLoss::ale));
  r.push_back(ranking_entry(RankingLoss::devise));
  r.push_back(ranking_entry(RankingLoss::sje));
  r.push_back({"eszsl",
               {{"gamma", 1.0}, {"lambda", 1.0}},
               [](const TrainingSet& data, const Hyperparams& hp, std::uint64_t) -> std::unique_ptr<TrainedMethod> {
                 return std::make_unique<BilinearMethod>("eszsl",
                                                         train_eszsl(data, {hp.at("gamma"), hp.at("lambda")}));
               }});
  r.push_back({"sync",
               {{"sigma", 1.0}, {"reg", 1.0}, {"phantom_ridge", 0.0}},
               [](const TrainingSet& data, const Hyperparams& hp, std::uint64_t) -> std::unique_ptr<TrainedMethod> {
                 return std::make_unique<SyncMethod>(
                     sync_train(data, hp.at("sigma"), hp.at("reg"), hp.at("phantom_ridge")));
               }});
  return r;
}

}  // namespace

const std::vector<MethodEntry>& method_registry() {
  static const std::vector<MethodEntry> registry = build_registry();
  return registry;
}

const MethodEntry& find_method(const std::string& name) {
  for (const auto& e : method_registry())
    if (e.name == name) return e;
  throw ConfigError("unknown method '" + name + "'");
}

std::vector<Hyperparams> expand_grid(const MethodEntry& entry, const Grid& grid) {
  for (const auto& [key, values] : grid) {
    if (!entry.defaults.count(key)) throw ConfigError(entry.name + ": unknown hyperparameter '" + key + "'");
    if (values.empty()) throw ConfigError(entry.name + ": empty grid for '" + key + "'");
    for (double v : values)
      if (!std::isfinite(v)) throw ConfigError(entry.name + ": non-finite grid value for '" + key + "'");
  }
  std::vector<Hyperparams> points{entry.defaults};
  for (const auto& [key, values] : grid) {
    std::vector<Hyperparams> next;
    for (const auto& p : points) {
      for (double v : values) {
        Hyperparams q = p;
        q[key] = v;
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  return points;
}

SelectionData make_selection_data(const DatasetBundle& bundle, const std::string& mode, std::uint64_t seed,
                                  double seen_holdout) {
  const SplitSpec& split = bundle.split;
  if (split.val_classes.empty()) throw DataError("selection: split has no val classes");
  if (mode != "zsl" && mode != "gzsl") throw ConfigError("selection: unknown mode '" + mode + "'");
  SelectionData data;
  data.unseen_classes = sorted_unique(split.val_classes);
  std::vector<std::size_t> train_rows = training_images(bundle, split.train_classes);
  std::vector<std::size_t> val_rows = training_images(bundle, split.val_classes);

  if (mode == "gzsl") {
    if (!(seen_holdout > 0.0 && seen_holdout < 1.0)) throw ConfigError("selection: seen holdout must be in (0, 1)");
    data.seen_classes = sorted_unique(split.train_classes);
    std::vector<std::size_t> kept;
    for (ClassId c : data.seen_classes) {
      std::vector<std::size_t> rows;
      for (std::size_t i : train_rows)
        if (bundle.labels[i] == c) rows.push_back(i);
      Rng(mix_seed(seed, 0x6000 + static_cast<std::uint64_t>(c))).shuffle(rows);
      const auto take = static_cast<std::size_t>(std::floor(seen_holdout * static_cast<double>(rows.size())));
      if (take == 0 || take == rows.size()) {
        throw DataError("selection: class " + std::to_string(c) + " has too few images for a seen holdout");
      }
      val_rows.insert(val_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take));
      kept.insert(kept.end(), rows.begin() + static_cast<std::ptrdiff_t>(take), rows.end());
    }
    std::sort(kept.begin(), kept.end());
    std::sort(val_rows.begin(), val_rows.end());
    train_rows = std::move(kept);
  }

  data.train.classes = restrict_candidates(bundle, split.train_classes);
  data.train.features = gather_rows(bundle.features, train_rows);
  for (std::size_t i : train_rows) data.train.targets.push_back(*data.train.classes.position_of(bundle.labels[i]));
  data.val_features = gather_rows(bundle.features, val_rows);
  for (std::size_t i : val_rows) data.val_labels.push_back(bundle.labels[i]);
  ClassIds candidates = data.unseen_classes;
  candidates.insert(candidates.end(), data.seen_classes.begin(), data.seen_classes.end());
  data.val_candidates = restrict_candidates(bundle, sorted_unique(candidates));
  return data;
}

double selection_score(const TrainedMethod& method, const SelectionData& data) {
  const auto scorer = method.bind(data.val_candidates);
  std::vector<ClassId> unseen_pred, unseen_truth, seen_pred, seen_truth;
  for (Index i = 0; i < data.val_features.rows(); ++i) {
    const ClassId truth = data.val_labels[static_cast<std::size_t>(i)];
    const ClassId pred = scorer->predict(data.val_features.row(i).transpose());
    const bool seen = std::binary_search(data.seen_classes.begin(), data.seen_classes.end(), truth);
    (seen ? seen_pred : unseen_pred).push_back(pred);
    (seen ? seen_truth : unseen_truth).push_back(truth);
  }
  const double ts = per_class_top1(unseen_pred, unseen_truth, data.unseen_classes);
  if (data.seen_classes.empty()) return ts;
  return harmonic_mean(per_class_top1(seen_pred, seen_truth, data.seen_classes), ts);
}

Selection select_hyperparameters(const MethodEntry& entry, const std::vector<Hyperparams>& points,
                                 const SelectionData& data, std::uint64_t seed) {
  if (points.empty()) throw ConfigError(entry.name + ": empty hyperparameter grid");
  std::optional<Selection> best;
  std::string last_error;
  for (const auto& hp : points) {
    try {
      const double score = selection_score(*entry.train(data.train, hp, seed), data);
      if (!best || score > best->score) best = Selection{hp, score};
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      last_error = e.what();
    }
  }
  if (!best) throw TrainingError(entry.name + ": every grid point failed; last error: " + last_error);
  return *best;
}

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

SyntheticConfig synthetic_from(const json& j) {
  if (!j.is_object()) throw ConfigError("synthetic config must be an object");
  reject_unknown(j,
                 {"n_train", "n_val", "n_test", "attr_dim", "feat_dim", "images_per_class", "noise_sigma", "seed",
                  "holdout", "max_cosine"},
                 "synthetic");
  SyntheticConfig c;
  c.n_train = get_or<std::size_t>(j, "n_train", c.n_train);
  c.n_val = get_or<std::size_t>(j, "n_val", c.n_val);
  c.n_test = get_or<std::size_t>(j, "n_test", c.n_test);
  c.attr_dim = get_or<Index>(j, "attr_dim", c.attr_dim);
  c.feat_dim = get_or<Index>(j, "feat_dim", c.feat_dim);
  c.images_per_class = get_or<std::size_t>(j, "images_per_class", c.images_per_class);
  c.noise_sigma = get_or<double>(j, "noise_sigma", c.noise_sigma);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.holdout = get_or<double>(j, "holdout", c.holdout);
  c.max_cosine = get_or<double>(j, "max_cosine", c.max_cosine);
  return c;
}

}  // namespace

SyntheticConfig parse_synthetic_config(const std::string& text) {
  try {
    return synthetic_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synthetic config: ") + e.what());
  }
}

BenchmarkConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  BenchmarkConfig cfg;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    reject_unknown(j, {"seed", "folds", "modes", "workers", "output_dir", "record_timing", "datasets", "methods"},
                   "config");
    cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
    cfg.folds = get_or<int>(j, "folds", cfg.folds);
    cfg.modes = get_or<std::vector<std::string>>(j, "modes", cfg.modes);
    cfg.workers = get_or<int>(j, "workers", cfg.workers);
    cfg.record_timing = get_or<bool>(j, "record_timing", cfg.record_timing);
    cfg.output_dir = base_dir / get_or<std::string>(j, "output_dir", ".");

    for (const auto& d : j.at("datasets")) {
      reject_unknown(d, {"name", "path", "synthetic", "normalize"}, "dataset");
      DatasetSource src;
      src.name = d.at("name").get<std::string>();
      if (d.contains("path") == d.contains("synthetic")) {
        throw ConfigError("dataset '" + src.name + "': give exactly one of path or synthetic");
      }
      if (d.contains("path")) src.path = base_dir / d.at("path").get<std::string>();
      if (d.contains("synthetic")) src.synthetic = synthetic_from(d.at("synthetic"));
      src.normalize = parse_normalization(get_or<std::string>(d, "normalize", "none"));
      cfg.datasets.push_back(std::move(src));
    }
    for (const auto& m : j.at("methods")) {
      MethodSpec spec;
      if (m.is_string()) {
        spec.name = m.get<std::string>();
      } else {
        reject_unknown(m, {"name", "grid"}, "method");
        spec.name = m.at("name").get<std::string>();
        if (m.contains("grid")) spec.grid = m.at("grid").get<Grid>();
      }
      expand_grid(find_method(spec.name), spec.grid);
      cfg.methods.push_back(std::move(spec));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const DataError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  if (cfg.datasets.empty()) throw ConfigError("config: no datasets");
  if (cfg.methods.empty()) throw ConfigError("config: no methods");
  if (cfg.folds < 1) throw ConfigError("config: folds must be >= 1");
  if (cfg.workers < 1) throw ConfigError("config: workers must be >= 1");
  if (cfg.modes.empty()) throw ConfigError("config: no modes");
  for (const auto& mode : cfg.modes)
    if (mode != "zsl" && mode != "gzsl") throw ConfigError("config: unknown mode '" + mode + "'");
  std::set<std::string> names;
  for (const auto& d : cfg.datasets)
    if (!names.insert(d.name).second) throw ConfigError("config: duplicate dataset name '" + d.name + "'");
  names.clear();
  for (const auto& m : cfg.methods)
    if (!names.insert(m.name).second) throw ConfigError("config: duplicate method '" + m.name + "'");
  return cfg;
}

BenchmarkConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

DatasetBundle materialize(const DatasetSource& source) {
  DatasetBundle bundle = source.path ? load_dataset(*source.path) : make_synthetic(*source.synthetic).bundle;
  bundle.features = normalize_features(bundle.features, source.normalize);
  return bundle;
}

CellOutcome run_cell(const MethodEntry& entry, const Grid& grid, const DatasetBundle& fold_bundle,
                     const std::string& dataset, int fold, const std::vector<std::string>& modes, std::uint64_t seed,
                     bool record_timing) {
  const auto points = expand_grid(entry, grid);
  const TrainingSet full = make_training_set(fold_bundle, fold_bundle.split.seen_classes());
  std::optional<Hyperparams> trained_with;
  std::unique_ptr<TrainedMethod> method;

  CellOutcome out;
  for (const auto& mode : modes) {
    const auto start = std::chrono::steady_clock::now();
    try {
      Hyperparams chosen = points.front();
      if (points.size() > 1) {
        chosen = select_hyperparameters(entry, points, make_selection_data(fold_bundle, mode, seed), seed).best;
      }
      if (!trained_with || *trained_with != chosen) {
        method = entry.train(full, chosen, seed);
        trained_with = chosen;
      }
      ResultsRecord r;
      r.method = entry.name;
      r.dataset = dataset;
      r.fold = fold;
      r.mode = mode;
      r.hyperparameters = chosen;
      if (mode == "zsl") {
        r.acc_unseen = evaluate_zsl(*method, fold_bundle, fold_bundle.split.test_unseen_classes).acc_unseen;
      } else {
        const EvalReport rep = evaluate_gzsl(*method, fold_bundle);
        r.acc_unseen = rep.acc_unseen;
        r.acc_seen = rep.acc_seen;
        r.harmonic_mean = rep.harmonic_mean;
      }
      if (record_timing) r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      out.records.push_back(std::move(r));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      out.failures.push_back({entry.name, dataset, fold, mode,
                              entry.name + " on " + dataset + " fold " + std::to_string(fold) + " (" + mode +
                                  "): " + e.what()});
    }
  }
  return out;
}

RunOutput run_benchmark(const BenchmarkConfig& cfg) {
  struct Prepared {
    std::vector<DatasetBundle> folds;
    std::string error;
  };
  std::vector<Prepared> prepared(cfg.datasets.size());
  for (std::size_t di = 0; di < cfg.datasets.size(); ++di) {
    try {
      const DatasetBundle bundle = materialize(cfg.datasets[di]);
      if (cfg.folds == 1) {
        prepared[di].folds.push_back(bundle);
      } else {
        for (auto& split : make_validation_folds(bundle.split, cfg.folds, mix_seed(cfg.seed, 0xF000 + di))) {
          DatasetBundle fb = bundle;
          fb.split = std::move(split);
          prepared[di].folds.push_back(std::move(fb));
        }
      }
    } catch (const std::exception& e) {
      prepared[di].error = e.what();
    }
  }

  struct Cell {
    std::size_t dataset;
    int fold;
    std::size_t method;
  };
  std::vector<Cell> cells;
  for (std::size_t di = 0; di < cfg.datasets.size(); ++di)
    for (int f = 0; f < cfg.folds; ++f)
      for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) cells.push_back({di, f, mi});

  std::vector<CellOutcome> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const Cell& c = cells[i];
      const std::string& dataset = cfg.datasets[c.dataset].name;
      const MethodSpec& spec = cfg.methods[c.method];
      try {
        const Prepared& p = prepared[c.dataset];
        if (!p.error.empty()) throw DataError(p.error);
        results[i] = run_cell(find_method(spec.name), spec.grid, p.folds[static_cast<std::size_t>(c.fold)], dataset,
                              c.fold, cfg.modes, mix_seed(mix_seed(cfg.seed, c.dataset), c.fold), cfg.record_timing);
      } catch (const std::exception& e) {
        results[i].records.clear();
        results[i].failures = {CellFailure{spec.name, dataset, c.fold, "",
                                           spec.name + " on " + dataset + " fold " + std::to_string(c.fold) + ": " +
                                               e.what()}};
      }
    }
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), cells.size());
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  RunOutput out;
  for (const auto& r : results) {
    out.records.insert(out.records.end(), r.records.begin(), r.records.end());
    out.failures.insert(out.failures.end(), r.failures.begin(), r.failures.end());
  }
  return out;
}

}  // namespace zsl
