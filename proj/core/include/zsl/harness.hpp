#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "zsl/method.hpp"
#include "zsl/report.hpp"
#include "zsl/splitgen.hpp"

namespace zsl {

using Hyperparams = std::map<std::string, double>;
using Grid = std::map<std::string, std::vector<double>>;

/// A trainable method: defaults list every hyperparameter it accepts.
struct MethodEntry {
  std::string name;
  Hyperparams defaults;
  std::function<std::unique_ptr<TrainedMethod>(const TrainingSet&, const Hyperparams&, std::uint64_t seed)> train;
};

/// dap, conse, cmt, cmt_star, sse, latem, ale, devise, sje, eszsl, sync.
const std::vector<MethodEntry>& method_registry();
/// Throws ConfigError for an unknown name.
const MethodEntry& find_method(const std::string& name);

/// Cartesian product of `grid` over the entry's defaults, keys in sorted
/// order with the last key varying fastest. Throws ConfigError on an unknown
/// key or an empty value list.
std::vector<Hyperparams> expand_grid(const MethodEntry& entry, const Grid& grid);

/// Everything hyperparameter selection may see. Only images of the train
/// and val classes that are not held out for testing are copied in.
///
/// ZSL: train on train classes, predict val images among val classes.
/// GZSL: additionally hold out a seeded fraction of each train class's images
/// as seen validation images; candidates are train and val classes and the
/// score is the harmonic mean.
struct SelectionData {
  TrainingSet train;
  Matrix val_features;
  std::vector<ClassId> val_labels;
  CandidateView val_candidates;
  ClassIds unseen_classes;  // val classes
  ClassIds seen_classes;    // empty for ZSL
};

SelectionData make_selection_data(const DatasetBundle& bundle, const std::string& mode = "zsl",
                                  std::uint64_t seed = 0, double seen_holdout = 0.2);

/// Per-class val accuracy (ZSL) or val harmonic mean (GZSL).
double selection_score(const TrainedMethod& method, const SelectionData& data);

struct Selection {
  Hyperparams best;
  double score = 0.0;
};

/// Grid point with the best selection_score; ties go to the earlier point.
/// Points whose training throws are skipped; if all fail, the last error is
/// rethrown as TrainingError.
Selection select_hyperparameters(const MethodEntry& entry, const std::vector<Hyperparams>& points,
                                 const SelectionData& data, std::uint64_t seed);

struct DatasetSource {
  std::string name;
  std::optional<std::filesystem::path> path;
  std::optional<SyntheticConfig> synthetic;
  Normalization normalize = Normalization::none;
};

struct MethodSpec {
  std::string name;
  Grid grid;
};

struct BenchmarkConfig {
  std::uint64_t seed = 0;
  int folds = 1;
  std::vector<std::string> modes{"zsl"};
  int workers = 1;
  std::filesystem::path output_dir = ".";
  bool record_timing = false;
  std::vector<DatasetSource> datasets;
  std::vector<MethodSpec> methods;
};

/// Parses a JSON benchmark config. Relative paths resolve against base_dir.
/// Throws ConfigError on any schema violation.
BenchmarkConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");
BenchmarkConfig load_config(const std::filesystem::path& path);

/// JSON object with SyntheticConfig field names; missing fields keep defaults.
SyntheticConfig parse_synthetic_config(const std::string& text);

struct CellFailure {
  std::string method;
  std::string dataset;
  int fold = 0;
  std::string mode;  // empty when the whole cell failed
  std::string message;
};

struct CellOutcome {
  std::vector<ResultsRecord> records;
  std::vector<CellFailure> failures;
};

struct RunOutput {
  std::vector<ResultsRecord> records;  // cell order: dataset, fold, method, mode
  std::vector<CellFailure> failures;
};

/// Loads (or generates) one configured dataset and applies normalization.
DatasetBundle materialize(const DatasetSource& source);

/// Per mode: selection on val, retraining on train+val, evaluation. A mode
/// that throws becomes a failure without affecting the other mode.
CellOutcome run_cell(const MethodEntry& entry, const Grid& grid, const DatasetBundle& fold_bundle,
                     const std::string& dataset, int fold, const std::vector<std::string>& modes, std::uint64_t seed,
                     bool record_timing);

/// Runs every (dataset, fold, method) cell on cfg.workers threads.
RunOutput run_benchmark(const BenchmarkConfig& cfg);

}  // namespace zsl
