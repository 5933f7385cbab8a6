#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "zsl/harness.hpp"

namespace zsl {
namespace {

using test::TempDir;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

const char* kSmallSynthetic = R"({"n_train": 8, "n_val": 3, "n_test": 3, "images_per_class": 10})";

BenchmarkConfig small_config(const std::string& methods, const std::string& modes, int folds) {
  return parse_config(R"({"seed": 3, "folds": )" + std::to_string(folds) + R"(, "modes": )" + modes +
                      R"(, "datasets": [{"name": "syn", "synthetic": )" + kSmallSynthetic +
                      R"(}], "methods": )" + methods + "}");
}

TEST(ExpandGrid, CartesianProductLastKeyFastest) {
  const MethodEntry& eszsl = find_method("eszsl");
  const auto points = expand_grid(eszsl, {{"gamma", {0.1, 1}}, {"lambda", {1, 10, 100}}});
  ASSERT_EQ(points.size(), 6u);
  EXPECT_EQ(points[0].at("gamma"), 0.1);
  EXPECT_EQ(points[0].at("lambda"), 1.0);
  EXPECT_EQ(points[1].at("lambda"), 10.0);
  EXPECT_EQ(points[3].at("gamma"), 1.0);
  EXPECT_EQ(expand_grid(eszsl, {}).size(), 1u);
  EXPECT_EQ(expand_grid(eszsl, {})[0], eszsl.defaults);
  EXPECT_THROW(expand_grid(eszsl, {{"alpha", {1}}}), ConfigError);
  EXPECT_THROW(expand_grid(eszsl, {{"gamma", {}}}), ConfigError);
  EXPECT_THROW(find_method("svm"), ConfigError);
}

TEST(Registry, ElevenMethods) {
  std::set<std::string> names;
  for (const auto& m : method_registry()) names.insert(m.name);
  EXPECT_EQ(names, (std::set<std::string>{"dap", "conse", "cmt", "cmt_star", "sse", "latem", "ale", "devise", "sje",
                                          "eszsl", "sync"}));
}

TEST(ParseConfig, Errors) {
  EXPECT_THROW(parse_config("not json"), ConfigError);
  EXPECT_THROW(parse_config(R"({"datasets": [], "methods": ["ale"]})"), ConfigError);
  const std::string ds = R"("datasets": [{"name": "s", "synthetic": {}}])";
  EXPECT_THROW(parse_config("{" + ds + R"(, "methods": []})"), ConfigError);
  EXPECT_THROW(parse_config("{" + ds + R"(, "methods": ["ale"], "folds": 0})"), ConfigError);
  EXPECT_THROW(parse_config("{" + ds + R"(, "methods": ["ale"], "modes": ["fsl"]})"), ConfigError);
  EXPECT_THROW(parse_config("{" + ds + R"(, "methods": ["ale", "ale"]})"), ConfigError);
  EXPECT_THROW(parse_config("{" + ds + R"(, "methods": ["ale"], "colour": 1})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"datasets": [{"name": "s"}], "methods": ["ale"]})"), ConfigError);
  EXPECT_THROW(parse_config("{" + ds + R"(, "methods": [{"name": "ale", "grid": {"learning_rate": []}}]})"), ConfigError);
  EXPECT_THROW(parse_config("{" + ds + R"(, "methods": [{"name": "ale", "grid": {"lr": [0.1]}}]})"), ConfigError);
  EXPECT_THROW(parse_config("{" + ds + R"(, "methods": ["svm"]})"), ConfigError);
  const BenchmarkConfig ok = parse_config("{" + ds + R"(, "methods": ["ale", {"name": "sje", "grid": {"learning_rate": [0.1]}}]})");
  EXPECT_EQ(ok.methods.size(), 2u);
  EXPECT_EQ(ok.methods[1].grid.at("learning_rate"), std::vector<double>{0.1});
}

TEST(RunBenchmark, RecordCounts) {
  const RunOutput two = run_benchmark(small_config(R"(["eszsl", "devise"])", R"(["zsl"])", 1));
  EXPECT_TRUE(two.failures.empty());
  EXPECT_EQ(two.records.size(), 2u);

  const RunOutput six = run_benchmark(small_config(R"(["eszsl"])", R"(["zsl", "gzsl"])", 3));
  EXPECT_TRUE(six.failures.empty());
  ASSERT_EQ(six.records.size(), 6u);
  // cell order: dataset, fold, method, mode
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(six.records[i].fold, static_cast<int>(i / 2));
    EXPECT_EQ(six.records[i].mode, i % 2 == 0 ? "zsl" : "gzsl");
  }
}

TEST(RunBenchmark, WorkerCountDoesNotChangeResults) {
  BenchmarkConfig cfg = small_config(R"(["eszsl", "ale", "sync"])", R"(["zsl", "gzsl"])", 2);
  cfg.methods[0].grid = {{"gamma", {0.1, 1.0}}};
  const RunOutput serial = run_benchmark(cfg);
  cfg.workers = 4;
  const RunOutput parallel = run_benchmark(cfg);
  EXPECT_EQ(records_to_json(serial.records), records_to_json(parallel.records));
}

TEST(RunBenchmark, FailuresAreIsolatedAndCounted) {
  BenchmarkConfig cfg = small_config(R"(["eszsl", "devise"])", R"(["zsl"])", 1);
  cfg.methods[1].grid = {{"learning_rate", {-1.0}}};  // every grid point rejected
  const RunOutput out = run_benchmark(cfg);
  ASSERT_EQ(out.records.size(), 1u);
  EXPECT_EQ(out.records[0].method, "eszsl");
  ASSERT_EQ(out.failures.size(), 1u);
  EXPECT_EQ(out.failures[0].method, "devise");
  EXPECT_NE(out.failures[0].message.find("devise"), std::string::npos);
  EXPECT_NE(out.failures[0].message.find("syn"), std::string::npos);
}

TEST(RunBenchmark, MissingDatasetFailsItsCellsOnly) {
  BenchmarkConfig cfg = small_config(R"(["eszsl"])", R"(["zsl"])", 1);
  DatasetSource missing;
  missing.name = "gone";
  missing.path = "/nonexistent/zsl_dataset";
  cfg.datasets.push_back(missing);
  const RunOutput out = run_benchmark(cfg);
  EXPECT_EQ(out.records.size(), 1u);
  ASSERT_EQ(out.failures.size(), 1u);
  EXPECT_EQ(out.failures[0].dataset, "gone");
}

// Records every feature row a method touches, in training or scoring.
struct AccessLog {
  std::mutex mu;
  std::vector<Vector> rows;
  void add(const Vector& x) {
    std::lock_guard lock(mu);
    rows.push_back(x);
  }
};

MethodEntry tracking_entry(AccessLog& log) {
  MethodEntry e = find_method("eszsl");
  e.name = "tracked";
  const auto inner = e.train;
  e.train = [&log, inner](const TrainingSet& data, const Hyperparams& hp, std::uint64_t seed) {
    for (Index i = 0; i < data.size(); ++i) log.add(data.features.row(i).transpose());
    auto model = inner(data, hp, seed);

    class Tracked final : public TrainedMethod {
     public:
      Tracked(std::unique_ptr<TrainedMethod> m, AccessLog& log) : m_(std::move(m)), log_(log) {}
      std::string name() const override { return "tracked"; }
      std::unique_ptr<CandidateScorer> bind(const CandidateView& candidates) const override {
        std::shared_ptr<CandidateScorer> scorer = m_->bind(candidates);
        return make_scorer(candidates, [scorer, this](const Vector& x) {
          log_.add(x);
          return scorer->scores(x);
        });
      }

     private:
      std::unique_ptr<TrainedMethod> m_;
      AccessLog& log_;
    };
    return std::unique_ptr<TrainedMethod>(std::make_unique<Tracked>(std::move(model), log));
  };
  return e;
}

TEST(Selection, NeverReadsTestRows) {
  const DatasetBundle b = make_synthetic(SyntheticConfig{}).bundle;
  std::vector<Vector> forbidden;
  for (Index i = 0; i < b.num_images(); ++i) {
    const ClassId y = b.labels[static_cast<std::size_t>(i)];
    const bool unseen = std::count(b.split.test_unseen_classes.begin(), b.split.test_unseen_classes.end(), y) > 0;
    const bool held = std::count(b.split.test_seen_image_indices.begin(), b.split.test_seen_image_indices.end(),
                                 static_cast<std::size_t>(i)) > 0;
    if (unseen || held) forbidden.push_back(b.features.row(i).transpose());
  }
  ASSERT_FALSE(forbidden.empty());
  for (const std::string mode : {"zsl", "gzsl"}) {
    AccessLog log;
    const MethodEntry entry = tracking_entry(log);
    const SelectionData data = make_selection_data(b, mode, 5);
    const auto points = expand_grid(entry, {{"gamma", {0.1, 1.0, 10.0}}});
    select_hyperparameters(entry, points, data, 5);
    ASSERT_FALSE(log.rows.empty());
    for (const Vector& seen : log.rows) {
      for (const Vector& f : forbidden) ASSERT_FALSE(seen == f) << mode << ": selection touched a test row";
    }
    for (ClassId c : data.val_candidates.ids()) {
      EXPECT_EQ(std::count(b.split.test_unseen_classes.begin(), b.split.test_unseen_classes.end(), c), 0);
    }
  }
}

TEST(Selection, PicksTheBestPointAndKeepsTheFirstOnTies) {
  const DatasetBundle b = make_synthetic(SyntheticConfig{}).bundle;
  const SelectionData data = make_selection_data(b);
  const MethodEntry& eszsl = find_method("eszsl");
  // identical points tie: the first is kept
  const auto points = expand_grid(eszsl, {{"gamma", {1.0, 1.0}}});
  const Selection s = select_hyperparameters(eszsl, points, data, 0);
  EXPECT_EQ(s.best, points[0]);
  double best = -1.0;
  for (const auto& p : expand_grid(eszsl, {{"gamma", {1e-3, 1.0, 1e3}}})) {
    best = std::max(best, selection_score(*eszsl.train(data.train, p, 0), data));
  }
  EXPECT_EQ(select_hyperparameters(eszsl, expand_grid(eszsl, {{"gamma", {1e-3, 1.0, 1e3}}}), data, 0).score, best);
}

TEST(Selection, AllPointsFailingIsATrainingError) {
  const DatasetBundle b = make_synthetic(SyntheticConfig{}).bundle;
  const MethodEntry& sync = find_method("sync");
  EXPECT_THROW(select_hyperparameters(sync, expand_grid(sync, {{"sigma", {1e9}}}), make_selection_data(b), 0),
               TrainingError);
}

#ifdef ZSLBENCH_EXE
int run_cli(const std::string& args, const std::filesystem::path& log) {
  const std::string cmd = std::string(ZSLBENCH_EXE) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

TEST(Cli, RunIsByteIdenticalAcrossReruns) {
  TempDir dir;
  const std::string cfg = R"({"seed": 1, "modes": ["zsl", "gzsl"], "output_dir": "out", "workers": 2,
    "datasets": [{"name": "syn", "synthetic": )" + std::string(kSmallSynthetic) + R"(}],
    "methods": ["eszsl", "sje", {"name": "sync", "grid": {"sigma": [0.5, 1.0]}}]})";
  write(dir.path() / "cfg.json", cfg);
  ASSERT_EQ(run_cli("run --config " + (dir.path() / "cfg.json").string(), dir.path() / "log"), 0)
      << slurp(dir.path() / "log");
  const std::string first = slurp(dir.path() / "out" / "results.json");
  ASSERT_EQ(run_cli("run --config " + (dir.path() / "cfg.json").string(), dir.path() / "log"), 0);
  EXPECT_EQ(first, slurp(dir.path() / "out" / "results.json"));
  EXPECT_EQ(records_from_json(first).size(), 6u);

  for (const char* fmt : {"table", "ranks", "raw"}) {
    EXPECT_EQ(run_cli("report --input " + (dir.path() / "out" / "results.json").string() + " --format " + fmt,
                      dir.path() / "log"),
              0)
        << fmt;
  }
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  EXPECT_EQ(run_cli("", dir.path() / "log"), 2);
  EXPECT_EQ(run_cli("run --config " + (dir.path() / "missing.json").string(), dir.path() / "log"), 2);
  write(dir.path() / "bad.json", R"({"datasets": [], "methods": []})");
  EXPECT_EQ(run_cli("run --config " + (dir.path() / "bad.json").string(), dir.path() / "log"), 2);
  EXPECT_EQ(run_cli("report --input " + (dir.path() / "bad.json").string() + " --format pie", dir.path() / "log"), 2);

  // one failing cell -> 1, other records still written
  write(dir.path() / "fail.json", R"({"output_dir": "o", "datasets": [{"name": "syn", "synthetic": )" +
                                      std::string(kSmallSynthetic) +
                                      R"(}], "methods": ["eszsl", {"name": "ale", "grid": {"learning_rate": [-1]}}]})");
  EXPECT_EQ(run_cli("run --config " + (dir.path() / "fail.json").string(), dir.path() / "log"), 1);
  EXPECT_EQ(records_from_json(slurp(dir.path() / "o" / "results.json")).size(), 1u);
  EXPECT_NE(slurp(dir.path() / "log").find("ale"), std::string::npos);

  const std::string awa = test::data_dir() + "/awa/";
  EXPECT_EQ(run_cli("audit --split " + awa + "splits_ss.json --names " + awa + "classes.txt --pretrain " + awa +
                        "imagenet1k_names.txt",
                    dir.path() / "log"),
            1);
  EXPECT_NE(slurp(dir.path() / "log").find("6 violation(s)"), std::string::npos);
  write(dir.path() / "empty.txt", "");
  EXPECT_EQ(run_cli("audit --split " + awa + "splits_ss.json --names " + awa + "classes.txt --pretrain " +
                        (dir.path() / "empty.txt").string(),
                    dir.path() / "log"),
            0);

  write(dir.path() / "synth.json", R"({"n_train": 4, "n_val": 2, "n_test": 2, "images_per_class": 5})");
  EXPECT_EQ(run_cli("synth --config " + (dir.path() / "synth.json").string() + " --out " +
                        (dir.path() / "data").string(),
                    dir.path() / "log"),
            0);
  EXPECT_EQ(load_dataset(dir.path() / "data").num_images(), 40);
  write(dir.path() / "synth_bad.json", R"({"n_trains": 4})");
  EXPECT_EQ(run_cli("synth --config " + (dir.path() / "synth_bad.json").string() + " --out " +
                        (dir.path() / "d2").string(),
                    dir.path() / "log"),
            2);
}
#endif

}  // namespace
}  // namespace zsl
