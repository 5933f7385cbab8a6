#include <benchmark/benchmark.h>

#include "zsl/eval.hpp"
#include "zsl/linear_compat.hpp"
#include "zsl/ranking.hpp"
#include "zsl/rng.hpp"
#include "zsl/splitgen.hpp"

namespace {

using namespace zsl;

const SyntheticData& instance() {
  static const SyntheticData d = make_synthetic(SyntheticConfig{});
  return d;
}

TrainingSet seen_set() {
  const DatasetBundle& b = instance().bundle;
  return make_training_set(b, b.split.seen_classes());
}

void BM_EszslTrain(benchmark::State& state) {
  const TrainingSet data = seen_set();
  for (auto _ : state) benchmark::DoNotOptimize(train_eszsl(data, {1.0, 1.0}));
}
BENCHMARK(BM_EszslTrain);

void BM_SgdEpoch(benchmark::State& state) {
  const TrainingSet data = seen_set();
  const auto kind = static_cast<RankingLoss>(state.range(0));
  SgdConfig cfg;
  cfg.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train_sgd(kind, data, cfg));
  state.SetLabel(to_string(kind));
}
BENCHMARK(BM_SgdEpoch)->DenseRange(0, 2);

void BM_EvaluateGzsl(benchmark::State& state) {
  const DatasetBundle& b = instance().bundle;
  const BilinearMethod m("eszsl", train_eszsl(seen_set(), {1.0, 1.0}));
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_gzsl(m, b));
}
BENCHMARK(BM_EvaluateGzsl);

void BM_RankMatrix(benchmark::State& state) {
  const int methods = static_cast<int>(state.range(0));
  std::vector<std::string> ms, os;
  for (int m = 0; m < methods; ++m) ms.push_back("m" + std::to_string(m));
  for (int o = 0; o < 12; ++o) os.push_back("o" + std::to_string(o));
  ObservationGrid g(ms, os);
  Rng rng(1);
  for (int m = 0; m < methods; ++m)
    for (int o = 0; o < 12; ++o) g.scores(m, o) = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(rank_matrix(g));
}
BENCHMARK(BM_RankMatrix)->Arg(10)->Arg(100);

}  // namespace
BENCHMARK_MAIN();
