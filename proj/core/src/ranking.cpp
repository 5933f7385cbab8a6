#include "zsl/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace zsl {

namespace {

std::size_t index_of(const std::vector<std::string>& names, const std::string& name, const char* what) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw DataError(std::string("observation grid: unknown ") + what + " '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

}  // namespace

ObservationGrid::ObservationGrid(std::vector<std::string> m, std::vector<std::string> o)
    : methods(std::move(m)), observations(std::move(o)) {
  scores = Matrix::Constant(static_cast<Index>(methods.size()), static_cast<Index>(observations.size()),
                            std::numeric_limits<double>::quiet_NaN());
}

void ObservationGrid::set(const std::string& method, const std::string& observation, double score) {
  scores(static_cast<Index>(index_of(methods, method, "method")),
         static_cast<Index>(index_of(observations, observation, "observation"))) = score;
}

bool ObservationGrid::complete() const {
  return scores.rows() == static_cast<Index>(methods.size()) &&
         scores.cols() == static_cast<Index>(observations.size()) && !scores.hasNaN();
}

RankMatrix rank_matrix(const ObservationGrid& grid) {
  if (grid.methods.empty() || grid.observations.empty()) throw DataError("rank matrix: empty grid");
  if (!grid.complete()) throw DataError("rank matrix: incomplete grid");
  const Index M = static_cast<Index>(grid.methods.size());
  const Index O = static_cast<Index>(grid.observations.size());

  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(M, M);
  Vector rank_sum = Vector::Zero(M);
  std::vector<Index> order(static_cast<std::size_t>(M));
  for (Index o = 0; o < O; ++o) {
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return grid.scores(a, o) > grid.scores(b, o); });
    for (Index r = 0; r < M; ++r) {
      const Index m = order[static_cast<std::size_t>(r)];
      ++counts(m, r);
      rank_sum[m] += static_cast<double>(r + 1);
    }
  }
  const Vector mean = rank_sum / static_cast<double>(O);

  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return mean[a] < mean[b]; });
  RankMatrix out;
  out.counts.resize(M, M);
  out.mean_rank.resize(M);
  for (Index i = 0; i < M; ++i) {
    const Index m = order[static_cast<std::size_t>(i)];
    out.methods.push_back(grid.methods[static_cast<std::size_t>(m)]);
    out.counts.row(i) = counts.row(m);
    out.mean_rank[i] = mean[m];
  }
  return out;
}

std::vector<FoldSummary> robustness_report(const std::vector<FoldScore>& scores) {
  if (scores.empty()) throw DataError("robustness report: no scores");
  std::vector<std::pair<std::string, std::string>> keys;
  std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
  for (const auto& s : scores) {
    auto key = std::make_pair(s.method, s.dataset);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) keys.push_back(key);
    it->second.push_back(s.score);
  }
  std::vector<FoldSummary> out;
  for (const auto& key : keys) {
    const auto& values = groups[key];
    if (values.size() < 2) {
      throw DataError("robustness report: " + key.first + " on " + key.second + " has a single fold");
    }
    FoldSummary summary;
    summary.method = key.first;
    summary.dataset = key.second;
    summary.folds = values.size();
    summary.min = *std::min_element(values.begin(), values.end());
    summary.max = *std::max_element(values.begin(), values.end());
    summary.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    summary.spread = summary.max - summary.min;
    out.push_back(summary);
  }
  return out;
}

}  // namespace zsl
