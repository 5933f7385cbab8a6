#pragma once

#include <string>
#include <vector>

#include "zsl/types.hpp"

namespace zsl {

/// Scores of every method on every observation (dataset x fold).
/// scores(m, o) is NaN when the cell is missing.
struct ObservationGrid {
  std::vector<std::string> methods;
  std::vector<std::string> observations;
  Matrix scores;  // methods x observations

  ObservationGrid() = default;
  ObservationGrid(std::vector<std::string> methods, std::vector<std::string> observations);

  void set(const std::string& method, const std::string& observation, double score);
  bool complete() const;
};

struct RankMatrix {
  std::vector<std::string> methods;  // ascending mean rank
  Eigen::MatrixXi counts;            // methods x ranks, counts(i, j) = times at rank j+1
  Vector mean_rank;                  // aligned with methods
};

/// Per observation, rank 1 is the highest score; ties go to the method
/// declared first. Throws DataError on an incomplete or empty grid.
RankMatrix rank_matrix(const ObservationGrid& grid);

struct FoldSummary {
  std::string method;
  std::string dataset;
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
  double spread = 0.0;
  std::size_t folds = 0;
};

struct FoldScore {
  std::string method;
  std::string dataset;
  int fold = 0;
  double score = 0.0;
};

/// Min/mean/max over folds per (method, dataset), in first-seen order.
/// Throws DataError when a group has fewer than two folds.
std::vector<FoldSummary> robustness_report(const std::vector<FoldScore>& scores);

}  // namespace zsl
