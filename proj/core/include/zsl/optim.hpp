#pragma once

#include <functional>

#include "zsl/types.hpp"

namespace zsl {

struct LbfgsOptions {
  int max_iterations = 500;
  int memory = 10;
  double gradient_tolerance = 1e-8;  // on the infinity norm
};

struct LbfgsResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Objective returning f(x) and writing the gradient into `grad`.
using Objective = std::function<double(const Vector& x, Vector& grad)>;

/// Limited-memory BFGS with Armijo backtracking. Deterministic.
LbfgsResult minimize_lbfgs(const Objective& objective, Vector x0, const LbfgsOptions& options = {});

double sigmoid(double z);

/// L2-regularized binary logistic regression; the bias is not regularized.
struct BinaryLogistic {
  Vector weights;
  double bias = 0.0;

  double probability(const Vector& x) const { return sigmoid(weights.dot(x) + bias); }
};

/// Minimizes mean log loss + (reg/2)||w||^2 over labels in {0,1}.
BinaryLogistic fit_binary_logistic(const Matrix& features, const Vector& labels, double reg,
                                   const LbfgsOptions& options = {});

}  // namespace zsl
