#include "zsl/optim.hpp"

#include <cmath>
#include <deque>

namespace zsl {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

LbfgsResult minimize_lbfgs(const Objective& objective, Vector x0, const LbfgsOptions& options) {
  LbfgsResult result;
  result.x = std::move(x0);
  Vector grad(result.x.size());
  double f = objective(result.x, grad);

  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;
  Vector grad_new(result.x.size());

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter;
    if (grad.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      result.converged = true;
      break;
    }

    // Two-loop recursion.
    Vector q = grad;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    Vector direction = -q;
    double slope = grad.dot(direction);
    if (!(slope < 0.0)) {
      direction = -grad;
      slope = -grad.squaredNorm();
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    double step = s_hist.empty() ? std::min(1.0, 1.0 / grad.norm()) : 1.0;
    Vector x_new;
    double f_new = f;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      x_new = result.x + step * direction;
      f_new = objective(x_new, grad_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No decrease available at machine precision.
      result.converged = true;
      break;
    }

    Vector s = x_new - result.x;
    Vector y = grad_new - grad;
    const double sy = s.dot(y);
    if (sy > 1e-12) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > options.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    result.x = std::move(x_new);
    grad.swap(grad_new);
    f = f_new;
    result.iterations = iter + 1;
  }
  result.value = f;
  return result;
}

BinaryLogistic fit_binary_logistic(const Matrix& features, const Vector& labels, double reg,
                                   const LbfgsOptions& options) {
  const Index n = features.rows();
  const Index d = features.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  // Parameters: [w (d), b].
  auto objective = [&](const Vector& params, Vector& grad) {
    const auto w = params.head(d);
    const double b = params[d];
    const Vector z = (features * w).array() + b;
    double loss = 0.0;
    Vector residual(n);
    for (Index i = 0; i < n; ++i) {
      // log(1 + e^z) - y z, computed stably.
      const double zi = z[i];
      loss += (zi > 0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi))) - labels[i] * zi;
      residual[i] = sigmoid(zi) - labels[i];
    }
    grad.resize(d + 1);
    grad.head(d) = inv_n * (features.transpose() * residual) + reg * w;
    grad[d] = inv_n * residual.sum();
    return inv_n * loss + 0.5 * reg * w.squaredNorm();
  };

  const LbfgsResult fit = minimize_lbfgs(objective, Vector::Zero(d + 1), options);
  BinaryLogistic model;
  model.weights = fit.x.head(d);
  model.bias = fit.x[d];
  return model;
}

}  // namespace zsl
