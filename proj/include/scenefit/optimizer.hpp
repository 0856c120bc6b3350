#pragma once

#include <Eigen/Core>

#include <functional>
#include <string>
#include <vector>

namespace scenefit {

/// Objective contract: fill `grad` (same length as x) and return the value.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

enum class StopReason {
  kGradientTol,
  kValueTol,
  kMaxIterations,
  kNonFinite,
  kLineSearchFailed,
};

std::string to_string(StopReason reason);

struct OptimizerReport {
  int iterations = 0;
  double final_value = 0;
  std::vector<double> trace;  // objective at x0 and after each iteration
  StopReason reason = StopReason::kMaxIterations;
};

struct QuasiNewtonConfig {
  int max_iterations = 200;
  int history = 10;       // L-BFGS memory
  double c1 = 1e-4;       // sufficient decrease
  double c2 = 0.9;        // strong curvature
  double grad_tol = 1e-8;
  double value_tol = 1e-12;
  int max_line_search = 40;
};

/// Limited-memory quasi-Newton descent with a strong-Wolfe line search.
/// The accepted-iterate trace is non-increasing.
Eigen::VectorXd minimize_quasi_newton(const Objective& objective, Eigen::VectorXd x0,
                                      const QuasiNewtonConfig& config,
                                      OptimizerReport* report = nullptr);

struct AdamConfig {
  int iterations = 300;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment first-order descent over a fixed iteration budget.
/// Returns the best iterate visited, so the result never exceeds the
/// starting value.
Eigen::VectorXd minimize_adaptive(const Objective& objective, Eigen::VectorXd x0,
                                  const AdamConfig& config,
                                  OptimizerReport* report = nullptr);

}  // namespace scenefit
