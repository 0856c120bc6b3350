#include "scenefit/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace scenefit {

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kGradientTol: return "gradient_tolerance";
    case StopReason::kValueTol: return "value_tolerance";
    case StopReason::kMaxIterations: return "max_iterations";
    case StopReason::kNonFinite: return "non_finite";
    case StopReason::kLineSearchFailed: return "line_search_failed";
  }
  return "unknown";
}

namespace {

bool finite(double value, const Eigen::VectorXd& grad) {
  return std::isfinite(value) && grad.allFinite();
}

// Cubic minimizer of the interpolant through (a, fa, ga) and (b, fb);
// falls back to bisection when the fit is degenerate or outside brackets.
double interpolate_step(double a, double fa, double ga, double b, double fb, double gb,
                        bool have_gb) {
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  double candidate = std::numeric_limits<double>::quiet_NaN();
  if (have_gb) {
    const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - ga * gb;
    if (disc >= 0) {
      const double d2 = std::copysign(std::sqrt(disc), b - a);
      candidate = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
    }
  } else {
    // Quadratic through fa, ga, fb; exact for quadratic objectives.
    const double denom = 2.0 * (fb - fa - ga * (b - a));
    if (denom != 0.0) candidate = a - ga * (b - a) * (b - a) / denom;
  }
  if (!std::isfinite(candidate) || candidate <= lo || candidate >= hi)
    return 0.5 * (lo + hi);
  return candidate;
}

struct LineSearchResult {
  double step = 0;
  double value = 0;
  bool ok = false;
  int evals = 0;
};

// Strong-Wolfe line search (bracket + zoom, Nocedal & Wright alg. 3.5/3.6)
// over phi(a) = f(x + a d).
class WolfeSearch {
 public:
  WolfeSearch(const Objective& objective, const Eigen::VectorXd& x, const Eigen::VectorXd& d,
              double f0, double g0, const QuasiNewtonConfig& config)
      : objective_(objective), x_(x), d_(d), f0_(f0), g0_(g0), config_(config),
        x_try_(x.size()), grad_try_(x.size()) {}

  LineSearchResult run(double first_step) {
    LineSearchResult result;
    double a_prev = 0, f_prev = f0_, g_prev = g0_;
    double a = first_step;
    for (int iter = 0; iter < config_.max_line_search; ++iter) {
      const double f = phi(a);
      ++result.evals;
      if (!std::isfinite(f)) {  // shrink back into the finite region
        a = 0.5 * (a_prev + a);
        continue;
      }
      if (f > f0_ + config_.c1 * a * g0_ || (result.evals > 1 && f >= f_prev)) {
        return zoom(a_prev, f_prev, g_prev, a, f, result);
      }
      const double g = dphi();
      if (std::abs(g) <= -config_.c2 * g0_) {
        result.step = a;
        result.value = f;
        result.ok = true;
        return result;
      }
      if (g >= 0) {
        return zoom(a, f, g, a_prev, f_prev, result);
      }
      a_prev = a;
      f_prev = f;
      g_prev = g;
      a *= 2.0;
    }
    return result;
  }

  const Eigen::VectorXd& last_gradient() const { return grad_try_; }

 private:
  double phi(double a) {
    x_try_ = x_ + a * d_;
    return objective_(x_try_, grad_try_);
  }
  double dphi() const { return grad_try_.dot(d_); }

  LineSearchResult zoom(double lo, double f_lo, double g_lo, double hi, double f_hi,
                        LineSearchResult result) {
    bool have_g_hi = false;
    double g_hi = 0;
    for (int iter = 0; iter < config_.max_line_search; ++iter) {
      const double a = interpolate_step(lo, f_lo, g_lo, hi, f_hi, g_hi, have_g_hi);
      const double f = phi(a);
      ++result.evals;
      if (!std::isfinite(f) || f > f0_ + config_.c1 * a * g0_ || f >= f_lo) {
        hi = a;
        f_hi = f;
        have_g_hi = false;
      } else {
        const double g = dphi();
        if (std::abs(g) <= -config_.c2 * g0_) {
          result.step = a;
          result.value = f;
          result.ok = true;
          return result;
        }
        if (g * (hi - lo) >= 0) {
          hi = lo;
          f_hi = f_lo;
          g_hi = g_lo;
          have_g_hi = true;
        }
        lo = a;
        f_lo = f;
        g_lo = g;
      }
      if (std::abs(hi - lo) < 1e-16) break;
    }
    // Accept a plain Armijo point if the curvature condition is out of reach.
    if (f_lo < f0_) {
      phi(lo);
      result.step = lo;
      result.value = f_lo;
      result.ok = true;
    }
    return result;
  }

  const Objective& objective_;
  const Eigen::VectorXd& x_;
  const Eigen::VectorXd& d_;
  double f0_, g0_;
  const QuasiNewtonConfig& config_;
  Eigen::VectorXd x_try_, grad_try_;
};

}  // namespace

Eigen::VectorXd minimize_quasi_newton(const Objective& objective, Eigen::VectorXd x,
                                      const QuasiNewtonConfig& config,
                                      OptimizerReport* report) {
  OptimizerReport local;
  OptimizerReport& rep = report ? *report : local;
  rep = OptimizerReport{};

  const auto n = x.size();
  Eigen::VectorXd grad(n);
  double f = objective(x, grad);
  rep.trace.push_back(f);
  rep.final_value = f;
  if (!finite(f, grad)) {
    rep.reason = StopReason::kNonFinite;
    return x;
  }

  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> history;  // (s, y)
  Eigen::VectorXd d(n), alpha_buf;

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    if (grad.lpNorm<Eigen::Infinity>() <= config.grad_tol) {
      rep.reason = StopReason::kGradientTol;
      break;
    }

    // Two-loop recursion for d = -H g.
    d = -grad;
    const int m = static_cast<int>(history.size());
    alpha_buf.resize(m);
    for (int i = m - 1; i >= 0; --i) {
      const auto& [s, y] = history[i];
      alpha_buf[i] = s.dot(d) / y.dot(s);
      d -= alpha_buf[i] * y;
    }
    if (m > 0) {
      const auto& [s, y] = history.back();
      d *= s.dot(y) / y.dot(y);
    }
    for (int i = 0; i < m; ++i) {
      const auto& [s, y] = history[i];
      const double beta = y.dot(d) / y.dot(s);
      d += (alpha_buf[i] - beta) * s;
    }

    double g0 = grad.dot(d);
    if (g0 >= 0) {  // stale curvature; restart from steepest descent
      history.clear();
      d = -grad;
      g0 = grad.dot(d);
    }

    const double first_step =
        history.empty() ? std::min(1.0, 1.0 / std::max(1.0, grad.lpNorm<1>())) : 1.0;
    WolfeSearch search(objective, x, d, f, g0, config);
    const LineSearchResult ls = search.run(first_step);
    if (!ls.ok) {
      rep.reason = StopReason::kLineSearchFailed;
      break;
    }

    const Eigen::VectorXd x_new = x + ls.step * d;
    const Eigen::VectorXd& grad_new = search.last_gradient();
    if (!finite(ls.value, grad_new)) {
      rep.reason = StopReason::kNonFinite;
      break;
    }

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = grad_new - grad;
    if (y.dot(s) > 1e-12 * y.norm() * s.norm()) {
      history.emplace_back(s, y);
      if (static_cast<int>(history.size()) > config.history) history.pop_front();
    }

    const double f_prev = f;
    x = x_new;
    grad = grad_new;
    f = ls.value;
    ++rep.iterations;
    rep.trace.push_back(f);

    if (std::abs(f_prev - f) <= config.value_tol * std::max(1.0, std::abs(f_prev))) {
      rep.reason = StopReason::kValueTol;
      break;
    }
    if (iter + 1 == config.max_iterations) rep.reason = StopReason::kMaxIterations;
  }

  rep.final_value = f;
  return x;
}

Eigen::VectorXd minimize_adaptive(const Objective& objective, Eigen::VectorXd x,
                                  const AdamConfig& config, OptimizerReport* report) {
  OptimizerReport local;
  OptimizerReport& rep = report ? *report : local;
  rep = OptimizerReport{};

  const auto n = x.size();
  Eigen::VectorXd grad(n);
  double f = objective(x, grad);
  rep.trace.push_back(f);
  if (!finite(f, grad)) {
    rep.reason = StopReason::kNonFinite;
    rep.final_value = f;
    return x;
  }

  Eigen::VectorXd best_x = x;
  double best_f = f;
  Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);

  for (int t = 1; t <= config.iterations; ++t) {
    m = config.beta1 * m + (1.0 - config.beta1) * grad;
    v = config.beta2 * v + (1.0 - config.beta2) * grad.cwiseProduct(grad).eval();
    const double bias1 = 1.0 - std::pow(config.beta1, t);
    const double bias2 = 1.0 - std::pow(config.beta2, t);
    Eigen::VectorXd denom = (v / bias2).cwiseSqrt();
    denom.array() += config.epsilon;
    x -= (config.learning_rate / bias1) * m.cwiseQuotient(denom);

    f = objective(x, grad);
    ++rep.iterations;
    rep.trace.push_back(f);
    if (!finite(f, grad)) {
      rep.reason = StopReason::kNonFinite;
      rep.final_value = best_f;
      return best_x;
    }
    if (f < best_f) {
      best_f = f;
      best_x = x;
    }
  }

  rep.reason = StopReason::kMaxIterations;
  rep.final_value = best_f;
  return best_x;
}

}  // namespace scenefit
