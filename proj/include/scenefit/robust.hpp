#pragma once

#include <stdexcept>

namespace scenefit {

/// Geman–McClure kernel rho(e) = sigma^2 e^2 / (sigma^2 + e^2): quadratic
/// near zero, saturating at sigma^2 so large residuals stop pulling.
struct GemanMcClure {
  double sigma = 1.0;

  explicit GemanMcClure(double sigma_) : sigma(sigma_) {
    if (sigma <= 0) throw std::invalid_argument("GemanMcClure: sigma must be positive");
  }

  double rho(double e) const {
    const double s2 = sigma * sigma;
    const double e2 = e * e;
    return s2 * e2 / (s2 + e2);
  }

  /// d rho / d e = 2 sigma^4 e / (sigma^2 + e^2)^2.
  double drho(double e) const {
    const double s2 = sigma * sigma;
    const double d = s2 + e * e;
    return 2.0 * s2 * s2 * e / (d * d);
  }
};

}  // namespace scenefit
