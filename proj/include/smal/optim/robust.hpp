#pragma once

#include "smal/common.hpp"

namespace smal {

/// Geman-McClure saturating kernel applied to squared residuals:
/// rho(e) = sigma^2 e / (e + sigma^2), bounded above by sigma^2.
class GemanMcClure {
 public:
  explicit GemanMcClure(double sigma) : sigma2_(sigma * sigma) {
    if (sigma <= 0.0) throw validation_error("robust scale must be positive");
  }

  double value(double squared_residual) const {
    return sigma2_ * squared_residual / (squared_residual + sigma2_);
  }

  /// d rho / d e.
  double derivative(double squared_residual) const {
    const double denom = squared_residual + sigma2_;
    return sigma2_ * sigma2_ / (denom * denom);
  }

  double sigma_squared() const { return sigma2_; }

 private:
  double sigma2_;
};

/// Convenience form mirroring the kernel's definition.
inline std::pair<double, double> geman_mcclure(double squared_residual,
                                               double sigma) {
  GemanMcClure k(sigma);
  return {k.value(squared_residual), k.derivative(squared_residual)};
}

}  // namespace smal
