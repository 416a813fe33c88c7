#pragma once

#include "smal/optim/energy.hpp"

namespace smal {

/// Central-difference check of an analytic gradient. Returns the maximum
/// relative error over coordinates, with max(1, |analytic|) denominators.
double check_gradient(const EnergyFunction& f, const VecX& x, double eps);

}  // namespace smal
