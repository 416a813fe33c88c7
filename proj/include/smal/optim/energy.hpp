#pragma once

#include <functional>

#include "smal/common.hpp"

namespace smal {

/// A smooth scalar objective over a flat parameter vector. evaluate must be
/// deterministic for a fixed input and fill grad (resized by the caller).
struct EnergyFunction {
  int dimension = 0;
  std::function<double(const VecX& x, VecX& grad)> evaluate;
};

inline EnergyFunction make_energy(
    int dim, std::function<double(const VecX&, VecX&)> fn) {
  return EnergyFunction{dim, std::move(fn)};
}

/// View of an energy over a subset of its coordinates; the rest stay at
/// `base`. Used for staged optimization schedules.
inline EnergyFunction restrict_energy(EnergyFunction full, VecX base,
                                      std::vector<int> free_indices) {
  const int sub_dim = static_cast<int>(free_indices.size());
  return make_energy(
      sub_dim,
      [full = std::move(full), base = std::move(base),
       idx = std::move(free_indices)](const VecX& x, VecX& grad) mutable {
        VecX full_x = base;
        for (size_t i = 0; i < idx.size(); ++i) full_x[idx[i]] = x[i];
        VecX full_grad(full.dimension);
        const double value = full.evaluate(full_x, full_grad);
        grad.resize(static_cast<int>(idx.size()));
        for (size_t i = 0; i < idx.size(); ++i) grad[i] = full_grad[idx[i]];
        return value;
      });
}

}  // namespace smal
