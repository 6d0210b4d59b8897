// SPDX-License-Identifier: Apache-2.0
#include "danet/finite_difference.hpp"

#include <algorithm>
#include <cmath>

#include "danet/error.hpp"

namespace danet {

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                  double h) {
  Tensor probe = x.clone();
  return finite_difference_gradient_inplace([&] { return f(probe); }, probe, h);
}

Tensor finite_difference_gradient_inplace(const std::function<double()>& f, Tensor& x, double h) {
  if (!(h > 0.0)) throw ContractError("finite_difference_gradient: step must be positive");
  auto values = x.mutable_values();
  std::vector<double> grad(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double original = values[i];
    values[i] = original + h;
    const double up = f();
    values[i] = original - h;
    const double down = f();
    values[i] = original;
    grad[i] = (up - down) / (2.0 * h);
  }
  return Tensor(x.shape(), std::move(grad));
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

double max_relative_error(const Tensor& analytic, const Tensor& numeric) {
  if (analytic.shape() != numeric.shape()) {
    throw DimensionError("max_relative_error: " + shape_to_string(analytic.shape()) + " vs " +
                         shape_to_string(numeric.shape()));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.numel(); ++i) {
    worst = std::max(worst, relative_error(analytic[i], numeric[i]));
  }
  return worst;
}

}  // namespace danet
