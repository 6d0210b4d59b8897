// SPDX-License-Identifier: Apache-2.0
//
// Central-difference gradient oracle, independent of the tape.
#pragma once

#include <functional>

#include "danet/tensor.hpp"

namespace danet {

inline constexpr double kDefaultFiniteDifferenceStep = 1e-5;

/// (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate of x.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                  double h = kDefaultFiniteDifferenceStep);

/// Same, but perturbs `x` in place and calls `f()` (for parameters captured
/// by reference inside f). `x` is restored bit-exactly afterwards.
Tensor finite_difference_gradient_inplace(const std::function<double()>& f, Tensor& x,
                                          double h = kDefaultFiniteDifferenceStep);

/// |a - f| / max(|a|, |f|, 1e-8)
double relative_error(double analytic, double numeric);

/// Largest relative_error over corresponding entries.
double max_relative_error(const Tensor& analytic, const Tensor& numeric);

}  // namespace danet
