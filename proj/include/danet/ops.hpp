// SPDX-License-Identifier: Apache-2.0
//
// Differentiable kernels. Every function here is pure in its inputs and
// records a backward rule on the active tape when an input requires grad.
#pragma once

#include <cstddef>
#include <vector>

#include "danet/tensor.hpp"

namespace danet {

enum class Activation { relu, sigmoid };

/// [m x k] . [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);

/// Batched product [N x m x k] . [N x k x n] -> [N x m x n].
Tensor batched_matmul(const Tensor& a, const Tensor& b);

/// Swaps the last two axes (rank 2 or 3).
Tensor transpose_last(const Tensor& x);

/// y = x . W^T + b over the last axis; W is [out x in], b is [out] or undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = Tensor());

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

/// Multiplies each contiguous group of x by one entry of `factors`. The shape
/// of `factors` (trailing unit axes ignored) must be a leading prefix of x's.
Tensor scale_groups(const Tensor& x, const Tensor& factors);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor activation(const Tensor& x, Activation kind);

/// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);

/// Normalizes every last-axis group with its mean and biased variance.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Arithmetic mean over `axes`; the reduced axes are removed.
Tensor global_average_pool(const Tensor& x, const std::vector<std::size_t>& axes);

/// Sum of all entries as a scalar.
Tensor sum(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);

/// General axis permutation: out.shape[i] = x.shape[perm[i]].
Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm);

/// Cyclic rotation along `axis`: out[i] = x[(i + offset) mod extent].
Tensor roll(const Tensor& x, std::size_t axis, long offset);

}  // namespace danet
