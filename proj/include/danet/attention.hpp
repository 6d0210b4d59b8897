// SPDX-License-Identifier: Apache-2.0
//
// Attention kernels operating on per-window, per-head operands.
//
// Operands are either a single window [L x d] or a stack of independent
// windows/heads [N x L x d].
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "danet/tensor.hpp"

namespace danet {

/// Per query: max_j(q_i . k_j / sqrt(d)) - mean_j(q_i . k_j / sqrt(d)).
/// q is [L_q x d], k is [L_k x d]; the result [L_q] is never negative.
Tensor max_mean_measurement(const Tensor& q, const Tensor& k);

/// Indices of the u largest measurements (ties go to the lower index),
/// returned in ascending index order.
std::vector<std::size_t> top_u_select(std::span<const double> measure, std::size_t u);
std::vector<std::size_t> top_u_select(const Tensor& measure, std::size_t u);

/// Sparse self-attention within windows: for each window, the top-u queries
/// by max-mean measurement get softmax(q K^T / sqrt(d)) . V; every other
/// query row is the columnwise mean of V. Selection is recomputed for every
/// leading index (window x head). Differentiable; the selection itself is
/// treated as constant.
Tensor ssaw_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t u);

/// Dense scaled dot-product attention softmax(Q K^T / sqrt(d)) . V, built
/// from the generic differentiable primitives.
Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v);

/// W-MHA kernel: dense attention for every query of every window/head.
inline Tensor w_mha_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  return scaled_dot_product_attention(q, k, v);
}

}  // namespace danet
