// SPDX-License-Identifier: Apache-2.0
#include "danet/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "danet/error.hpp"
#include "danet/ops.hpp"
#include "danet/tape.hpp"

namespace danet {

Tensor max_mean_measurement(const Tensor& q, const Tensor& k) {
  if (q.rank() != 2 || k.rank() != 2 || q.dim(1) != k.dim(1)) {
    throw DimensionError("max_mean_measurement: q " + shape_to_string(q.shape()) + " and k " +
                         shape_to_string(k.shape()) + " do not share a feature width");
  }
  const std::size_t lq = q.dim(0), lk = k.dim(0), d = q.dim(1);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  auto qv = q.values();
  auto kv = k.values();
  std::vector<double> out(lq);
  for (std::size_t i = 0; i < lq; ++i) {
    double mx = -INFINITY;
    double total = 0.0;
    for (std::size_t j = 0; j < lk; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += qv[i * d + c] * kv[j * d + c];
      s *= inv_sqrt_d;
      mx = std::max(mx, s);
      total += s;
    }
    // Rounding can leave max - mean a hair below zero when all scores tie.
    out[i] = std::max(0.0, mx - total / static_cast<double>(lk));
  }
  return Tensor({lq}, std::move(out));
}

std::vector<std::size_t> top_u_select(std::span<const double> measure, std::size_t u) {
  if (u > measure.size()) {
    throw ContractError("top_u_select: u = " + std::to_string(u) + " exceeds " +
                        std::to_string(measure.size()) + " queries");
  }
  std::vector<std::size_t> order(measure.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return measure[a] > measure[b]; });
  order.resize(u);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<std::size_t> top_u_select(const Tensor& measure, std::size_t u) {
  return top_u_select(measure.values(), u);
}

namespace {

void check_attention_operands(const Tensor& q, const Tensor& k, const Tensor& v, const char* op) {
  const bool ok = q.rank() == 3 && k.rank() == 3 && v.rank() == 3 && q.dim(0) == k.dim(0) &&
                  k.dim(0) == v.dim(0) && q.dim(2) == k.dim(2) && k.dim(1) == v.dim(1);
  if (!ok) {
    throw DimensionError(std::string(op) + ": incompatible q " + shape_to_string(q.shape()) +
                         ", k " + shape_to_string(k.shape()) + ", v " + shape_to_string(v.shape()));
  }
}

Tensor as_stack(const Tensor& x) {
  if (x.rank() == 3) return x;
  if (x.rank() == 2) return reshape(x, {1, x.dim(0), x.dim(1)});
  throw DimensionError("attention operands must be rank 2 or 3, got " + shape_to_string(x.shape()));
}

}  // namespace

Tensor ssaw_attention(const Tensor& q_in, const Tensor& k_in, const Tensor& v_in, std::size_t u) {
  const bool single = q_in.rank() == 2;
  const Tensor q = as_stack(q_in);
  const Tensor k = as_stack(k_in);
  const Tensor v = as_stack(v_in);
  check_attention_operands(q, k, v, "ssaw_attention");

  const std::size_t n = q.dim(0), lq = q.dim(1), lk = k.dim(1), d = q.dim(2), dv = v.dim(2);
  if (u > lq) {
    throw ContractError("ssaw_attention: u = " + std::to_string(u) + " exceeds " +
                        std::to_string(lq) + " queries");
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  const double inv_lk = 1.0 / static_cast<double>(lk);
  auto qv = q.values();
  auto kv = k.values();
  auto vv = v.values();

  std::vector<double> out(n * lq * dv, 0.0);
  std::vector<double> probs(n * lq * lk, 0.0);
  std::vector<char> selected(n * lq, 0);
  std::vector<double> scores(lq * lk);
  std::vector<double> measure(lq);
  std::vector<double> mean_v(dv);

  for (std::size_t b = 0; b < n; ++b) {
    const double* qb = qv.data() + b * lq * d;
    const double* kb = kv.data() + b * lk * d;
    const double* vb = vv.data() + b * lk * dv;
    for (std::size_t i = 0; i < lq; ++i) {
      double mx = -INFINITY;
      double total = 0.0;
      for (std::size_t j = 0; j < lk; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += qb[i * d + c] * kb[j * d + c];
        s *= inv_sqrt_d;
        scores[i * lk + j] = s;
        mx = std::max(mx, s);
        total += s;
      }
      measure[i] = std::max(0.0, mx - total / static_cast<double>(lk));
    }
    std::fill(mean_v.begin(), mean_v.end(), 0.0);
    for (std::size_t j = 0; j < lk; ++j) {
      for (std::size_t c = 0; c < dv; ++c) mean_v[c] += vb[j * dv + c];
    }
    for (auto& m : mean_v) m *= inv_lk;

    for (std::size_t i : top_u_select(measure, u)) selected[b * lq + i] = 1;

    for (std::size_t i = 0; i < lq; ++i) {
      double* oi = out.data() + (b * lq + i) * dv;
      if (!selected[b * lq + i]) {
        std::copy(mean_v.begin(), mean_v.end(), oi);
        continue;
      }
      double* pi = probs.data() + (b * lq + i) * lk;
      const double* si = scores.data() + i * lk;
      const double mx = *std::max_element(si, si + lk);
      double total = 0.0;
      for (std::size_t j = 0; j < lk; ++j) {
        pi[j] = std::exp(si[j] - mx);
        total += pi[j];
      }
      for (std::size_t j = 0; j < lk; ++j) {
        pi[j] /= total;
        for (std::size_t c = 0; c < dv; ++c) oi[c] += pi[j] * vb[j * dv + c];
      }
    }
  }

  Tensor result({n, lq, dv}, std::move(out));
  if (should_record({&q, &k, &v})) {
    record_op("ssaw_attention", {q, k, v}, result,
              [q, k, v, probs = std::move(probs), selected = std::move(selected), n, lq, lk, d, dv,
               inv_sqrt_d, inv_lk](std::span<const double> g) mutable {
                auto qs = q.values();
                auto ks = k.values();
                auto vs = v.values();
                std::span<double> dq, dk, dvv;
                if (q.requires_grad()) dq = q.grad_accumulator();
                if (k.requires_grad()) dk = k.grad_accumulator();
                if (v.requires_grad()) dvv = v.grad_accumulator();
                std::vector<double> dp(lk);
                for (std::size_t b = 0; b < n; ++b) {
                  for (std::size_t i = 0; i < lq; ++i) {
                    const double* gi = g.data() + (b * lq + i) * dv;
                    if (!selected[b * lq + i]) {
                      if (!dvv.empty()) {
                        for (std::size_t j = 0; j < lk; ++j) {
                          for (std::size_t c = 0; c < dv; ++c) dvv[(b * lk + j) * dv + c] += gi[c] * inv_lk;
                        }
                      }
                      continue;
                    }
                    const double* pi = probs.data() + (b * lq + i) * lk;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < lk; ++j) {
                      double s = 0.0;
                      for (std::size_t c = 0; c < dv; ++c) s += gi[c] * vs[(b * lk + j) * dv + c];
                      dp[j] = s;
                      dot += s * pi[j];
                      if (!dvv.empty()) {
                        for (std::size_t c = 0; c < dv; ++c) dvv[(b * lk + j) * dv + c] += pi[j] * gi[c];
                      }
                    }
                    for (std::size_t j = 0; j < lk; ++j) {
                      const double ds = pi[j] * (dp[j] - dot) * inv_sqrt_d;
                      if (ds == 0.0) continue;
                      if (!dq.empty()) {
                        for (std::size_t c = 0; c < d; ++c) dq[(b * lq + i) * d + c] += ds * ks[(b * lk + j) * d + c];
                      }
                      if (!dk.empty()) {
                        for (std::size_t c = 0; c < d; ++c) dk[(b * lk + j) * d + c] += ds * qs[(b * lq + i) * d + c];
                      }
                    }
                  }
                }
              });
  }
  return single ? reshape(result, {lq, dv}) : result;
}

Tensor scaled_dot_product_attention(const Tensor& q_in, const Tensor& k_in, const Tensor& v_in) {
  const bool single = q_in.rank() == 2;
  const Tensor q = as_stack(q_in);
  const Tensor k = as_stack(k_in);
  const Tensor v = as_stack(v_in);
  check_attention_operands(q, k, v, "scaled_dot_product_attention");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.dim(2)));
  Tensor scores = scale(batched_matmul(q, transpose_last(k)), inv_sqrt_d);
  Tensor out = batched_matmul(softmax(scores, 2), v);
  return single ? reshape(out, {q.dim(1), v.dim(2)}) : out;
}

}  // namespace danet
