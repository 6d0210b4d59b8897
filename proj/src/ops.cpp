// SPDX-License-Identifier: Apache-2.0
#include "danet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "danet/error.hpp"
#include "danet/tape.hpp"

namespace danet {

namespace {

// C[m x n] += A[m x k] . B[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[m x n] += A[m x k] . B[n x k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

// C[m x n] += A[k x m]^T . B[k x n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t k, std::size_t m,
             std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * m;
    const double* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = ap[i];
      if (av == 0.0) continue;
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, const char* name, Fwd fwd, Deriv deriv) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  std::transform(xv.begin(), xv.end(), out.begin(), fwd);
  Tensor y(x.shape(), std::move(out));
  if (should_record({&x})) {
    record_op(name, {x}, y, [x, y, deriv](std::span<const double> g) mutable {
      auto dx = x.grad_accumulator();
      auto xs = x.values();
      auto ys = y.values();
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * deriv(xs[i], ys[i]);
    });
  }
  return y;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_to_string(a.shape()) + " by " +
                         shape_to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> c(m * n, 0.0);
  gemm_nn(a.values().data(), b.values().data(), c.data(), m, k, n);
  Tensor out({m, n}, std::move(c));
  if (should_record({&a, &b})) {
    record_op("matmul", {a, b}, out, [a, b, m, k, n](std::span<const double> g) mutable {
      if (a.requires_grad()) gemm_nt(g.data(), b.values().data(), a.grad_accumulator().data(), m, n, k);
      if (b.requires_grad()) gemm_tn(a.values().data(), g.data(), b.grad_accumulator().data(), m, k, n);
    });
  }
  return out;
}

Tensor batched_matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
    throw DimensionError("batched_matmul: cannot multiply " + shape_to_string(a.shape()) + " by " +
                         shape_to_string(b.shape()));
  }
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  std::vector<double> c(batch * m * n, 0.0);
  for (std::size_t i = 0; i < batch; ++i) {
    gemm_nn(a.values().data() + i * m * k, b.values().data() + i * k * n, c.data() + i * m * n, m,
            k, n);
  }
  Tensor out({batch, m, n}, std::move(c));
  if (should_record({&a, &b})) {
    record_op("batched_matmul", {a, b}, out,
              [a, b, batch, m, k, n](std::span<const double> g) mutable {
                for (std::size_t i = 0; i < batch; ++i) {
                  const double* gi = g.data() + i * m * n;
                  if (a.requires_grad()) {
                    gemm_nt(gi, b.values().data() + i * k * n,
                            a.grad_accumulator().data() + i * m * k, m, n, k);
                  }
                  if (b.requires_grad()) {
                    gemm_tn(a.values().data() + i * m * k, gi,
                            b.grad_accumulator().data() + i * k * n, m, k, n);
                  }
                }
              });
  }
  return out;
}

Tensor transpose_last(const Tensor& x) {
  if (x.rank() == 2) return permute(x, {1, 0});
  if (x.rank() == 3) return permute(x, {0, 2, 1});
  throw DimensionError("transpose_last: expected rank 2 or 3, got " + shape_to_string(x.shape()));
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() < 1 || weight.rank() != 2 || x.dim(x.rank() - 1) != weight.dim(1)) {
    throw DimensionError("linear: input " + shape_to_string(x.shape()) +
                         " does not match weight " + shape_to_string(weight.shape()));
  }
  const std::size_t in = weight.dim(1), out_dim = weight.dim(0);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != out_dim)) {
    throw DimensionError("linear: bias " + shape_to_string(bias.shape()) + " does not match weight " +
                         shape_to_string(weight.shape()));
  }
  const std::size_t rows = x.numel() / in;
  std::vector<double> y(rows * out_dim, 0.0);
  if (bias.defined()) {
    auto bv = bias.values();
    for (std::size_t r = 0; r < rows; ++r) std::copy(bv.begin(), bv.end(), y.begin() + r * out_dim);
  }
  gemm_nt(x.values().data(), weight.values().data(), y.data(), rows, in, out_dim);
  Shape out_shape = x.shape();
  out_shape.back() = out_dim;
  Tensor out(std::move(out_shape), std::move(y));
  if (should_record({&x, &weight, &bias})) {
    record_op("linear", {x, weight, bias}, out,
              [x, weight, bias, rows, in, out_dim](std::span<const double> g) mutable {
                if (x.requires_grad()) {
                  gemm_nn(g.data(), weight.values().data(), x.grad_accumulator().data(), rows,
                          out_dim, in);
                }
                if (weight.requires_grad()) {
                  gemm_tn(g.data(), x.values().data(), weight.grad_accumulator().data(), rows,
                          out_dim, in);
                }
                if (bias.defined() && bias.requires_grad()) {
                  auto db = bias.grad_accumulator();
                  for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t o = 0; o < out_dim; ++o) db[o] += g[r * out_dim + o];
                  }
                }
              });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> c(av.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = av[i] + bv[i];
  Tensor out(a.shape(), std::move(c));
  if (should_record({&a, &b})) {
    record_op("add", {a, b}, out, [a, b](std::span<const double> g) mutable {
      if (a.requires_grad()) {
        auto da = a.grad_accumulator();
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
      }
      if (b.requires_grad()) {
        auto db = b.grad_accumulator();
        for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i];
      }
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> c(av.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = av[i] - bv[i];
  Tensor out(a.shape(), std::move(c));
  if (should_record({&a, &b})) {
    record_op("sub", {a, b}, out, [a, b](std::span<const double> g) mutable {
      if (a.requires_grad()) {
        auto da = a.grad_accumulator();
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
      }
      if (b.requires_grad()) {
        auto db = b.grad_accumulator();
        for (std::size_t i = 0; i < g.size(); ++i) db[i] -= g[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> c(av.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = av[i] * bv[i];
  Tensor out(a.shape(), std::move(c));
  if (should_record({&a, &b})) {
    record_op("mul", {a, b}, out, [a, b](std::span<const double> g) mutable {
      if (a.requires_grad()) {
        auto da = a.grad_accumulator();
        auto bs = b.values();
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bs[i];
      }
      if (b.requires_grad()) {
        auto db = b.grad_accumulator();
        auto as = a.values();
        for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * as[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, "scale", [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor scale_groups(const Tensor& x, const Tensor& factors) {
  Shape prefix = factors.shape();
  while (!prefix.empty() && prefix.back() == 1) prefix.pop_back();
  const Shape& xs = x.shape();
  bool ok = prefix.size() <= xs.size() && std::equal(prefix.begin(), prefix.end(), xs.begin());
  if (!ok && factors.numel() == 1) ok = true;
  if (!ok) {
    throw DimensionError("scale_groups: factors " + shape_to_string(factors.shape()) +
                         " are not a prefix of " + shape_to_string(xs));
  }
  const std::size_t groups = factors.numel();
  const std::size_t width = x.numel() / groups;
  auto xv = x.values();
  auto fv = factors.values();
  std::vector<double> y(xv.size());
  for (std::size_t gi = 0; gi < groups; ++gi) {
    for (std::size_t j = 0; j < width; ++j) y[gi * width + j] = xv[gi * width + j] * fv[gi];
  }
  Tensor out(xs, std::move(y));
  if (should_record({&x, &factors})) {
    record_op("scale_groups", {x, factors}, out,
              [x, factors, groups, width](std::span<const double> g) mutable {
                auto xs2 = x.values();
                auto fs = factors.values();
                if (x.requires_grad()) {
                  auto dx = x.grad_accumulator();
                  for (std::size_t gi = 0; gi < groups; ++gi) {
                    for (std::size_t j = 0; j < width; ++j) {
                      dx[gi * width + j] += g[gi * width + j] * fs[gi];
                    }
                  }
                }
                if (factors.requires_grad()) {
                  auto df = factors.grad_accumulator();
                  for (std::size_t gi = 0; gi < groups; ++gi) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < width; ++j) acc += g[gi * width + j] * xs2[gi * width + j];
                    df[gi] += acc;
                  }
                }
              });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor activation(const Tensor& x, Activation kind) {
  switch (kind) {
    case Activation::relu:
      return relu(x);
    case Activation::sigmoid:
      return sigmoid(x);
  }
  throw ContractError("activation: unknown kind");
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " +
                         shape_to_string(x.shape()));
  }
  const AxisSplit s = split_at(x.shape(), axis);
  auto xv = x.values();
  std::vector<double> y(xv.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t j = 0; j < s.inner; ++j) {
      const std::size_t base = o * s.extent * s.inner + j;
      double mx = xv[base];
      for (std::size_t i = 1; i < s.extent; ++i) mx = std::max(mx, xv[base + i * s.inner]);
      double total = 0.0;
      for (std::size_t i = 0; i < s.extent; ++i) {
        const double e = std::exp(xv[base + i * s.inner] - mx);
        y[base + i * s.inner] = e;
        total += e;
      }
      for (std::size_t i = 0; i < s.extent; ++i) y[base + i * s.inner] /= total;
    }
  }
  Tensor out(x.shape(), std::move(y));
  if (should_record({&x})) {
    record_op("softmax", {x}, out, [x, out, s](std::span<const double> g) mutable {
      auto dx = x.grad_accumulator();
      auto ys = out.values();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t j = 0; j < s.inner; ++j) {
          const std::size_t base = o * s.extent * s.inner + j;
          double dot = 0.0;
          for (std::size_t i = 0; i < s.extent; ++i) {
            dot += g[base + i * s.inner] * ys[base + i * s.inner];
          }
          for (std::size_t i = 0; i < s.extent; ++i) {
            const std::size_t idx = base + i * s.inner;
            dx[idx] += ys[idx] * (g[idx] - dot);
          }
        }
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() < 1) throw DimensionError("layer_norm: scalar input");
  const std::size_t width = x.dim(x.rank() - 1);
  if (gamma.shape() != Shape{width} || beta.shape() != Shape{width}) {
    throw DimensionError("layer_norm: gamma " + shape_to_string(gamma.shape()) + " / beta " +
                         shape_to_string(beta.shape()) + " do not match input " +
                         shape_to_string(x.shape()));
  }
  if (!(eps >= 0.0)) throw ContractError("layer_norm: eps must be non-negative");
  const std::size_t groups = x.numel() / width;
  auto xv = x.values();
  auto gv = gamma.values();
  auto bv = beta.values();
  std::vector<double> xhat(xv.size());
  std::vector<double> rstd(groups);
  std::vector<double> y(xv.size());
  for (std::size_t r = 0; r < groups; ++r) {
    const double* row = xv.data() + r * width;
    double mean = 0.0;
    for (std::size_t i = 0; i < width; ++i) mean += row[i];
    mean /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t i = 0; i < width; ++i) var += (row[i] - mean) * (row[i] - mean);
    var /= static_cast<double>(width);
    const double denom = var + eps;
    if (!(denom > 0.0)) throw ContractError("layer_norm: zero variance with eps = 0");
    rstd[r] = 1.0 / std::sqrt(denom);
    for (std::size_t i = 0; i < width; ++i) {
      const std::size_t idx = r * width + i;
      xhat[idx] = (row[i] - mean) * rstd[r];
      y[idx] = xhat[idx] * gv[i] + bv[i];
    }
  }
  Tensor out(x.shape(), std::move(y));
  if (should_record({&x, &gamma, &beta})) {
    record_op("layer_norm", {x, gamma, beta}, out,
              [x, gamma, beta, xhat = std::move(xhat), rstd = std::move(rstd), groups,
               width](std::span<const double> g) mutable {
                auto gs = gamma.values();
                if (gamma.requires_grad()) {
                  auto dg = gamma.grad_accumulator();
                  for (std::size_t idx = 0; idx < g.size(); ++idx) dg[idx % width] += g[idx] * xhat[idx];
                }
                if (beta.requires_grad()) {
                  auto db = beta.grad_accumulator();
                  for (std::size_t idx = 0; idx < g.size(); ++idx) db[idx % width] += g[idx];
                }
                if (!x.requires_grad()) return;
                auto dx = x.grad_accumulator();
                const double inv_n = 1.0 / static_cast<double>(width);
                for (std::size_t r = 0; r < groups; ++r) {
                  double mean_d = 0.0;
                  double mean_dx = 0.0;
                  for (std::size_t i = 0; i < width; ++i) {
                    const std::size_t idx = r * width + i;
                    const double d = g[idx] * gs[i];
                    mean_d += d;
                    mean_dx += d * xhat[idx];
                  }
                  mean_d *= inv_n;
                  mean_dx *= inv_n;
                  for (std::size_t i = 0; i < width; ++i) {
                    const std::size_t idx = r * width + i;
                    const double d = g[idx] * gs[i];
                    dx[idx] += rstd[r] * (d - mean_d - xhat[idx] * mean_dx);
                  }
                }
              });
  }
  return out;
}

Tensor global_average_pool(const Tensor& x, const std::vector<std::size_t>& axes) {
  const Shape& xs = x.shape();
  std::vector<bool> reduced(xs.size(), false);
  for (auto a : axes) {
    if (a >= xs.size()) {
      throw DimensionError("global_average_pool: axis " + std::to_string(a) + " out of range for " +
                           shape_to_string(xs));
    }
    if (reduced[a]) throw ContractError("global_average_pool: duplicate axis " + std::to_string(a));
    reduced[a] = true;
  }
  Shape out_shape;
  std::size_t count = 1;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (reduced[i]) {
      count *= xs[i];
    } else {
      out_shape.push_back(xs[i]);
    }
  }
  // Output flat index for every input element.
  const std::size_t n = x.numel();
  std::vector<std::size_t> target(n);
  {
    std::vector<std::size_t> idx(xs.size(), 0);
    for (std::size_t flat = 0; flat < n; ++flat) {
      std::size_t t = 0;
      for (std::size_t a = 0; a < xs.size(); ++a) {
        if (!reduced[a]) t = t * xs[a] + idx[a];
      }
      target[flat] = t;
      for (std::size_t a = xs.size(); a-- > 0;) {
        if (++idx[a] < xs[a]) break;
        idx[a] = 0;
      }
    }
  }
  auto xv = x.values();
  std::vector<double> y(shape_numel(out_shape), 0.0);
  for (std::size_t flat = 0; flat < n; ++flat) y[target[flat]] += xv[flat];
  const double inv = 1.0 / static_cast<double>(count);
  for (auto& v : y) v *= inv;
  Tensor out(std::move(out_shape), std::move(y));
  if (should_record({&x})) {
    record_op("global_average_pool", {x}, out,
              [x, target = std::move(target), inv](std::span<const double> g) mutable {
                auto dx = x.grad_accumulator();
                for (std::size_t flat = 0; flat < dx.size(); ++flat) dx[flat] += g[target[flat]] * inv;
              });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  auto xv = x.values();
  Tensor out = Tensor::scalar(std::accumulate(xv.begin(), xv.end(), 0.0));
  if (should_record({&x})) {
    record_op("sum", {x}, out, [x](std::span<const double> g) mutable {
      for (auto& d : x.grad_accumulator()) d += g[0];
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(x.shape()) + " as " +
                         shape_to_string(shape));
  }
  auto xv = x.values();
  Tensor out(std::move(shape), std::vector<double>(xv.begin(), xv.end()));
  if (should_record({&x})) {
    record_op("reshape", {x}, out, [x](std::span<const double> g) mutable {
      auto dx = x.grad_accumulator();
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
    });
  }
  return out;
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm) {
  const Shape& xs = x.shape();
  const std::size_t rank = xs.size();
  if (perm.size() != rank) throw DimensionError("permute: permutation rank mismatch");
  std::vector<bool> seen(rank, false);
  for (auto p : perm) {
    if (p >= rank || seen[p]) throw ContractError("permute: invalid permutation");
    seen[p] = true;
  }
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t a = rank; a-- > 1;) in_stride[a - 1] = in_stride[a] * xs[a];
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = xs[perm[i]];

  const std::size_t n = x.numel();
  std::vector<std::size_t> source(n);
  {
    std::vector<std::size_t> idx(rank, 0);
    for (std::size_t flat = 0; flat < n; ++flat) {
      std::size_t s = 0;
      for (std::size_t i = 0; i < rank; ++i) s += idx[i] * in_stride[perm[i]];
      source[flat] = s;
      for (std::size_t a = rank; a-- > 0;) {
        if (++idx[a] < out_shape[a]) break;
        idx[a] = 0;
      }
    }
  }
  auto xv = x.values();
  std::vector<double> y(n);
  for (std::size_t flat = 0; flat < n; ++flat) y[flat] = xv[source[flat]];
  Tensor out(std::move(out_shape), std::move(y));
  if (should_record({&x})) {
    record_op("permute", {x}, out, [x, source = std::move(source)](std::span<const double> g) mutable {
      auto dx = x.grad_accumulator();
      for (std::size_t flat = 0; flat < g.size(); ++flat) dx[source[flat]] += g[flat];
    });
  }
  return out;
}

Tensor roll(const Tensor& x, std::size_t axis, long offset) {
  if (axis >= x.rank()) {
    throw DimensionError("roll: axis " + std::to_string(axis) + " out of range for " +
                         shape_to_string(x.shape()));
  }
  const AxisSplit s = split_at(x.shape(), axis);
  const long len = static_cast<long>(s.extent);
  const std::size_t shift = static_cast<std::size_t>(((offset % len) + len) % len);
  auto xv = x.values();
  std::vector<double> y(xv.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.extent; ++i) {
      const std::size_t src = (i + shift) % s.extent;
      const double* from = xv.data() + (o * s.extent + src) * s.inner;
      std::copy(from, from + s.inner, y.begin() + static_cast<std::ptrdiff_t>((o * s.extent + i) * s.inner));
    }
  }
  Tensor out(x.shape(), std::move(y));
  if (should_record({&x})) {
    record_op("roll", {x}, out, [x, s, shift](std::span<const double> g) mutable {
      auto dx = x.grad_accumulator();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.extent; ++i) {
          const std::size_t src = (i + shift) % s.extent;
          for (std::size_t j = 0; j < s.inner; ++j) {
            dx[(o * s.extent + src) * s.inner + j] += g[(o * s.extent + i) * s.inner + j];
          }
        }
      }
    });
  }
  return out;
}

}  // namespace danet
