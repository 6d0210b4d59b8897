// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "danet/attention.hpp"
#include "danet/error.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace danet;
using danet::testing::max_abs_diff;
using danet::testing::random_tensor;

namespace {

// Plain-loop attention for one query row; independent of the library kernels.
std::vector<double> brute_force_row(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t n,
                                    std::size_t row) {
  const std::size_t lk = k.dim(1), d = q.dim(2), dv = v.dim(2);
  std::vector<double> scores(lk);
  double mx = -1e300;
  for (std::size_t j = 0; j < lk; ++j) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += q.at({n, row, c}) * k.at({n, j, c});
    scores[j] = s / std::sqrt(static_cast<double>(d));
    mx = std::max(mx, scores[j]);
  }
  double z = 0.0;
  for (auto& s : scores) z += (s = std::exp(s - mx));
  std::vector<double> out(dv, 0.0);
  for (std::size_t j = 0; j < lk; ++j) {
    for (std::size_t c = 0; c < dv; ++c) out[c] += scores[j] / z * v.at({n, j, c});
  }
  return out;
}

std::vector<double> column_mean(const Tensor& v, std::size_t n) {
  std::vector<double> m(v.dim(2), 0.0);
  for (std::size_t j = 0; j < v.dim(1); ++j) {
    for (std::size_t c = 0; c < v.dim(2); ++c) m[c] += v.at({n, j, c}) / static_cast<double>(v.dim(1));
  }
  return m;
}

}  // namespace

TEST_CASE("max-mean measurement examples") {
  const Tensor q = Tensor::from_rows({{1.0, 0.0}});
  const Tensor k_equal = Tensor::from_rows({{0.0, 1.0}, {0.0, -1.0}, {0.0, 3.0}});
  CHECK(max_mean_measurement(q, k_equal)[0] == 0.0);

  // d = 1 so the scaled scores are the raw products 1 and 3.
  const Tensor m = max_mean_measurement(Tensor::from_rows({{1.0}}), Tensor::from_rows({{1.0}, {3.0}}));
  CHECK(m[0] == doctest::Approx(1.0).epsilon(1e-15));

  Rng rng(1);
  const Tensor single = max_mean_measurement(random_tensor(rng, {4, 3}), random_tensor(rng, {1, 3}));
  for (double v : single.values()) CHECK(v == 0.0);
  CHECK_THROWS_AS(max_mean_measurement(random_tensor(rng, {4, 3}), random_tensor(rng, {4, 2})), DimensionError);
}

TEST_CASE("max-mean measurement is never negative") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const Tensor m = max_mean_measurement(random_tensor(rng, {6, 4}, 0.0, 3.0), random_tensor(rng, {5, 4}));
    for (double v : m.values()) CHECK(v >= 0.0);
  }
}

TEST_CASE("top-u selection examples") {
  const std::vector<double> m{0.5, 1.2, 0.1};
  CHECK(top_u_select(m, 3) == std::vector<std::size_t>{0, 1, 2});
  CHECK(top_u_select(m, 1) == std::vector<std::size_t>{1});
  CHECK(top_u_select(m, 2) == std::vector<std::size_t>{0, 1});
  CHECK(top_u_select(std::vector<double>{0.7, 0.7}, 1) == std::vector<std::size_t>{0});
  CHECK(top_u_select(std::vector<double>{0.1, 0.9, 0.9, 0.9}, 2) == std::vector<std::size_t>{1, 2});
  CHECK(top_u_select(m, 0).empty());
  CHECK_THROWS_AS(top_u_select(m, 4), ContractError);
}

TEST_CASE("W-MHA kernel examples") {
  Rng rng(2);
  const Tensor q = random_tensor(rng, {1, 3, 2});
  const Tensor v1 = Tensor({1, 1, 2}, std::vector<double>{4.0, -2.0});
  const Tensor lone = w_mha_attention(q, random_tensor(rng, {1, 1, 2}), v1);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(lone.at({0, i, 0}) - 4.0) < 1e-15);
    CHECK(std::abs(lone.at({0, i, 1}) + 2.0) < 1e-15);
  }

  const Tensor v = random_tensor(rng, {1, 4, 3});
  const Tensor uniform = w_mha_attention(Tensor({1, 2, 3}, 0.0), random_tensor(rng, {1, 4, 3}), v);
  const auto mean = column_mean(v, 0);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(uniform.at({0, i, c}) - mean[c]) < 1e-12);
  }

  // Two blocks, d = 1: scores for q = ln 3 against k = {0, 1} are {0, ln 3},
  // giving weights {1/4, 3/4}.
  const Tensor hq({1, 1, 1}, std::vector<double>{std::log(3.0)});
  const Tensor hk({1, 2, 1}, std::vector<double>{0.0, 1.0});
  const Tensor hv({1, 2, 1}, std::vector<double>{8.0, 4.0});
  CHECK(std::abs(w_mha_attention(hq, hk, hv)[0] - 5.0) < 1e-9);
}

TEST_CASE("SSAW with u equal to the window reproduces W-MHA") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    for (std::size_t w : {2, 4, 8, 64}) {
      Rng rng(seed * 100 + w);
      const Tensor q = random_tensor(rng, {3, w, 4});
      const Tensor k = random_tensor(rng, {3, w, 4});
      const Tensor v = random_tensor(rng, {3, w, 4});
      CHECK(max_abs_diff(ssaw_attention(q, k, v, w), w_mha_attention(q, k, v)) < 1e-9);
    }
  }
}

TEST_CASE("SSAW with u = 0 emits mean(V) everywhere") {
  Rng rng(4);
  const Tensor v = random_tensor(rng, {2, 5, 3});
  const Tensor out = ssaw_attention(random_tensor(rng, {2, 5, 3}), random_tensor(rng, {2, 5, 3}), v, 0);
  for (std::size_t n = 0; n < 2; ++n) {
    const auto mean = column_mean(v, n);
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(out.at({n, i, c}) - mean[c]) < 1e-12);
    }
  }
  CHECK_THROWS_AS(ssaw_attention(v, v, v, 6), ContractError);
}

TEST_CASE("SSAW rows follow the sparse rule against a brute-force oracle") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const std::size_t w = 4 + seed % 5, u = 1 + seed % (w - 1), d = 3;
    const Tensor q = random_tensor(rng, {2, w, d});
    const Tensor k = random_tensor(rng, {2, w, d});
    const Tensor v = random_tensor(rng, {2, w, d});
    const Tensor out = ssaw_attention(q, k, v, u);
    for (std::size_t n = 0; n < 2; ++n) {
      // Selection recomputed with plain loops.
      std::vector<double> measure(w);
      for (std::size_t i = 0; i < w; ++i) {
        double mx = -1e300, mean = 0.0;
        for (std::size_t j = 0; j < w; ++j) {
          double s = 0.0;
          for (std::size_t c = 0; c < d; ++c) s += q.at({n, i, c}) * k.at({n, j, c});
          s /= std::sqrt(static_cast<double>(d));
          mx = std::max(mx, s);
          mean += s / static_cast<double>(w);
        }
        measure[i] = mx - mean;
      }
      std::vector<std::size_t> order(w);
      for (std::size_t i = 0; i < w; ++i) order[i] = i;
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return measure[a] > measure[b]; });
      std::vector<bool> selected(w, false);
      for (std::size_t i = 0; i < u; ++i) selected[order[i]] = true;

      const auto mean_v = column_mean(v, n);
      for (std::size_t i = 0; i < w; ++i) {
        const auto expect = selected[i] ? brute_force_row(q, k, v, n, i) : mean_v;
        const double tol = selected[i] ? 1e-9 : 1e-12;
        for (std::size_t c = 0; c < d; ++c) CHECK(std::abs(out.at({n, i, c}) - expect[c]) < tol);
      }
    }
  }
}

TEST_CASE("selected SSAW rows are convex combinations of V") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t w = 6;
    // With V = I the output rows are the attention weights themselves.
    Tensor eye({1, w, w}, 0.0);
    for (std::size_t i = 0; i < w; ++i) eye.mutable_values()[i * w + i] = 1.0;
    const Tensor out = ssaw_attention(random_tensor(rng, {1, w, w}), random_tensor(rng, {1, w, w}), eye, 3);
    for (std::size_t i = 0; i < w; ++i) {
      double total = 0.0;
      for (std::size_t c = 0; c < w; ++c) {
        CHECK(out.at({0, i, c}) >= 0.0);
        total += out.at({0, i, c});
      }
      CHECK(std::abs(total - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("single-window operands are accepted") {
  Rng rng(5);
  const Tensor q = random_tensor(rng, {4, 2});
  const Tensor out = ssaw_attention(q, random_tensor(rng, {4, 2}), random_tensor(rng, {4, 2}), 2);
  CHECK(out.shape() == Shape{4, 2});
}
