// SPDX-License-Identifier: Apache-2.0
//
// Dense double-precision tensor of rank 0-4.
//
// A Tensor is a cheap handle onto shared storage (copies alias the same
// values, like a framework tensor). Values are treated as immutable once an
// operation has produced them; the only in-place mutation paths are the
// gradient accumulator and `mutable_values()`, which the optimizer uses
// between forward passes. Use `clone()` for an independent deep copy.
#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace danet {

using Shape = std::vector<std::size_t>;

inline constexpr std::size_t kMaxRank = 4;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

class Tensor {
 public:
  /// An undefined tensor (no storage). `defined()` is false.
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor from_vector(std::vector<double> values);

  bool defined() const noexcept { return static_cast<bool>(impl_); }

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  /// Direct write access; reserved for parameter updates between passes.
  std::span<double> mutable_values();

  double item() const;
  double operator[](std::size_t flat_index) const { return values()[flat_index]; }
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  /// True when the tensor was produced by a recorded operation.
  bool is_intermediate() const;

  /// Copy of the accumulated gradient, or zeros when nothing reached it.
  Tensor grad() const;
  bool has_grad() const;
  void zero_grad();
  /// Gradient buffer for backward rules; allocated (zeroed) on first use.
  std::span<double> grad_accumulator() const;

  /// Validity scan: false if any NaN or Inf is stored.
  bool is_finite() const;

  /// Deep copy detached from any tape; requires_grad is not carried over.
  Tensor clone() const;

  /// Stable identity of the underlying storage.
  const void* id() const noexcept { return impl_.get(); }

 private:
  struct Storage;
  friend class GradTape;
  friend void mark_intermediate(Tensor& t);

  std::shared_ptr<Storage> impl_;
};

/// Flags `t` as the output of a recorded operation (tape bookkeeping).
void mark_intermediate(Tensor& t);

}  // namespace danet
