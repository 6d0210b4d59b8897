// SPDX-License-Identifier: Apache-2.0
#include "danet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "danet/error.hpp"

namespace danet {

struct Tensor::Storage {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  bool intermediate = false;
};

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.size() > kMaxRank) {
    throw DimensionError("tensor rank " + std::to_string(shape.size()) + " exceeds " +
                         std::to_string(kMaxRank));
  }
  for (auto e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive: " + shape_to_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : impl_(std::make_shared<Storage>()) {
  check_shape(shape);
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : impl_(std::make_shared<Storage>()) {
  check_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_to_string(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  if (rows.size() == 0) throw DimensionError("from_rows: no rows");
  const std::size_t cols = rows.begin()->size();
  std::vector<double> values;
  values.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw DimensionError("from_rows: ragged rows");
    values.insert(values.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), cols}, std::move(values));
}

Tensor Tensor::from_vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

const Shape& Tensor::shape() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_to_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const double> Tensor::values() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->data;
}

std::span<double> Tensor::mutable_values() {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_to_string(shape()));
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const auto& s = shape();
  if (index.size() != s.size()) throw DimensionError("at(): index rank mismatch");
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= s[axis]) throw DimensionError("at(): index out of range");
    flat = flat * s[axis] + i;
    ++axis;
  }
  return impl_->data[flat];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  if (!impl_) throw ContractError("use of an undefined tensor");
  impl_->requires_grad = on;
  return *this;
}

bool Tensor::is_intermediate() const { return impl_ && impl_->intermediate; }

Tensor Tensor::grad() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  if (impl_->grad.empty()) return Tensor(impl_->shape, 0.0);
  return Tensor(impl_->shape, impl_->grad);
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

void Tensor::zero_grad() {
  if (impl_) impl_->grad.clear();
}

std::span<double> Tensor::grad_accumulator() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

bool Tensor::is_finite() const {
  return std::all_of(values().begin(), values().end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::clone() const { return Tensor(shape(), impl_->data); }

void mark_intermediate(Tensor& t) {
  t.impl_->intermediate = true;
  t.impl_->requires_grad = true;
}

}  // namespace danet
