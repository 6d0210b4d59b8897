// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode differentiation.
//
// Operations record themselves on the tape that is active on the calling
// thread (see TapeScope) whenever one of their inputs requires a gradient.
// Without an active tape every operation is a plain forward kernel.
#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "danet/tensor.hpp"

namespace danet {

/// Backward rule: receives dLoss/dOutput and accumulates into its inputs.
using BackwardFn = std::function<void(std::span<const double> output_grad)>;

/// Leaf gradients produced by GradTape::backward.
class GradTable {
 public:
  void set(const Tensor& leaf, Tensor grad);
  /// dLoss/dLeaf; zeros for leaves the loss does not depend on.
  Tensor of(const Tensor& leaf) const;
  bool contains(const Tensor& leaf) const;
  std::size_t size() const { return grads_.size(); }

 private:
  std::unordered_map<const void*, Tensor> grads_;
};

class GradTape {
 public:
  struct Node {
    std::string op;
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };

  void record(std::string_view op, std::vector<Tensor> inputs, Tensor output, BackwardFn backward);

  /// Reverse accumulation from a scalar loss recorded on this tape.
  /// Clears gradients of every tensor touched by the tape first.
  GradTable backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  void clear() { nodes_.clear(); }

  /// Test hook: scale the incoming gradient of every `op` node by `factor`
  /// during backward, i.e. deliberately break that operation's chain rule.
  void inject_fault(std::string op, double factor) { faults_[std::move(op)] = factor; }

 private:
  std::vector<Node> nodes_;
  std::map<std::string, double, std::less<>> faults_;
};

/// Tape active on this thread, or nullptr.
GradTape* active_tape() noexcept;

/// Makes `tape` the active tape for the enclosing scope.
class TapeScope {
 public:
  explicit TapeScope(GradTape& tape) noexcept;
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  GradTape* previous_;
};

/// True when a tape is active and any of `inputs` requires a gradient.
bool should_record(std::initializer_list<const Tensor*> inputs);

/// Records `output` as produced by `op` on the active tape.
void record_op(std::string_view op, std::vector<Tensor> inputs, Tensor& output, BackwardFn backward);

}  // namespace danet
