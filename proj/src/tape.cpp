// SPDX-License-Identifier: Apache-2.0
#include "danet/tape.hpp"

#include <unordered_set>

#include "danet/error.hpp"

namespace danet {

namespace {
thread_local GradTape* g_active = nullptr;
}

void GradTable::set(const Tensor& leaf, Tensor grad) { grads_[leaf.id()] = std::move(grad); }

Tensor GradTable::of(const Tensor& leaf) const {
  auto it = grads_.find(leaf.id());
  if (it == grads_.end()) return Tensor::zeros(leaf.shape());
  return it->second;
}

bool GradTable::contains(const Tensor& leaf) const { return grads_.count(leaf.id()) != 0; }

void GradTape::record(std::string_view op, std::vector<Tensor> inputs, Tensor output,
                      BackwardFn backward) {
  nodes_.push_back(Node{std::string(op), std::move(inputs), std::move(output), std::move(backward)});
}

GradTable GradTape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward: loss must be a scalar, got " +
                        (loss.defined() ? shape_to_string(loss.shape()) : std::string("undefined")));
  }
  std::size_t end = nodes_.size();
  while (end > 0 && nodes_[end - 1].output.id() != loss.id()) --end;
  if (end == 0) throw ContractError("backward: loss was not recorded on this tape");

  for (auto& node : nodes_) {
    node.output.zero_grad();
    for (auto& in : node.inputs) in.zero_grad();
  }

  Tensor seed = nodes_[end - 1].output;
  seed.grad_accumulator()[0] = 1.0;

  for (std::size_t i = end; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.output.has_grad()) continue;
    auto out_grad = node.output.grad_accumulator();
    if (auto f = faults_.find(node.op); f != faults_.end()) {
      std::vector<double> scaled(out_grad.begin(), out_grad.end());
      for (auto& g : scaled) g *= f->second;
      node.backward(scaled);
    } else {
      node.backward(out_grad);
    }
  }

  GradTable table;
  std::unordered_set<const void*> seen;
  for (std::size_t i = 0; i < end; ++i) {
    for (const auto& in : nodes_[i].inputs) {
      if (!in.requires_grad() || in.is_intermediate()) continue;
      if (seen.insert(in.id()).second) table.set(in, in.grad());
    }
  }
  return table;
}

GradTape* active_tape() noexcept { return g_active; }

TapeScope::TapeScope(GradTape& tape) noexcept : previous_(g_active) { g_active = &tape; }

TapeScope::~TapeScope() { g_active = previous_; }

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (g_active == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void record_op(std::string_view op, std::vector<Tensor> inputs, Tensor& output, BackwardFn backward) {
  if (g_active == nullptr) throw ContractError("record_op without an active tape");
  mark_intermediate(output);
  g_active->record(op, std::move(inputs), output, std::move(backward));
}

}  // namespace danet
