// SPDX-License-Identifier: Apache-2.0
//
// Tape-based reverse-mode differentiation. Nodes are appended in evaluation
// order, so the tape itself is a topological order of the graph and backward
// is a single reverse sweep.
#pragma once

#include <cstddef>
#include <functional>
#include <string_view>
#include <vector>

#include "texstat/tensor.hpp"

namespace texstat::ad {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape& tape() const { return *tape_; }
  std::size_t index() const noexcept { return index_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  /// Adjoint after Tape::backward. Throws if the node does not require grad.
  const Tensor& grad() const;
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

class Tape {
 public:
  /// Receives the node's adjoint and pushes contributions to its inputs.
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf whose gradient is collected by backward().
  Var variable(Tensor value);

  /// Appends an op node. `backward` is dropped when no input requires grad.
  Var record(std::string_view op, Tensor value, std::vector<Var> inputs, BackwardFn backward);

  const Tensor& value(std::size_t index) const { return nodes_.at(index).value; }
  const Tensor& grad(std::size_t index) const;
  bool requires_grad(std::size_t index) const { return nodes_.at(index).requires_grad; }
  std::string_view op(std::size_t index) const { return nodes_.at(index).op; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Adds `contribution` into the adjoint of `target`. No-op for nodes that
  /// do not require grad.
  void accumulate(Var target, const Tensor& contribution);
  /// Mutable adjoint slot for `target`, zero-initialised on first use;
  /// nullptr when the node does not require grad.
  Tensor* adjoint_slot(Var target);

  /// Reverse sweep from a single-element root. Adjoints from an earlier
  /// sweep are discarded first.
  void backward(Var loss);

 private:
  struct Node {
    std::string_view op;
    Tensor value;
    Tensor adjoint;
    bool requires_grad = false;
    bool has_adjoint = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
};

}  // namespace texstat::ad
