// SPDX-License-Identifier: Apache-2.0
#include "texstat/autodiff.hpp"

#include <string>

#include "texstat/error.hpp"

namespace texstat::ad {

const Tensor& Var::value() const { return tape_->value(index_); }
const Tensor& Var::grad() const { return tape_->grad(index_); }
bool Var::requires_grad() const { return tape_->requires_grad(index_); }

Var Tape::constant(Tensor value) {
  value.require_finite("constant leaf");
  nodes_.push_back(Node{"constant", std::move(value), {}, false, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  value.require_finite("variable leaf");
  nodes_.push_back(Node{"variable", std::move(value), {}, true, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  value.require_finite(op);
  bool needs = false;
  for (const Var& in : inputs) {
    if (&in.tape() != this) throw Error("op '" + std::string(op) + "' mixes tapes");
    needs = needs || nodes_[in.index()].requires_grad;
  }
  nodes_.push_back(Node{op, std::move(value), {}, needs, false, needs ? std::move(backward) : BackwardFn{}});
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::grad(std::size_t index) const {
  const Node& node = nodes_.at(index);
  if (!node.requires_grad) throw Error("grad() on a node that does not require grad");
  if (!node.has_adjoint) throw Error("grad() before backward() reached this node");
  return node.adjoint;
}

Tensor* Tape::adjoint_slot(Var target) {
  Node& node = nodes_.at(target.index());
  if (!node.requires_grad) return nullptr;
  if (!node.has_adjoint) {
    node.adjoint = Tensor(node.value.shape());
    node.has_adjoint = true;
  }
  return &node.adjoint;
}

void Tape::accumulate(Var target, const Tensor& contribution) {
  Tensor* slot = adjoint_slot(target);
  if (slot == nullptr) return;
  if (contribution.size() != slot->size()) {
    throw ShapeError("adjoint contribution " + to_string(contribution.shape()) + " vs node " +
                     to_string(slot->shape()));
  }
  Scalar* dst = slot->data();
  const Scalar* src = contribution.data();
  for (std::size_t i = 0; i < slot->size(); ++i) dst[i] += src[i];
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw Error("backward() root belongs to another tape");
  Node& root = nodes_.at(loss.index());
  if (root.value.size() != 1) {
    throw ShapeError("backward() needs a scalar root, got " + to_string(root.value.shape()));
  }
  for (Node& node : nodes_) {
    node.adjoint = Tensor();
    node.has_adjoint = false;
  }
  if (!root.requires_grad) return;
  root.adjoint = Tensor(root.value.shape(), Scalar(1));
  root.has_adjoint = true;

  for (std::size_t i = loss.index() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.has_adjoint || !node.backward) continue;
    node.backward(*this, node.adjoint);
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& node = nodes_[i];
    if (node.requires_grad && !node.has_adjoint) {
      node.adjoint = Tensor(node.value.shape());
      node.has_adjoint = true;
    }
  }
}

}  // namespace texstat::ad
