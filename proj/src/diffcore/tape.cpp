#include "navgrpo/diffcore/tape.hpp"

#include "navgrpo/common/errors.hpp"

namespace navgrpo::diff {

const Tensor& Var::value() const { return tape_->value(*this); }
bool Var::requires_grad() const { return tape_->requires_grad(*this); }

void Tape::check(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) {
    throw UsageError("variable does not belong to this tape");
  }
}

const Tape::Node& Tape::node(Var v) const {
  check(v);
  return nodes_[v.id_];
}

const Tensor& Tape::value(Var v) const {
  const Node& n = node(v);
  return n.external ? *n.external : n.owned;
}

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), nullptr, false, {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const ParamStore& store, std::size_t index) {
  if (index >= store.size()) throw UsageError("parameter index out of range");
  const Parameter& p = store[index];
  if (auto it = param_nodes_.find(&p.value); it != param_nodes_.end()) {
    return Var(this, it->second);
  }
  Node n;
  n.external = &p.value;
  n.requires_grad = enable_grad_ && p.trainable;
  if (n.requires_grad) n.param_name = p.name;
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(&p.value, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const ParamStore& store, const std::string& name) {
  auto i = store.find(name);
  if (!i) throw UsageError("unknown parameter " + name);
  return parameter(store, *i);
}

Var Tape::record(Tensor value, std::span<const Var> inputs, Backprop backprop) {
  bool rg = false;
  if (enable_grad_) {
    for (const Var& in : inputs) {
      if (requires_grad(in)) {
        rg = true;
        break;
      }
    }
  }
  Node n;
  n.owned = std::move(value);
  n.requires_grad = rg;
  if (rg) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate_raw(Var target, std::span<const double> grad) {
  check(target);
  if (!nodes_[target.id_].requires_grad) return;
  Tensor& g = grads_[target.id_];
  if (g.empty()) {
    g = Tensor(value(target).shape(), 0.0);
  }
  if (g.size() != grad.size()) throw UsageError("gradient shape mismatch in backward");
  double* d = g.data();
  for (std::size_t i = 0; i < grad.size(); ++i) d[i] += grad[i];
}

void Tape::accumulate(Var target, const Tensor& grad) { accumulate_raw(target, grad.values()); }

Gradients Tape::backward(Var loss) {
  check(loss);
  if (value(loss).size() != 1) throw UsageError("backward requires a scalar loss");
  grads_.assign(nodes_.size(), Tensor());
  if (nodes_[loss.id_].requires_grad) {
    grads_[loss.id_] = Tensor(value(loss).shape(), 1.0);
  }
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backprop || grads_[i].empty()) continue;
    n.backprop(*this, grads_[i]);
  }
  Gradients out;
  for (const auto& [ptr, id] : param_nodes_) {
    const Node& n = nodes_[id];
    if (!n.requires_grad) continue;
    if (grads_[id].empty()) {
      out.emplace(n.param_name, Tensor(n.external->shape(), 0.0));
    } else {
      out.emplace(n.param_name, std::move(grads_[id]));
    }
  }
  grads_.clear();
  return out;
}

}  // namespace navgrpo::diff
