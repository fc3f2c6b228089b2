#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "navgrpo/diffcore/param_store.hpp"
#include "navgrpo/diffcore/tensor.hpp"

namespace navgrpo::diff {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  bool requires_grad() const;
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Gradients keyed by parameter name; only trainable parameters appear.
using Gradients = std::map<std::string, Tensor>;

// Records forward operations for reverse-mode differentiation.
//
// Nodes that do not depend on any trainable parameter carry no backward
// closure, so frozen sub-networks and sampling-only passes cost one forward.
// With grad disabled every node is a constant.
class Tape {
 public:
  using Backprop = std::function<void(Tape&, const Tensor& grad_out)>;

  explicit Tape(bool enable_grad = true) : enable_grad_(enable_grad) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return enable_grad_; }
  std::size_t node_count() const { return nodes_.size(); }

  Var constant(Tensor value);
  // Leaf referencing store[index] without copying; the store must outlive the
  // tape and stay unmodified until backward() returns.
  Var parameter(const ParamStore& store, std::size_t index);
  Var parameter(const ParamStore& store, const std::string& name);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;

  // Exact gradients of a scalar loss with respect to every trainable parameter
  // leaf recorded on this tape. Untouched trainable leaves get zero tensors.
  Gradients backward(Var loss);

  // Used by op implementations.
  Var record(Tensor value, std::span<const Var> inputs, Backprop backprop);
  void accumulate(Var target, const Tensor& grad);
  void accumulate_raw(Var target, std::span<const double> grad);

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    bool requires_grad = false;
    Backprop backprop;
    std::string param_name;
  };

  const Node& node(Var v) const;
  void check(Var v) const;

  bool enable_grad_;
  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::unordered_map<const Tensor*, std::size_t> param_nodes_;
};

namespace ops {

// y = x W + b with x [B, in], W [in, out], b [out].
Var linear(Var x, Var weight, Var bias);
// Gaussian-error linear unit, x * Phi(x).
Var gelu(Var x);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
// Row r multiplied by factors[r].
Var scale_rows(Var a, std::span<const double> factors);
Var square(Var a);
Var exp(Var a);
// Gradient is passed only where lo < a < hi.
Var clamp(Var a, double lo, double hi);
// Elementwise minimum; ties route the gradient to the first argument.
Var minimum(Var a, Var b);
Var concat_cols(std::span<const Var> parts);
// out[i] = a[index[i]].
Var gather_rows(Var a, std::span<const std::size_t> index);
// [B, C] -> [B, 1].
Var row_sum(Var a);
// out[segment[r]] += a[r]; [R, C] -> [segments, C].
Var segment_sum(Var a, std::span<const std::size_t> segment, std::size_t segments);
// Scalar sum / mean over all entries, shape {1}.
Var sum(Var a);
Var mean(Var a);

}  // namespace ops

}  // namespace navgrpo::diff
