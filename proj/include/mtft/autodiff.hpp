#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "mtft/tensor.hpp"

namespace mtft {

struct Parameter;

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;                     // allocated on demand, same shape as value
  bool requires_grad = false;
  Parameter* param = nullptr;      // set for parameter leaves
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;  // reads this->grad, accumulates into parents

  Tensor& ensure_grad();
};

}  // namespace detail

/// Handle to one node of a dynamically built computation graph. Copying a Var
/// copies the handle. Values are immutable once constructed; a graph is
/// single-threaded, independent graphs may run concurrently.
class Var {
 public:
  Var() = default;

  const Tensor& value() const { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const std::vector<std::size_t>& shape() const { return node_->value.shape(); }
  std::size_t dim(std::size_t i) const { return node_->value.dim(i); }
  bool valid() const { return node_ != nullptr; }

 private:
  explicit Var(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;

  friend Var wrap_node(std::shared_ptr<detail::Node> n);
  friend const std::shared_ptr<detail::Node>& node_ptr(const Var& v);
};

// Graph plumbing used by the op implementations.
Var wrap_node(std::shared_ptr<detail::Node> n);
const std::shared_ptr<detail::Node>& node_ptr(const Var& v);

/// Non-differentiated input (data, masks, positional tables).
Var constant(Tensor value);
/// Differentiated leaf; gradient lands in Var::grad after backward().
Var leaf(Tensor value);
/// Leaf bound to a Parameter; backward() accumulates into Parameter::grad
/// (or into the sink buffer when one is supplied).
Var param_leaf(Parameter& p);

// -- operations ---------------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);              // same shape
Var add_rowwise(const Var& a, const Var& bias);   // [r,c] + [c]
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);              // elementwise
Var scale(const Var& a, double s);
Var relu(const Var& a);
Var tanh_op(const Var& a);
Var sigmoid(const Var& a);
Var square(const Var& a);

/// Row-wise softmax over the last dimension with a binary mask: masked
/// entries are exactly 0 in the output and each row sums to 1. The mask is
/// either the same shape as the logits or a vector matching the last
/// dimension. A fully masked row throws ("degenerate attention row").
/// Computed with max-subtraction over the unmasked entries.
Var masked_softmax(const Var& logits, const Tensor& mask);
Var softmax(const Var& logits);                   // unmasked rows

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

Var concat_rows(const std::vector<Var>& xs);      // [r_i,c] -> [sum r_i, c]
Var concat_cols(const std::vector<Var>& xs);      // [r,c_i] -> [r, sum c_i]
Var slice_rows(const Var& x, std::size_t begin, std::size_t count);
Var slice_cols(const Var& x, std::size_t begin, std::size_t count);
Var mean_rows(const Var& x);                      // [r,c] -> [1,c]
Var sum_all(const Var& x);                        // -> [1]
Var cumsum_rows(const Var& x);                    // prefix sums down the rows
Var reshape(const Var& x, std::vector<std::size_t> shape);

/// Reverse sweep from a scalar root. Gradients of Parameter leaves are
/// accumulated into Parameter::grad, or into sink[param.index] when a sink
/// is given (used for deterministic multi-worker reduction; the sink grows
/// as needed).
void backward(const Var& root, std::vector<Tensor>* sink = nullptr);

}  // namespace mtft
