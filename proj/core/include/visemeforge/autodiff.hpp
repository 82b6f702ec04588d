#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "visemeforge/tensor.hpp"

namespace vf::ad {

// Reverse-mode autodiff over Tensor. Graphs are built eagerly (define-by-run)
// out of shared_ptr nodes; dropping the loss Var frees all intermediates while
// long-lived parameter leaves survive in their owning modules.
struct Node {
  Tensor value;
  Tensor grad;  // allocated on first use, same shape as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void ensure_grad() {
    if (grad.numel() != value.numel()) grad = Tensor::zeros(value.shape());
  }
  void zero_grad() {
    ensure_grad();
    for (double& g : grad.vec()) g = 0.0;
  }
  double scalar() const { return value[0]; }
};

using Var = std::shared_ptr<Node>;

Var leaf(Tensor value, bool requires_grad = false);
Var constant(double value);
// Value-only copy that blocks gradient flow into the source graph.
Var detach(const Var& a);

// Elementwise.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var sigmoid(const Var& a);
Var tanh_(const Var& a);
Var log_(const Var& a);
Var abs_(const Var& a);
// Hard clamp; gradient passes only where lo < value < hi.
Var clamp(const Var& a, double lo, double hi);

// Reductions to a [1] scalar.
Var sum(const Var& a);
Var mean(const Var& a);

// Shape.
Var reshape(const Var& a, std::vector<long> shape);
Var concat(const std::vector<Var>& xs, long axis);
Var slice(const Var& a, long axis, long start, long len);

// Linear algebra. matmul: [m,k] x [k,n] -> [m,n]; linear adds a row-broadcast
// bias: x [n,in], w [in,out], b [out].
Var matmul(const Var& a, const Var& b);
Var linear(const Var& x, const Var& w, const Var& b);

// conv2d: x [N,Cin,H,W], w [Cout,Cin,kh,kw], b [Cout]; zero padding. The
// second overload allows distinct vertical/horizontal stride and padding,
// which is how 1-D convolutions run (H = kh = 1).
Var conv2d(const Var& x, const Var& w, const Var& b, long stride, long pad);
Var conv2d(const Var& x, const Var& w, const Var& b, long stride_h, long stride_w, long pad_h,
           long pad_w);
// Nearest-neighbour 2x spatial upsampling of [N,C,H,W].
Var upsample_nearest2x(const Var& x);
// Mean over the spatial extent: [N,C,H,W] -> [N,C].
Var spatial_mean(const Var& x);

// Numerically stable cross-entropy of a [1,K] (or [K]) logit row against an
// integer target; returns a [1] scalar.
Var softmax_cross_entropy(const Var& logits, long target);

// Plain (non-differentiated) stable softmax of a flat logit vector.
Tensor softmax(const Tensor& logits);

// Accumulates gradients of `loss` (a [1] scalar) into every reachable node
// with requires_grad. Gradients add up across calls until zeroed.
void backward(const Var& loss);

}  // namespace vf::ad
