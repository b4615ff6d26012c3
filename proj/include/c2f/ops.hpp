#pragma once

#include <span>
#include <vector>

#include "c2f/tape.hpp"
#include "c2f/tensor.hpp"

namespace c2f::ops {

// Differentiable primitives. Each op validates shapes, computes its
// forward value through the kernel layer, and (when a tape is active and
// an input requires gradients) records an exact backward rule.

/// [m x k] * [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);

/// Fully-connected core: [m x k] weight applied to a length-k vector.
Tensor matvec(const Tensor& w, const Tensor& x);

/// Cross-correlation of a [C,H,W] input with [OC,IC,k,k] weights plus a
/// length-OC bias. Zero padding, square kernel.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int pad);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

/// Elementwise sum; operands must have identical shapes, or one may be a
/// single-element tensor broadcast against the other.
Tensor add(const Tensor& a, const Tensor& b);
/// Hadamard product under the same broadcast rule as add().
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);

/// Concatenation along dimension 0; trailing dimensions must agree.
Tensor concat(const std::vector<Tensor>& parts);
/// Slice [start, start+len) along dimension 0.
Tensor slice0(const Tensor& x, int start, int len);
/// Same element count, new shape; values are copied in row-major order.
Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor flatten(const Tensor& x);

/// Sum of all elements, as a scalar tensor.
Tensor sum(const Tensor& x);

/// Numerically stable softmax over a length-N vector.
Tensor softmax(const Tensor& logits);

/// -weight * sum_{n in targets} log softmax(logits)[n], as a scalar.
/// Targets must be nonempty, unique, and valid class indices.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> targets, double weight);

/// Value copy that blocks gradient flow.
Tensor detach(const Tensor& x);

/// v <- momentum*v - lr*g;  p <- p + v.  Applied elementwise across the
/// three parallel tensor lists.
void sgd_momentum_step(std::span<Tensor> params, std::span<const Tensor> grads, std::span<Tensor> velocity,
                       double lr, double momentum);
/// Same update, reading each parameter's own gradient buffer (missing
/// buffers count as zero gradients).
void sgd_momentum_step(std::span<Tensor> params, std::span<Tensor> velocity, double lr, double momentum);

/// 2x2 window, stride 2; requires even-crop semantics (trailing odd row or
/// column is dropped). Backward routes to the argmax, first-wins on ties.
Tensor maxpool2x2(const Tensor& x);

/// Repeats every pixel factor x factor.
Tensor upsample_nearest(const Tensor& x, int factor);

}  // namespace c2f::ops
