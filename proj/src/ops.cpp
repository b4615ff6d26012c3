#include "c2f/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

#include "c2f/kernels.hpp"

namespace c2f::ops {

namespace {

[[noreturn]] void shape_error(const std::string& what) { throw std::invalid_argument(what); }

void mark_output(Tensor& out) { out.set_requires_grad(true); }

bool is_broadcast_scalar(const Tensor& t) { return t.size() == 1; }

void check_same_or_scalar(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return;
  if (is_broadcast_scalar(a) || is_broadcast_scalar(b)) return;
  shape_error(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    shape_error("matmul expects rank-2 operands, got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    shape_error("matmul inner dimensions disagree: " + shape_str(a.shape()) + " * " + shape_str(b.shape()));
  }
  Tensor out = Tensor::zeros({m, n});
  kern::matmul(a.data(), b.data(), out.data(), m, k, n);
  if (tape_recording({&a, &b})) {
    mark_output(out);
    Tape::active()->record(out, [a = a, b = b, out, m, k, n]() mutable {
      const double* g = out.grad().data();
      if (a.requires_grad()) kern::matmul_acc_da(g, b.data(), a.grad().data(), m, k, n);
      if (b.requires_grad()) kern::matmul_acc_db(a.data(), g, b.grad().data(), m, k, n);
    });
  }
  return out;
}

Tensor matvec(const Tensor& w, const Tensor& x) {
  if (w.rank() != 2 || x.rank() != 1 || w.dim(1) != x.dim(0)) {
    shape_error("matvec shape mismatch: " + shape_str(w.shape()) + " * " + shape_str(x.shape()));
  }
  const int m = w.dim(0), k = w.dim(1);
  Tensor out = Tensor::zeros({m});
  kern::matvec(w.data(), x.data(), out.data(), m, k);
  if (tape_recording({&w, &x})) {
    mark_output(out);
    Tape::active()->record(out, [w = w, x = x, out, m, k]() mutable {
      const double* g = out.grad().data();
      if (w.requires_grad()) kern::matvec_acc_dw(g, x.data(), w.grad().data(), m, k);
      if (x.requires_grad()) kern::matvec_acc_dx(w.data(), g, x.grad().data(), m, k);
    });
  }
  return out;
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int pad) {
  if (input.rank() != 3) shape_error("conv2d input must be [C,H,W], got " + shape_str(input.shape()));
  if (weight.rank() != 4) shape_error("conv2d weight must be [OC,IC,k,k], got " + shape_str(weight.shape()));
  if (weight.dim(2) != weight.dim(3)) shape_error("conv2d kernel must be square, got " + shape_str(weight.shape()));
  if (bias.rank() != 1 || bias.dim(0) != weight.dim(0)) {
    shape_error("conv2d bias must be [OC], got " + shape_str(bias.shape()));
  }
  if (stride < 1) shape_error("conv2d stride must be >= 1");
  if (pad < 0) shape_error("conv2d padding must be >= 0");
  kern::ConvDims d;
  d.in_c = input.dim(0);
  d.in_h = input.dim(1);
  d.in_w = input.dim(2);
  d.out_c = weight.dim(0);
  d.k = weight.dim(2);
  d.stride = stride;
  d.pad = pad;
  if (weight.dim(1) != d.in_c) {
    shape_error("conv2d channel mismatch: input " + shape_str(input.shape()) + ", weight " + shape_str(weight.shape()));
  }
  if (d.k > d.in_h + 2 * pad || d.k > d.in_w + 2 * pad) {
    shape_error("conv2d kernel size " + std::to_string(d.k) + " exceeds padded input " + shape_str(input.shape()));
  }
  d.out_h = (d.in_h + 2 * pad - d.k) / stride + 1;
  d.out_w = (d.in_w + 2 * pad - d.k) / stride + 1;

  Tensor out = Tensor::zeros({d.out_c, d.out_h, d.out_w});
  kern::conv2d(input.data(), weight.data(), bias.data(), out.data(), d);
  if (tape_recording({&input, &weight, &bias})) {
    mark_output(out);
    Tape::active()->record(out, [input = input, weight = weight, bias = bias, out, d]() mutable {
      const double* g = out.grad().data();
      if (input.requires_grad()) kern::conv2d_acc_din(g, weight.data(), input.grad().data(), d);
      if (weight.requires_grad()) kern::conv2d_acc_dw(g, input.data(), weight.grad().data(), d);
      if (bias.requires_grad()) kern::conv2d_acc_dbias(g, bias.grad().data(), d);
    });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  kern::relu(x.data(), out.data(), x.size());
  if (tape_recording({&x})) {
    mark_output(out);
    Tape::active()->record(out, [x = x, out]() mutable {
      if (x.requires_grad()) kern::relu_acc_dx(out.grad().data(), x.data(), x.grad().data(), x.size());
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  kern::sigmoid(x.data(), out.data(), x.size());
  if (tape_recording({&x})) {
    mark_output(out);
    Tape::active()->record(out, [x = x, out]() mutable {
      if (x.requires_grad()) kern::sigmoid_acc_dx(out.grad().data(), out.data(), x.grad().data(), x.size());
    });
  }
  return out;
}

Tensor tanh(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  kern::tanh(x.data(), out.data(), x.size());
  if (tape_recording({&x})) {
    mark_output(out);
    Tape::active()->record(out, [x = x, out]() mutable {
      if (x.requires_grad()) kern::tanh_acc_dx(out.grad().data(), out.data(), x.grad().data(), x.size());
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_or_scalar(a, b, "add");
  const bool a_scalar = is_broadcast_scalar(a) && !is_broadcast_scalar(b);
  const bool b_scalar = is_broadcast_scalar(b);
  const Tensor& big = a_scalar ? b : a;
  Tensor out = Tensor::zeros(big.shape());
  if (a.shape() == b.shape()) {
    kern::add(a.data(), b.data(), out.data(), out.size());
  } else if (a_scalar) {
    const double s = a.data()[0];
    for (std::int64_t i = 0; i < out.size(); ++i) out.data()[i] = s + b.data()[i];
  } else {
    const double s = b.data()[0];
    for (std::int64_t i = 0; i < out.size(); ++i) out.data()[i] = a.data()[i] + s;
  }
  if (tape_recording({&a, &b})) {
    mark_output(out);
    Tape::active()->record(out, [a = a, b = b, out]() mutable {
      const std::span<const double> g = std::as_const(out).grad();
      auto pull = [&](Tensor& t) {
        if (!t.requires_grad()) return;
        if (t.size() == out.size()) {
          kern::acc(g.data(), t.grad().data(), out.size());
        } else {
          t.grad()[0] += kern::sum(g.data(), out.size());
        }
      };
      pull(a);
      pull(b);
    });
  }
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  check_same_or_scalar(a, b, "hadamard");
  const bool same = a.shape() == b.shape();
  const bool a_scalar = is_broadcast_scalar(a) && !is_broadcast_scalar(b);
  const Tensor& big = a_scalar ? b : a;
  Tensor out = Tensor::zeros(big.shape());
  if (same) {
    kern::mul(a.data(), b.data(), out.data(), out.size());
  } else if (a_scalar) {
    kern::scale(b.data(), a.data()[0], out.data(), out.size());
  } else {
    kern::scale(a.data(), b.data()[0], out.data(), out.size());
  }
  if (tape_recording({&a, &b})) {
    mark_output(out);
    Tape::active()->record(out, [a = a, b = b, out]() mutable {
      const std::span<const double> g = std::as_const(out).grad();
      const std::int64_t n = out.size();
      auto pull = [&](Tensor& self, const Tensor& other) {
        if (!self.requires_grad()) return;
        if (self.size() == n && other.size() == n) {
          kern::acc_mul(g.data(), other.data(), self.grad().data(), n);
        } else if (self.size() == n) {
          kern::acc_scaled(g.data(), other.data()[0], self.grad().data(), n);
        } else {
          self.grad()[0] += kern::dot(g.data(), other.data(), n);
        }
      };
      pull(a, b);
      pull(b, a);
    });
  }
  return out;
}

Tensor scale(const Tensor& x, double s) {
  Tensor out = Tensor::zeros(x.shape());
  kern::scale(x.data(), s, out.data(), x.size());
  if (tape_recording({&x})) {
    mark_output(out);
    Tape::active()->record(out, [x = x, out, s]() mutable {
      if (x.requires_grad()) kern::acc_scaled(out.grad().data(), s, x.grad().data(), x.size());
    });
  }
  return out;
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) shape_error("concat of zero tensors");
  const int rank = parts[0].rank();
  if (rank < 1) shape_error("concat requires rank >= 1");
  std::int64_t inner = 1;
  for (int i = 1; i < rank; ++i) inner *= parts[0].dim(i);
  int dim0 = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != rank) shape_error("concat rank mismatch");
    for (int i = 1; i < rank; ++i) {
      if (p.dim(i) != parts[0].dim(i)) {
        shape_error("concat trailing dimensions disagree: " + shape_str(p.shape()) + " vs " +
                    shape_str(parts[0].shape()));
      }
    }
    dim0 += p.dim(0);
  }
  std::vector<int> out_shape = parts[0].shape();
  out_shape[0] = dim0;
  Tensor out = Tensor::zeros(out_shape);
  std::int64_t offset = 0;
  for (const Tensor& p : parts) {
    std::copy(p.data(), p.data() + p.size(), out.data() + offset);
    offset += p.size();
  }
  bool rec = false;
  if (Tape::active() != nullptr) {
    for (const Tensor& p : parts) rec = rec || p.requires_grad();
  }
  if (rec) {
    mark_output(out);
    Tape::active()->record(out, [parts = parts, out]() mutable {
      const std::span<const double> g = std::as_const(out).grad();
      std::int64_t offset = 0;
      for (Tensor& p : parts) {
        if (p.requires_grad()) kern::acc(g.data() + offset, p.grad().data(), p.size());
        offset += p.size();
      }
    });
  }
  return out;
}

Tensor slice0(const Tensor& x, int start, int len) {
  if (x.rank() < 1) shape_error("slice0 requires rank >= 1");
  if (start < 0 || len <= 0 || start + len > x.dim(0)) {
    shape_error("slice0 range [" + std::to_string(start) + ", " + std::to_string(start + len) +
                ") outside dimension " + std::to_string(x.dim(0)));
  }
  std::int64_t inner = 1;
  for (int i = 1; i < x.rank(); ++i) inner *= x.dim(i);
  std::vector<int> out_shape = x.shape();
  out_shape[0] = len;
  Tensor out = Tensor::zeros(out_shape);
  std::copy(x.data() + start * inner, x.data() + (start + len) * inner, out.data());
  if (tape_recording({&x})) {
    mark_output(out);
    Tape::active()->record(out, [x = x, out, start, inner]() mutable {
      if (x.requires_grad()) {
        kern::acc(std::as_const(out).grad().data(), x.grad().data() + start * inner, out.size());
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
  if (shape_size(shape) != x.size()) {
    shape_error("reshape to " + shape_str(shape) + " changes element count of " + shape_str(x.shape()));
  }
  Tensor out = Tensor::from_values(std::move(shape), std::vector<double>(x.data(), x.data() + x.size()));
  if (tape_recording({&x})) {
    mark_output(out);
    Tape::active()->record(out, [x = x, out]() mutable {
      if (x.requires_grad()) kern::acc(std::as_const(out).grad().data(), x.grad().data(), x.size());
    });
  }
  return out;
}

Tensor flatten(const Tensor& x) { return reshape(x, {static_cast<int>(x.size())}); }

Tensor sum(const Tensor& x) {
  Tensor out = Tensor::scalar(kern::sum(x.data(), x.size()));
  if (tape_recording({&x})) {
    mark_output(out);
    Tape::active()->record(out, [x = x, out]() mutable {
      if (x.requires_grad()) {
        const double g = std::as_const(out).grad()[0];
        double* dst = x.grad().data();
        for (std::int64_t i = 0; i < x.size(); ++i) dst[i] += g;
      }
    });
  }
  return out;
}

namespace {
// Stable softmax into `p`; returns logsumexp.
double softmax_values(const double* logits, double* p, int n) {
  double m = logits[0];
  for (int i = 1; i < n; ++i) m = std::max(m, logits[i]);
  double z = 0.0;
  for (int i = 0; i < n; ++i) z += std::exp(logits[i] - m);
  for (int i = 0; i < n; ++i) p[i] = std::exp(logits[i] - m) / z;
  return m + std::log(z);
}
}  // namespace

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 1) shape_error("softmax expects a rank-1 tensor, got " + shape_str(logits.shape()));
  const int n = logits.dim(0);
  Tensor out = Tensor::zeros({n});
  softmax_values(logits.data(), out.data(), n);
  if (tape_recording({&logits})) {
    mark_output(out);
    Tape::active()->record(out, [logits = logits, out, n]() mutable {
      if (!logits.requires_grad()) return;
      const std::span<const double> g = std::as_const(out).grad();
      const double* p = out.data();
      const double gp = kern::dot(g.data(), p, n);
      double* dst = logits.grad().data();
      for (int i = 0; i < n; ++i) dst[i] += p[i] * (g[i] - gp);
    });
  }
  return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> targets, double weight) {
  if (logits.rank() != 1) {
    shape_error("softmax_cross_entropy expects rank-1 logits, got " + shape_str(logits.shape()));
  }
  if (targets.empty()) shape_error("softmax_cross_entropy: empty target set");
  if (weight <= 0.0) shape_error("softmax_cross_entropy: weight must be positive");
  const int n = logits.dim(0);
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (int t : targets) {
    if (t < 0 || t >= n) {
      shape_error("softmax_cross_entropy: target " + std::to_string(t) + " outside [0, " + std::to_string(n) + ")");
    }
    if (seen[static_cast<std::size_t>(t)]) shape_error("softmax_cross_entropy: duplicate target " + std::to_string(t));
    seen[static_cast<std::size_t>(t)] = 1;
  }

  auto p = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n));
  const double lse = softmax_values(logits.data(), p->data(), n);
  double loss = 0.0;
  for (int t : targets) loss -= weight * (logits.data()[t] - lse);
  Tensor out = Tensor::scalar(loss);

  if (tape_recording({&logits})) {
    mark_output(out);
    std::vector<int> tgt(targets.begin(), targets.end());
    Tape::active()->record(out, [logits = logits, out, p, tgt, weight, n]() mutable {
      if (!logits.requires_grad()) return;
      const double g = std::as_const(out).grad()[0];
      const double tn = static_cast<double>(tgt.size());
      double* dst = logits.grad().data();
      const double* pp = p->data();
      for (int i = 0; i < n; ++i) dst[i] += g * weight * tn * pp[i];
      for (int t : tgt) dst[t] -= g * weight;
    });
  }
  return out;
}

Tensor detach(const Tensor& x) {
  Tensor out = Tensor::from_values(x.shape(), std::vector<double>(x.data(), x.data() + x.size()));
  return out;
}

namespace {
void sgd_core(double* p, const double* g, double* v, std::int64_t n, double lr, double momentum) {
  for (std::int64_t i = 0; i < n; ++i) {
    v[i] = momentum * v[i] - lr * g[i];
    p[i] += v[i];
  }
}

void check_sgd_args(double lr, double momentum) {
  if (lr <= 0.0) throw std::invalid_argument("sgd_momentum_step: lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("sgd_momentum_step: momentum must be in [0,1)");
}
}  // namespace

void sgd_momentum_step(std::span<Tensor> params, std::span<const Tensor> grads, std::span<Tensor> velocity,
                       double lr, double momentum) {
  check_sgd_args(lr, momentum);
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw std::invalid_argument("sgd_momentum_step: params/grads/velocity list sizes differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape() || params[i].shape() != velocity[i].shape()) {
      throw std::invalid_argument("sgd_momentum_step: shape mismatch at entry " + std::to_string(i));
    }
    sgd_core(params[i].data(), grads[i].data(), velocity[i].data(), params[i].size(), lr, momentum);
  }
}

void sgd_momentum_step(std::span<Tensor> params, std::span<Tensor> velocity, double lr, double momentum) {
  check_sgd_args(lr, momentum);
  if (params.size() != velocity.size()) {
    throw std::invalid_argument("sgd_momentum_step: params/velocity list sizes differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != velocity[i].shape()) {
      throw std::invalid_argument("sgd_momentum_step: shape mismatch at entry " + std::to_string(i));
    }
    // An unallocated gradient buffer is a zero gradient.
    const std::span<const double> g = params[i].has_grad()
                                          ? std::as_const(params[i]).grad()
                                          : std::span<const double>();
    if (g.empty()) {
      double* v = velocity[i].data();
      double* p = params[i].data();
      for (std::int64_t j = 0; j < params[i].size(); ++j) {
        v[j] = momentum * v[j];
        p[j] += v[j];
      }
    } else {
      sgd_core(params[i].data(), g.data(), velocity[i].data(), params[i].size(), lr, momentum);
    }
  }
}

Tensor maxpool2x2(const Tensor& x) {
  if (x.rank() != 3) shape_error("maxpool2x2 input must be [C,H,W], got " + shape_str(x.shape()));
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h < 2 || w < 2) shape_error("maxpool2x2 needs H,W >= 2, got " + shape_str(x.shape()));
  const int oh = h / 2, ow = w / 2;
  Tensor out = Tensor::zeros({c, oh, ow});
  auto argmax = std::make_shared<std::vector<std::int32_t>>(static_cast<std::size_t>(c) * oh * ow);
  kern::maxpool2x2(x.data(), out.data(), argmax->data(), c, h, w);
  if (tape_recording({&x})) {
    mark_output(out);
    Tape::active()->record(out, [x = x, out, argmax, c, oh, ow]() mutable {
      if (x.requires_grad()) {
        kern::maxpool2x2_acc_din(std::as_const(out).grad().data(), argmax->data(), x.grad().data(), c, oh, ow);
      }
    });
  }
  return out;
}

Tensor upsample_nearest(const Tensor& x, int factor) {
  if (x.rank() != 3) shape_error("upsample_nearest input must be [C,H,W], got " + shape_str(x.shape()));
  if (factor < 1) shape_error("upsample_nearest factor must be a positive integer");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out = Tensor::zeros({c, h * factor, w * factor});
  kern::upsample_nearest(x.data(), out.data(), c, h, w, factor);
  if (tape_recording({&x})) {
    mark_output(out);
    Tape::active()->record(out, [x = x, out, c, h, w, factor]() mutable {
      if (x.requires_grad()) {
        kern::upsample_nearest_acc_din(std::as_const(out).grad().data(), x.grad().data(), c, h, w, factor);
      }
    });
  }
  return out;
}

}  // namespace c2f::ops
