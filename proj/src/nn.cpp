#include "c2f/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace c2f::nn {

void append_params(NamedParams& dst, const std::string& prefix, const NamedParams& src) {
  for (const auto& [name, t] : src) dst.emplace_back(prefix + name, t);
}

std::vector<Tensor> param_tensors(const NamedParams& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& [name, t] : params) out.push_back(t);
  return out;
}

std::vector<Tensor> zeros_like(const std::vector<Tensor>& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Tensor& p : params) out.push_back(Tensor::zeros(p.shape()));
  return out;
}

void zero_grads(const std::vector<Tensor>& params) {
  for (const Tensor& p : params) {
    Tensor t = p;
    t.zero_grad();
  }
}

void set_requires_grad(const NamedParams& params, bool value) {
  for (const auto& [name, t] : params) {
    Tensor tt = t;
    tt.set_requires_grad(value);
  }
}

Tensor glorot_uniform(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(-a, a);
  t.set_requires_grad(true);
  return t;
}

FcParams FcParams::create(int out_dim, int in_dim, Rng& rng) {
  FcParams p;
  p.weight = glorot_uniform({out_dim, in_dim}, in_dim, out_dim, rng);
  p.bias = Tensor::zeros({out_dim});
  p.bias.set_requires_grad(true);
  return p;
}

NamedParams FcParams::named(const std::string& prefix) const {
  return {{prefix + ".weight", weight}, {prefix + ".bias", bias}};
}

Tensor fc(const FcParams& p, const Tensor& x) { return ops::add(ops::matvec(p.weight, x), p.bias); }

ConvParams ConvParams::create(int out_c, int in_c, int k, int stride, int pad, Rng& rng) {
  ConvParams p;
  p.weight = glorot_uniform({out_c, in_c, k, k}, in_c * k * k, out_c * k * k, rng);
  p.bias = Tensor::zeros({out_c});
  p.bias.set_requires_grad(true);
  p.stride = stride;
  p.pad = pad;
  return p;
}

NamedParams ConvParams::named(const std::string& prefix) const {
  return {{prefix + ".weight", weight}, {prefix + ".bias", bias}};
}

Tensor conv(const ConvParams& p, const Tensor& x) { return ops::conv2d(x, p.weight, p.bias, p.stride, p.pad); }

LstmUnitParams LstmUnitParams::create(int input_dim, int hidden_dim, Rng& rng) {
  LstmUnitParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.weight = glorot_uniform({4 * hidden_dim, input_dim + hidden_dim}, input_dim + hidden_dim, 4 * hidden_dim, rng);
  p.bias = Tensor::zeros({4 * hidden_dim});
  // Forget-gate rows sit at [H, 2H); biasing them to +1 keeps early cell
  // state from washing out.
  for (int i = hidden_dim; i < 2 * hidden_dim; ++i) p.bias.data()[i] = 1.0;
  p.bias.set_requires_grad(true);
  return p;
}

NamedParams LstmUnitParams::named(const std::string& prefix) const {
  return {{prefix + ".weight", weight}, {prefix + ".bias", bias}};
}

LstmState lstm_unit(const LstmUnitParams& p, const Tensor& x, const Tensor& h_prev, const Tensor& c_prev) {
  const int d = p.input_dim, hd = p.hidden_dim;
  if (x.rank() != 1 || x.dim(0) != d) {
    throw std::invalid_argument("lstm_unit: input shape " + shape_str(x.shape()) + " does not match input_dim " +
                                std::to_string(d));
  }
  if (h_prev.rank() != 1 || h_prev.dim(0) != hd || c_prev.rank() != 1 || c_prev.dim(0) != hd) {
    throw std::invalid_argument("lstm_unit: state shapes must be [" + std::to_string(hd) + "]");
  }
  Tensor z = ops::add(ops::matvec(p.weight, ops::concat({x, h_prev})), p.bias);
  Tensor i = ops::sigmoid(ops::slice0(z, 0, hd));
  Tensor f = ops::sigmoid(ops::slice0(z, hd, hd));
  Tensor g = ops::tanh(ops::slice0(z, 2 * hd, hd));
  Tensor o = ops::sigmoid(ops::slice0(z, 3 * hd, hd));
  Tensor c = ops::add(ops::hadamard(f, c_prev), ops::hadamard(i, g));
  Tensor h = ops::hadamard(o, ops::tanh(c));
  return {h, c};
}

LstmState lstm_unit_start(const LstmUnitParams& p, const Tensor& x) {
  return lstm_unit(p, x, Tensor::zeros({p.hidden_dim}), Tensor::zeros({p.hidden_dim}));
}

SgdMomentum::SgdMomentum(std::vector<Tensor> params, double momentum)
    : params_(std::move(params)), velocity_(zeros_like(params_)), momentum_(momentum) {}

void SgdMomentum::step(double lr) { ops::sgd_momentum_step(params_, velocity_, lr, momentum_); }

void SgdMomentum::zero_grad() { zero_grads(params_); }

}  // namespace c2f::nn
