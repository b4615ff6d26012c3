#pragma once

#include <string>
#include <utility>
#include <vector>

#include "c2f/ops.hpp"
#include "c2f/rng.hpp"

namespace c2f::nn {

/// Flat, ordered list of (name, tensor) pairs. Checkpoints and optimizers
/// both consume parameters in this order.
using NamedParams = std::vector<std::pair<std::string, Tensor>>;

void append_params(NamedParams& dst, const std::string& prefix, const NamedParams& src);
std::vector<Tensor> param_tensors(const NamedParams& params);
std::vector<Tensor> zeros_like(const std::vector<Tensor>& params);
void zero_grads(const std::vector<Tensor>& params);
void set_requires_grad(const NamedParams& params, bool value);

/// Uniform in +/- sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::vector<int> shape, int fan_in, int fan_out, Rng& rng);

struct FcParams {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]
  static FcParams create(int out_dim, int in_dim, Rng& rng);
  NamedParams named(const std::string& prefix) const;
  int in_dim() const { return weight.dim(1); }
  int out_dim() const { return weight.dim(0); }
};

Tensor fc(const FcParams& p, const Tensor& x);

struct ConvParams {
  Tensor weight;  // [out_c, in_c, k, k]
  Tensor bias;    // [out_c]
  int stride = 1;
  int pad = 0;
  static ConvParams create(int out_c, int in_c, int k, int stride, int pad, Rng& rng);
  NamedParams named(const std::string& prefix) const;
  int out_channels() const { return weight.dim(0); }
};

Tensor conv(const ConvParams& p, const Tensor& x);

/// One LSTM cell. Gate rows of the weight matrix are packed in the fixed
/// order input, forget, candidate, output (i, f, g, o), applied to the
/// concatenated vector [x; h_prev]. The forget-gate bias initializes to +1.
struct LstmUnitParams {
  Tensor weight;  // [4H x (D+H)]
  Tensor bias;    // [4H]
  int input_dim = 0;
  int hidden_dim = 0;
  static LstmUnitParams create(int input_dim, int hidden_dim, Rng& rng);
  NamedParams named(const std::string& prefix) const;
};

struct LstmState {
  Tensor h;
  Tensor c;
};

/// c = f*c_prev + i*g;  h = o*tanh(c).
LstmState lstm_unit(const LstmUnitParams& p, const Tensor& x, const Tensor& h_prev, const Tensor& c_prev);
/// First unit of a chain: h_prev = c_prev = 0.
LstmState lstm_unit_start(const LstmUnitParams& p, const Tensor& x);

/// SGD-with-momentum convenience wrapper over ops::sgd_momentum_step.
class SgdMomentum {
 public:
  SgdMomentum(std::vector<Tensor> params, double momentum);
  void step(double lr);
  void zero_grad();
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  std::vector<Tensor> velocity_;
  double momentum_;
};

}  // namespace c2f::nn
