#pragma once

// Shared helpers for the test suites: random tensors and central
// finite-difference gradient checking.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "c2f/rng.hpp"
#include "c2f/tape.hpp"
#include "c2f/tensor.hpp"

namespace c2f::testing {

inline Tensor randn(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

inline Tensor randn_param(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor t = randn(std::move(shape), rng, scale);
  t.set_requires_grad(true);
  return t;
}

// Relative error with a floored denominator: tiny gradients only need to
// agree to ~1e-8 absolute, which is well above the fd roundoff at h=1e-5.
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4});
}

// Central finite differences of `loss` over every element of `param`,
// compared against the analytic gradient already stored in param.grad().
// `loss` must recompute the scalar from current tensor values.
inline double max_fd_rel_err(const std::function<double()>& loss, Tensor param, double h = 1e-5) {
  const std::span<const double> analytic = std::as_const(param).grad();
  double worst = 0.0;
  for (std::int64_t i = 0; i < param.size(); ++i) {
    const double old = param.data()[i];
    param.data()[i] = old + h;
    const double lp = loss();
    param.data()[i] = old - h;
    const double lm = loss();
    param.data()[i] = old;
    const double fd = (lp - lm) / (2.0 * h);
    worst = std::max(worst, rel_err(analytic[i], fd));
  }
  return worst;
}

// Runs build() under a fresh tape, backpropagates, and fd-checks every
// listed parameter. build() must be a pure function of the parameters'
// current values. Returns the worst relative error over all elements.
inline double full_gradcheck(const std::function<Tensor()>& build, std::span<Tensor> params, double h = 1e-5) {
  for (Tensor& p : params) {
    p.grad();
    p.zero_grad();
  }
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = build();
    tape.backward(loss);
  }
  auto loss_value = [&]() {
    Tensor loss = build();  // no tape: forward only
    return loss.value();
  };
  double worst = 0.0;
  for (Tensor& p : params) worst = std::max(worst, max_fd_rel_err(loss_value, p, h));
  return worst;
}

}  // namespace c2f::testing
