#include "c2f/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace c2f {

std::int64_t shape_size(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {
void check_shape(const std::vector<int>& shape) {
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive, got " + shape_str(shape));
  }
}
}  // namespace

Tensor Tensor::zeros(std::vector<int> shape) {
  check_shape(shape);
  auto st = std::make_shared<Storage>();
  st->values.assign(static_cast<std::size_t>(shape_size(shape)), 0.0);
  st->shape = std::move(shape);
  return Tensor(std::move(st));
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t = zeros(std::move(shape));
  for (double& v : t.values()) v = value;
  return t;
}

Tensor Tensor::from_values(std::vector<int> shape, std::vector<double> values) {
  check_shape(shape);
  if (static_cast<std::int64_t>(values.size()) != shape_size(shape)) {
    throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape));
  }
  auto st = std::make_shared<Storage>();
  st->shape = std::move(shape);
  st->values = std::move(values);
  return Tensor(std::move(st));
}

Tensor Tensor::scalar(double value) { return from_values({}, {value}); }

Tensor::Storage& Tensor::st() {
  if (!st_) throw std::logic_error("use of undefined tensor");
  return *st_;
}

const Tensor::Storage& Tensor::st() const {
  if (!st_) throw std::logic_error("use of undefined tensor");
  return *st_;
}

const std::vector<int>& Tensor::shape() const { return st().shape; }
int Tensor::rank() const { return static_cast<int>(st().shape.size()); }

int Tensor::dim(int i) const {
  const auto& s = st().shape;
  if (i < 0 || i >= static_cast<int>(s.size())) throw std::out_of_range("tensor dim index out of range");
  return s[static_cast<std::size_t>(i)];
}

std::int64_t Tensor::size() const { return static_cast<std::int64_t>(st().values.size()); }

double* Tensor::data() { return st().values.data(); }
const double* Tensor::data() const { return st().values.data(); }
std::span<double> Tensor::values() { return st().values; }
std::span<const double> Tensor::values() const { return st().values; }

double Tensor::value() const {
  if (size() != 1) throw std::invalid_argument("value() requires a scalar tensor, shape is " + shape_str(shape()));
  return st().values[0];
}

bool Tensor::requires_grad() const { return st().requires_grad; }
void Tensor::set_requires_grad(bool v) { st().requires_grad = v; }

bool Tensor::has_grad() const { return !st().grad.empty(); }

std::span<double> Tensor::grad() {
  auto& s = st();
  if (s.grad.empty()) s.grad.assign(s.values.size(), 0.0);
  return s.grad;
}

std::span<const double> Tensor::grad() const {
  const auto& s = st();
  if (s.grad.empty()) throw std::logic_error("tensor has no gradient buffer");
  return s.grad;
}

void Tensor::zero_grad() {
  auto& s = st();
  for (double& g : s.grad) g = 0.0;
}

Tensor Tensor::clone() const {
  const auto& s = st();
  Tensor t = from_values(s.shape, s.values);
  t.set_requires_grad(s.requires_grad);
  return t;
}

bool Tensor::all_finite() const {
  for (double v : st().values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace c2f
