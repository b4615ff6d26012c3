#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace c2f {

/// Dense row-major tensor of doubles with an optional gradient buffer.
///
/// A Tensor is a cheap shared handle: copies alias the same storage.
/// Shapes are fixed at construction. The gradient buffer is allocated
/// lazily (zero-filled) on first access and accumulated into by the
/// tape during backward passes.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor from_values(std::vector<int> shape, std::vector<double> values);
  static Tensor scalar(double value);

  bool defined() const { return static_cast<bool>(st_); }

  const std::vector<int>& shape() const;
  int rank() const;
  int dim(int i) const;
  std::int64_t size() const;

  double* data();
  const double* data() const;
  std::span<double> values();
  std::span<const double> values() const;

  /// Scalar accessor; throws unless size() == 1.
  double value() const;

  bool requires_grad() const;
  void set_requires_grad(bool v);

  bool has_grad() const;
  /// Gradient buffer, allocated zero-filled on first use.
  std::span<double> grad();
  /// Read-only gradient view; throws if no gradient has been allocated.
  std::span<const double> grad() const;
  /// Zero the gradient buffer if it exists; no-op otherwise.
  void zero_grad();

  /// Deep copy of shape/values/requires_grad. Gradients are not copied.
  Tensor clone() const;

  bool same_storage(const Tensor& other) const { return st_ == other.st_; }

  /// True if every value is finite.
  bool all_finite() const;

 private:
  struct Storage {
    std::vector<int> shape;
    std::vector<double> values;
    std::vector<double> grad;  // empty until first grad() access
    bool requires_grad = false;
  };

  explicit Tensor(std::shared_ptr<Storage> st) : st_(std::move(st)) {}
  Storage& st();
  const Storage& st() const;

  std::shared_ptr<Storage> st_;
};

std::int64_t shape_size(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

}  // namespace c2f
