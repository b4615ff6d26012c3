#pragma once

#include <functional>
#include <initializer_list>
#include <vector>

#include "c2f/tensor.hpp"

namespace c2f {

/// Reverse-mode gradient tape.
///
/// Operations append nodes in execution order; backward() replays them in
/// reverse, accumulating chain-rule gradients into every tensor reachable
/// from the loss. Each node owns its output tensors plus a closure that
/// reads the outputs' gradients and accumulates into the inputs'.
///
/// Interior (node output) gradients are reset at the start of every
/// backward pass, so leaf parameters accumulate across repeated calls
/// while replays from reset gradients are bit-identical.
///
/// A tape is confined to one thread; at most one tape is active per
/// thread (see TapeScope).
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(Tensor output, std::function<void()> backward);
  void record(std::vector<Tensor> outputs, std::function<void()> backward);

  /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse.
  /// The loss must be a scalar produced by this tape.
  void backward(const Tensor& loss);

  std::size_t num_nodes() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  /// The tape currently active on this thread, or nullptr.
  static Tape* active();

 private:
  friend class TapeScope;
  struct Node {
    std::vector<Tensor> outputs;
    std::function<void()> backward;
  };
  std::vector<Node> nodes_;
};

/// RAII activation of a tape on the current thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

/// True when an op called with these inputs should record a node.
bool tape_recording(std::initializer_list<const Tensor*> inputs);

}  // namespace c2f
