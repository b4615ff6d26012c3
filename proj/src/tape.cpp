#include "c2f/tape.hpp"

#include <stdexcept>
#include <utility>

namespace c2f {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* Tape::active() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : prev_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = prev_; }

bool tape_recording(std::initializer_list<const Tensor*> inputs) {
  if (g_active_tape == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void Tape::record(Tensor output, std::function<void()> backward) {
  record(std::vector<Tensor>{std::move(output)}, std::move(backward));
}

void Tape::record(std::vector<Tensor> outputs, std::function<void()> backward) {
  nodes_.push_back(Node{std::move(outputs), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw std::invalid_argument("backward requires a scalar loss tensor");
  }
  bool produced_here = false;
  for (const Node& n : nodes_) {
    for (const Tensor& out : n.outputs) {
      if (out.same_storage(loss)) produced_here = true;
    }
  }
  if (!produced_here) {
    throw std::invalid_argument("backward: loss was not produced by this tape");
  }

  // Interior gradients are recomputed fresh on every pass; only leaves
  // (tensors that are never a node output) accumulate across passes.
  for (Node& n : nodes_) {
    for (Tensor& out : n.outputs) {
      out.grad();  // allocate
      out.zero_grad();
    }
  }
  Tensor seed = loss;
  seed.grad()[0] += 1.0;

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->backward) it->backward();
  }
}

}  // namespace c2f
