#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <deque>
#include <functional>
#include <vector>

#include "edgedis/error.hpp"

namespace edgedis {

// Row-major: the aggregation kernels are dominated by row gather/scatter.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tape;

/// Handle to a dense 2-D array recorded on a Tape. Copying a Tensor copies
/// the handle, not the storage.
class Tensor {
 public:
  Tensor() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

  int rows() const;
  int cols() const;
  const Matrix& value() const;
  const Matrix& grad() const;
  bool requires_grad() const;

  /// Scalar convenience for 1x1 tensors.
  double item() const;

 private:
  friend class Tape;
  Tensor(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Recording tape for reverse-mode differentiation. Operations append value
/// slots and backward rules in topological order; backward() replays the
/// rules in exact reverse order, accumulating into .grad of every
/// requires_grad tensor reachable from the loss.
///
/// Single-threaded: record and backward must run on one logical thread.
/// Long-lived tensors (parameters, constant inputs) are created before a
/// mark(); rewind(mark) then drops everything recorded after it, so one tape
/// serves a whole training run without unbounded growth.
class Tape {
 public:
  struct Mark {
    std::size_t slots = 0;
    std::size_t nodes = 0;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// New differentiable leaf (parameter or input).
  Tensor leaf(Matrix value, bool requires_grad = true) {
    return alloc(std::move(value), requires_grad);
  }

  /// Non-differentiable value (coefficients, targets held as data).
  Tensor constant(Matrix value) { return alloc(std::move(value), false); }

  std::size_t num_tensors() const { return slots_.size(); }

  Mark mark() const { return Mark{slots_.size(), nodes_.size()}; }

  void rewind(const Mark& m) {
    if (m.slots > slots_.size() || m.nodes > nodes_.size())
      throw ContractError("tape rewind target is ahead of the tape");
    nodes_.resize(m.nodes);
    slots_.resize(m.slots);
  }

  /// Reverse sweep from a scalar loss. Seeds loss.grad with 1 and visits all
  /// recorded operations in reverse order. Gradients accumulate; call
  /// zero_grad() on the relevant leaves between steps.
  void backward(const Tensor& loss) {
    check_owns(loss);
    if (loss.rows() != 1 || loss.cols() != 1)
      throw ContractError("backward requires a 1x1 scalar loss");
    if (!loss.requires_grad())
      throw ContractError("backward from a tensor with requires_grad=false");
    grad_of(loss.id()).setOnes();
    for (std::size_t i = nodes_.size(); i-- > 0;) nodes_[i]();
  }

  /// Zero the gradient buffers of every live tensor.
  void zero_grad() {
    for (auto& s : slots_) {
      if (s.grad_live) s.grad.setZero();
    }
  }

  // --- Internals shared with the operation layer. ---

  Tensor alloc(Matrix value, bool requires_grad) {
    slots_.push_back(Slot{std::move(value), Matrix(), requires_grad, false});
    return Tensor(this, static_cast<int>(slots_.size() - 1));
  }

  void record(std::function<void()> backward_rule) {
    nodes_.push_back(std::move(backward_rule));
  }

  const Matrix& value_of(int id) const { return slots_[static_cast<std::size_t>(id)].value; }
  Matrix& mutable_value(int id) { return slots_[static_cast<std::size_t>(id)].value; }

  bool requires_grad_of(int id) const {
    return slots_[static_cast<std::size_t>(id)].requires_grad;
  }

  /// Gradient buffer, allocated (zeroed) on first touch.
  Matrix& grad_of(int id) {
    Slot& s = slots_[static_cast<std::size_t>(id)];
    if (!s.grad_live) {
      s.grad = Matrix::Zero(s.value.rows(), s.value.cols());
      s.grad_live = true;
    }
    return s.grad;
  }

  const Matrix& grad_view(int id) const {
    const Slot& s = slots_[static_cast<std::size_t>(id)];
    if (!s.grad_live) {
      static const Matrix empty;
      if (s.value.size() == 0) return empty;
      // A never-touched gradient is semantically zero; materialize it so
      // callers can read a correctly-shaped buffer.
      const_cast<Tape*>(this)->grad_of(id);
    }
    return slots_[static_cast<std::size_t>(id)].grad;
  }

  void check_owns(const Tensor& t) const {
    if (t.tape() != this || t.id() < 0 ||
        static_cast<std::size_t>(t.id()) >= slots_.size())
      throw ContractError("tensor does not belong to this tape");
  }

 private:
  struct Slot {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool grad_live = false;
  };

  std::deque<Slot> slots_;
  std::vector<std::function<void()>> nodes_;
};

inline int Tensor::rows() const { return static_cast<int>(tape_->value_of(id_).rows()); }
inline int Tensor::cols() const { return static_cast<int>(tape_->value_of(id_).cols()); }
inline const Matrix& Tensor::value() const { return tape_->value_of(id_); }
inline const Matrix& Tensor::grad() const { return tape_->grad_view(id_); }
inline bool Tensor::requires_grad() const { return tape_->requires_grad_of(id_); }
inline double Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw DimensionError("item() on a non-scalar tensor");
  return value()(0, 0);
}

}  // namespace edgedis
