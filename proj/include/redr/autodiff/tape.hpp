#pragma once

// Reverse-mode differentiation over dense Eigen matrices.
//
// A Tape records every primitive application in creation order. Each record
// keeps its forward value and, when any input is trainable, a rule that
// pushes the record's output gradient back to its inputs. backward() walks
// the records once in reverse order, which is a valid topological order
// because a record can only reference records created before it.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "redr/error.hpp"

namespace redr::ad {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  std::ostringstream os;
  os << rows << "x" << cols;
  return os.str();
}

/// A named trainable leaf. Gradients accumulate into `grad` across backward
/// passes until zero_grad() is called.
template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  // Accumulator written by Tape::backward, including through const bindings.
  mutable Matrix<Scalar> grad;
  bool requires_grad = true;

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)),
        value(Matrix<Scalar>::Zero(rows, cols)),
        grad(Matrix<Scalar>::Zero(rows, cols)) {}

  void zero_grad() const { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

template <typename Scalar>
class Tape;

/// Lightweight handle to a record on a Tape. Copyable; valid while the tape lives.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix<Scalar>& value() const { return tape_->value(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Scalar scalar() const { return value()(0, 0); }
  bool valid() const { return tape_ != nullptr; }

  Tape<Scalar>* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;
  /// Receives the tape and the gradient of the record's output.
  using BackwardRule = std::function<void(Tape&, const Mat&)>;

  /// With track_gradients = false no backward rules are kept, which makes
  /// inference cheaper; backward() is then unavailable.
  explicit Tape(bool track_gradients = true) : track_(track_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> constant(Mat value, const char* op = "constant") {
    check_finite(value, op);
    Record r;
    r.value = std::move(value);
    r.op = op;
    records_.push_back(std::move(r));
    return {this, records_.size() - 1};
  }

  /// Binds a parameter as a leaf. Repeated binds of the same parameter on one
  /// tape return the same record, so the value is never copied.
  Var<Scalar> parameter(const Parameter<Scalar>& p) {
    if (auto it = bound_.find(&p); it != bound_.end()) return {this, it->second};
    check_finite(p.value, p.name.c_str());
    Record r;
    r.param = &p;
    r.needs_grad = track_ && p.requires_grad;
    r.op = "parameter";
    records_.push_back(std::move(r));
    bound_.emplace(&p, records_.size() - 1);
    return {this, records_.size() - 1};
  }

  /// Appends the result of a primitive. `needs_grad` is true when any input
  /// of the primitive needs a gradient; only then is `rule` kept.
  Var<Scalar> record(const char* op, Mat value, bool needs_grad, BackwardRule rule) {
    check_finite(value, op);
    Record r;
    r.value = std::move(value);
    r.op = op;
    r.needs_grad = needs_grad;
    if (needs_grad) r.rule = std::move(rule);
    records_.push_back(std::move(r));
    return {this, records_.size() - 1};
  }

  const Mat& value(std::size_t id) const {
    const Record& r = records_[id];
    return r.param ? r.param->value : r.value;
  }

  bool needs_grad(std::size_t id) const { return records_[id].needs_grad; }
  bool needs_grad(const Var<Scalar>& v) const { return needs_grad(v.id()); }

  /// Adds `g` to the gradient slot of record `id`; a no-op for records that
  /// do not lead to a trainable leaf.
  template <typename Derived>
  void accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& g) {
    Record& r = records_[id];
    if (!r.needs_grad) return;
    if (r.grad.size() == 0) {
      r.grad = g;
    } else {
      r.grad += g;
    }
  }

  /// Mutable gradient slot, allocated as zeros on first use.
  Mat& grad_slot(std::size_t id) {
    Record& r = records_[id];
    if (r.grad.size() == 0) r.grad = Mat::Zero(value(id).rows(), value(id).cols());
    return r.grad;
  }

  /// Reverse pass from a 1x1 loss. Parameter leaves add their gradient to
  /// Parameter::grad; leaves off the loss path receive nothing, so a freshly
  /// zeroed parameter keeps a zero gradient.
  void backward(const Var<Scalar>& loss) {
    if (!track_) throw Error("backward: tape was created without gradient tracking");
    if (loss.tape() != this) throw Error("backward: loss was not produced on this tape");
    if (loss.rows() != 1 || loss.cols() != 1) {
      throw ShapeError("backward: loss must be a scalar, got " +
                       shape_string(loss.rows(), loss.cols()));
    }
    for (Record& r : records_) r.grad.resize(0, 0);
    records_[loss.id()].grad = Mat::Ones(1, 1);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Record& r = records_[i];
      if (!r.needs_grad || r.grad.size() == 0) continue;
      if (r.param) {
        if (r.param->grad.rows() != r.param->value.rows() ||
            r.param->grad.cols() != r.param->value.cols()) {
          r.param->zero_grad();
        }
        r.param->grad += r.grad;
        check_finite(r.param->grad, "gradient");
      } else if (r.rule) {
        // Rules only write to earlier records, so ours can be released.
        const Mat g = std::move(r.grad);
        r.rule(*this, g);
      }
    }
  }

  std::size_t size() const { return records_.size(); }

 private:
  struct Record {
    Mat value;
    Mat grad;
    BackwardRule rule;
    const Parameter<Scalar>* param = nullptr;
    bool needs_grad = false;
    const char* op = "";
  };

  static void check_finite(const Mat& m, const char* op) {
    if (!m.allFinite()) throw NumericError(std::string("non-finite value produced by ") + op);
  }

  bool track_ = true;
  std::vector<Record> records_;
  std::unordered_map<const Parameter<Scalar>*, std::size_t> bound_;
};

}  // namespace redr::ad
