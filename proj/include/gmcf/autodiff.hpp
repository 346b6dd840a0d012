#pragma once

// Reverse-mode differentiation over the handful of vector primitives the
// model needs. Values live in a flat arena owned by the Tape; parameters are
// referenced in place and receive their gradients directly.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace gmcf {

// A trainable array (vector or row-major matrix) with a same-shape gradient
// accumulator. The accumulator is mutable so that read-only model parameters
// can still be tracked on a tape; writes to it must be serialized by the caller.
class Parameter {
 public:
  Parameter() = default;
  Parameter(std::size_t rows, std::size_t cols);
  Parameter(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> grad() const noexcept { return grad_; }

  void zero_grad() const;

  friend bool operator==(const Parameter& a, const Parameter& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.values_ == b.values_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
  mutable std::vector<double> grad_;
};

enum class Primitive : std::uint8_t {
  kParameter,
  kConstant,
  kAdd,
  kSub,
  kScale,
  kMul,
  kMatVec,
  kConcat,
  kSum,
  kDot,
  kSigmoid,
  kTanh,
  kRelu,
  kBceWithLogit,
};

const char* primitive_name(Primitive p) noexcept;

class Tape;

// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;

  std::uint32_t index() const noexcept { return index_; }
  const Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  std::span<const double> value() const;
  std::size_t size() const;
  // Value of a one-element var.
  double scalar() const;

 private:
  friend class Tape;
  Var(const Tape* tape, std::uint32_t index) : tape_(tape), index_(index) {}

  const Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf for a parameter; repeated calls for the same parameter return the
  // same var.
  Var param(const Parameter& p);
  Var constant(std::span<const double> values);
  Var constant(std::initializer_list<double> values);
  Var zeros(std::size_t n);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double factor);
  Var mul(Var a, Var b);
  // m[:, col_offset : col_offset + x.size()] * x
  Var matvec(Var m, Var x, std::size_t col_offset = 0);
  Var concat(std::span<const Var> parts);
  Var concat(std::initializer_list<Var> parts);
  Var sum(Var a);
  Var dot(Var a, Var b);
  Var sigmoid(Var a);
  Var tanh(Var a);
  // Derivative at exactly 0 is taken as 0.
  Var relu(Var a);
  // Binary cross-entropy of sigmoid(logit) against label, in the stable
  // log-sum-exp form.
  Var bce_with_logit(Var logit, double label);

  // Sum of a non-empty list of same-shape vars.
  Var add_all(std::span<const Var> terms);

  // Propagates d(output)/d(node) to every node and accumulates parameter
  // gradients. Parameter gradients are not zeroed, so repeated calls add up.
  void backward(Var output);

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::span<const double> value(Var v) const;
  // Gradient of a non-parameter node from the last backward pass.
  std::span<const double> grad(Var v) const;
  Primitive primitive(Var v) const;

 private:
  struct Node {
    Primitive op;
    std::uint32_t rows;
    std::uint32_t cols;
    std::uint32_t offset;       // into values_/grads_; unused for parameters
    std::uint32_t input_begin;  // into inputs_
    std::uint32_t input_count;
    double aux;                 // scale factor, label, or column offset
    const Parameter* param;
  };

  std::size_t size_of(std::uint32_t i) const {
    return static_cast<std::size_t>(nodes_[i].rows) * nodes_[i].cols;
  }
  std::uint32_t push(Primitive op, std::size_t rows, std::size_t cols,
                     std::initializer_list<std::uint32_t> inputs, double aux = 0.0);
  std::uint32_t push_n(Primitive op, std::size_t rows, std::size_t cols,
                       std::span<const Var> inputs, double aux = 0.0);
  void check(Var v, const char* op) const;
  std::span<double> out_values(std::uint32_t i);
  std::span<const double> values_of(std::uint32_t i) const;
  std::span<double> grad_of(std::uint32_t i);
  void backward_node(std::uint32_t i);

  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<double> grads_;
  std::vector<std::uint32_t> inputs_;
  std::unordered_map<const Parameter*, std::uint32_t> param_index_;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t entries_checked = 0;
  std::size_t worst_parameter = 0;
  std::size_t worst_entry = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

using TrackedFunction = std::function<Var(Tape&)>;

// Compares tape gradients against central finite differences over every entry
// of every listed parameter. Relative error is |a - n| / max(|a|, |n|), with
// 0/0 taken as 0.
GradientCheckResult gradient_check(const TrackedFunction& forward,
                                   std::span<Parameter* const> params, double step);

}  // namespace gmcf
