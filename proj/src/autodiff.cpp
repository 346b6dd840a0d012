#include "gmcf/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gmcf/errors.hpp"

namespace gmcf {

Parameter::Parameter(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), values_(rows * cols, 0.0), grad_(rows * cols, 0.0) {}

Parameter::Parameter(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)), grad_(rows * cols, 0.0) {
  if (values_.size() != rows * cols) {
    throw ShapeError("parameter: " + std::to_string(values_.size()) + " values for shape " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

void Parameter::zero_grad() const { std::fill(grad_.begin(), grad_.end(), 0.0); }

const char* primitive_name(Primitive p) noexcept {
  switch (p) {
    case Primitive::kParameter: return "parameter";
    case Primitive::kConstant: return "constant";
    case Primitive::kAdd: return "add";
    case Primitive::kSub: return "sub";
    case Primitive::kScale: return "scale";
    case Primitive::kMul: return "elementwise-product";
    case Primitive::kMatVec: return "matrix-vector-product";
    case Primitive::kConcat: return "concatenate";
    case Primitive::kSum: return "sum-reduce";
    case Primitive::kDot: return "dot";
    case Primitive::kSigmoid: return "sigmoid";
    case Primitive::kTanh: return "tanh";
    case Primitive::kRelu: return "relu";
    case Primitive::kBceWithLogit: return "bce-with-logit";
  }
  return "unknown";
}

std::span<const double> Var::value() const { return tape_->value(*this); }
std::size_t Var::size() const { return tape_->value(*this).size(); }

double Var::scalar() const {
  auto v = value();
  if (v.size() != 1) throw ContractError("scalar(): var has " + std::to_string(v.size()) + " elements");
  return v[0];
}

namespace {

double sigmoid_of(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

[[noreturn]] void shape_error(Primitive op, const std::string& detail) {
  throw ShapeError(std::string(primitive_name(op)) + ": " + detail);
}

}  // namespace

void Tape::check(Var v, const char* op) const {
  if (v.tape_ != this || v.index_ >= nodes_.size()) {
    throw ContractError(std::string(op) + ": var is not recorded on this tape");
  }
}

std::uint32_t Tape::push(Primitive op, std::size_t rows, std::size_t cols,
                         std::initializer_list<std::uint32_t> inputs, double aux) {
  Node n{};
  n.op = op;
  n.rows = static_cast<std::uint32_t>(rows);
  n.cols = static_cast<std::uint32_t>(cols);
  n.offset = static_cast<std::uint32_t>(values_.size());
  n.input_begin = static_cast<std::uint32_t>(inputs_.size());
  n.input_count = static_cast<std::uint32_t>(inputs.size());
  n.aux = aux;
  n.param = nullptr;
  inputs_.insert(inputs_.end(), inputs.begin(), inputs.end());
  values_.resize(values_.size() + rows * cols, 0.0);
  nodes_.push_back(n);
  return static_cast<std::uint32_t>(nodes_.size() - 1);
}

std::uint32_t Tape::push_n(Primitive op, std::size_t rows, std::size_t cols,
                           std::span<const Var> inputs, double aux) {
  const auto i = push(op, rows, cols, {}, aux);
  for (const Var& v : inputs) inputs_.push_back(v.index_);
  nodes_[i].input_count = static_cast<std::uint32_t>(inputs.size());
  return i;
}

std::span<double> Tape::out_values(std::uint32_t i) {
  return std::span<double>(values_).subspan(nodes_[i].offset, size_of(i));
}

std::span<const double> Tape::values_of(std::uint32_t i) const {
  const Node& n = nodes_[i];
  if (n.op == Primitive::kParameter) return n.param->values();
  return std::span<const double>(values_).subspan(n.offset, size_of(i));
}

std::span<double> Tape::grad_of(std::uint32_t i) {
  const Node& n = nodes_[i];
  if (n.op == Primitive::kParameter) return n.param->grad();
  return std::span<double>(grads_).subspan(n.offset, size_of(i));
}

std::span<const double> Tape::value(Var v) const {
  check(v, "value");
  return values_of(v.index_);
}

std::span<const double> Tape::grad(Var v) const {
  check(v, "grad");
  const Node& n = nodes_[v.index_];
  if (n.op == Primitive::kParameter) return n.param->grad();
  if (grads_.size() < values_.size()) throw ContractError("grad: backward has not run");
  return std::span<const double>(grads_).subspan(n.offset, size_of(v.index_));
}

Primitive Tape::primitive(Var v) const {
  check(v, "primitive");
  return nodes_[v.index_].op;
}

Var Tape::param(const Parameter& p) {
  if (auto it = param_index_.find(&p); it != param_index_.end()) return Var(this, it->second);
  Node n{};
  n.op = Primitive::kParameter;
  n.rows = static_cast<std::uint32_t>(p.rows());
  n.cols = static_cast<std::uint32_t>(p.cols());
  n.offset = static_cast<std::uint32_t>(values_.size());
  n.input_begin = static_cast<std::uint32_t>(inputs_.size());
  n.param = &p;
  nodes_.push_back(n);
  const auto i = static_cast<std::uint32_t>(nodes_.size() - 1);
  param_index_.emplace(&p, i);
  return Var(this, i);
}

Var Tape::constant(std::span<const double> values) {
  const auto i = push(Primitive::kConstant, values.size(), 1, {});
  std::copy(values.begin(), values.end(), out_values(i).begin());
  return Var(this, i);
}

Var Tape::constant(std::initializer_list<double> values) {
  return constant(std::span<const double>(values.begin(), values.size()));
}

Var Tape::zeros(std::size_t n) { return Var(this, push(Primitive::kConstant, n, 1, {})); }

Var Tape::add(Var a, Var b) {
  check(a, "add");
  check(b, "add");
  const auto& na = nodes_[a.index_];
  const auto& nb = nodes_[b.index_];
  if (na.rows != nb.rows || na.cols != nb.cols) {
    shape_error(Primitive::kAdd, std::to_string(size_of(a.index_)) + " vs " + std::to_string(size_of(b.index_)));
  }
  const auto i = push(Primitive::kAdd, na.rows, na.cols, {a.index_, b.index_});
  auto out = out_values(i);
  auto x = values_of(a.index_);
  auto y = values_of(b.index_);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = x[k] + y[k];
  return Var(this, i);
}

Var Tape::sub(Var a, Var b) {
  check(a, "sub");
  check(b, "sub");
  const auto& na = nodes_[a.index_];
  const auto& nb = nodes_[b.index_];
  if (na.rows != nb.rows || na.cols != nb.cols) {
    shape_error(Primitive::kSub, std::to_string(size_of(a.index_)) + " vs " + std::to_string(size_of(b.index_)));
  }
  const auto i = push(Primitive::kSub, na.rows, na.cols, {a.index_, b.index_});
  auto out = out_values(i);
  auto x = values_of(a.index_);
  auto y = values_of(b.index_);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = x[k] - y[k];
  return Var(this, i);
}

Var Tape::scale(Var a, double factor) {
  check(a, "scale");
  const auto i = push(Primitive::kScale, nodes_[a.index_].rows, nodes_[a.index_].cols, {a.index_}, factor);
  auto out = out_values(i);
  auto x = values_of(a.index_);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = factor * x[k];
  return Var(this, i);
}

Var Tape::mul(Var a, Var b) {
  check(a, "mul");
  check(b, "mul");
  const auto& na = nodes_[a.index_];
  const auto& nb = nodes_[b.index_];
  if (na.rows != nb.rows || na.cols != nb.cols) {
    shape_error(Primitive::kMul, std::to_string(size_of(a.index_)) + " vs " + std::to_string(size_of(b.index_)));
  }
  const auto i = push(Primitive::kMul, na.rows, na.cols, {a.index_, b.index_});
  auto out = out_values(i);
  auto x = values_of(a.index_);
  auto y = values_of(b.index_);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = x[k] * y[k];
  return Var(this, i);
}

Var Tape::matvec(Var m, Var x, std::size_t col_offset) {
  check(m, "matvec");
  check(x, "matvec");
  const Node nm = nodes_[m.index_];
  const Node nx = nodes_[x.index_];
  const std::size_t n = size_of(x.index_);
  if (nx.cols != 1 || col_offset + n > nm.cols) {
    shape_error(Primitive::kMatVec, "matrix " + std::to_string(nm.rows) + "x" + std::to_string(nm.cols) +
                                        " cannot multiply vector of " + std::to_string(n) + " at column " +
                                        std::to_string(col_offset));
  }
  const auto i = push(Primitive::kMatVec, nm.rows, 1, {m.index_, x.index_}, static_cast<double>(col_offset));
  auto out = out_values(i);
  auto w = values_of(m.index_);
  auto v = values_of(x.index_);
  for (std::size_t r = 0; r < nm.rows; ++r) {
    const double* row = w.data() + r * nm.cols + col_offset;
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) acc += row[c] * v[c];
    out[r] = acc;
  }
  return Var(this, i);
}

Var Tape::concat(std::span<const Var> parts) {
  if (parts.empty()) shape_error(Primitive::kConcat, "no inputs");
  std::size_t total = 0;
  for (const Var& p : parts) {
    check(p, "concat");
    if (nodes_[p.index_].cols != 1) shape_error(Primitive::kConcat, "inputs must be vectors");
    total += size_of(p.index_);
  }
  const auto i = push_n(Primitive::kConcat, total, 1, parts);
  auto out = out_values(i);
  std::size_t pos = 0;
  for (const Var& p : parts) {
    auto v = values_of(p.index_);
    std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(pos));
    pos += v.size();
  }
  return Var(this, i);
}

Var Tape::concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var Tape::sum(Var a) {
  check(a, "sum");
  const auto i = push(Primitive::kSum, 1, 1, {a.index_});
  double acc = 0.0;
  for (double x : values_of(a.index_)) acc += x;
  out_values(i)[0] = acc;
  return Var(this, i);
}

Var Tape::dot(Var a, Var b) {
  check(a, "dot");
  check(b, "dot");
  if (size_of(a.index_) != size_of(b.index_)) {
    shape_error(Primitive::kDot, std::to_string(size_of(a.index_)) + " vs " + std::to_string(size_of(b.index_)));
  }
  const auto i = push(Primitive::kDot, 1, 1, {a.index_, b.index_});
  auto x = values_of(a.index_);
  auto y = values_of(b.index_);
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) acc += x[k] * y[k];
  out_values(i)[0] = acc;
  return Var(this, i);
}

Var Tape::sigmoid(Var a) {
  check(a, "sigmoid");
  const auto i = push(Primitive::kSigmoid, nodes_[a.index_].rows, nodes_[a.index_].cols, {a.index_});
  auto out = out_values(i);
  auto x = values_of(a.index_);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = sigmoid_of(x[k]);
  return Var(this, i);
}

Var Tape::tanh(Var a) {
  check(a, "tanh");
  const auto i = push(Primitive::kTanh, nodes_[a.index_].rows, nodes_[a.index_].cols, {a.index_});
  auto out = out_values(i);
  auto x = values_of(a.index_);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::tanh(x[k]);
  return Var(this, i);
}

Var Tape::relu(Var a) {
  check(a, "relu");
  const auto i = push(Primitive::kRelu, nodes_[a.index_].rows, nodes_[a.index_].cols, {a.index_});
  auto out = out_values(i);
  auto x = values_of(a.index_);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = x[k] > 0.0 ? x[k] : 0.0;
  return Var(this, i);
}

Var Tape::bce_with_logit(Var logit, double label) {
  check(logit, "bce_with_logit");
  if (size_of(logit.index_) != 1) shape_error(Primitive::kBceWithLogit, "logit must be a scalar");
  const auto i = push(Primitive::kBceWithLogit, 1, 1, {logit.index_}, label);
  const double x = values_of(logit.index_)[0];
  out_values(i)[0] = std::max(x, 0.0) - x * label + std::log1p(std::exp(-std::abs(x)));
  return Var(this, i);
}

Var Tape::add_all(std::span<const Var> terms) {
  if (terms.empty()) throw ContractError("add_all: no terms");
  Var acc = terms[0];
  for (std::size_t k = 1; k < terms.size(); ++k) acc = add(acc, terms[k]);
  return acc;
}

void Tape::backward(Var output) {
  check(output, "backward");
  if (size_of(output.index_) != 1) {
    throw ContractError("backward: output must be a scalar, got " + std::to_string(size_of(output.index_)) +
                        " elements");
  }
  grads_.assign(values_.size(), 0.0);
  grad_of(output.index_)[0] += 1.0;
  for (std::uint32_t i = output.index_ + 1; i-- > 0;) backward_node(i);
}

void Tape::backward_node(std::uint32_t i) {
  const Node n = nodes_[i];
  if (n.op == Primitive::kParameter || n.op == Primitive::kConstant) return;
  const std::uint32_t* in = inputs_.data() + n.input_begin;
  auto g = std::span<const double>(grads_).subspan(n.offset, size_of(i));
  if (std::all_of(g.begin(), g.end(), [](double x) { return x == 0.0; })) return;
  auto out = std::span<const double>(values_).subspan(n.offset, size_of(i));

  switch (n.op) {
    case Primitive::kAdd: {
      auto ga = grad_of(in[0]);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
      auto gb = grad_of(in[1]);
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k];
      break;
    }
    case Primitive::kSub: {
      auto ga = grad_of(in[0]);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
      auto gb = grad_of(in[1]);
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] -= g[k];
      break;
    }
    case Primitive::kScale: {
      auto ga = grad_of(in[0]);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += n.aux * g[k];
      break;
    }
    case Primitive::kMul: {
      auto a = values_of(in[0]);
      auto b = values_of(in[1]);
      auto ga = grad_of(in[0]);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * b[k];
      auto gb = grad_of(in[1]);
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k] * a[k];
      break;
    }
    case Primitive::kMatVec: {
      const Node& nm = nodes_[in[0]];
      const std::size_t cols = nm.cols;
      const auto off = static_cast<std::size_t>(n.aux);
      auto w = values_of(in[0]);
      auto x = values_of(in[1]);
      auto gw = grad_of(in[0]);
      auto gx = grad_of(in[1]);
      for (std::size_t r = 0; r < nm.rows; ++r) {
        const double gr = g[r];
        if (gr == 0.0) continue;
        double* grow = gw.data() + r * cols + off;
        const double* wrow = w.data() + r * cols + off;
        for (std::size_t c = 0; c < x.size(); ++c) {
          grow[c] += gr * x[c];
          gx[c] += gr * wrow[c];
        }
      }
      break;
    }
    case Primitive::kConcat: {
      std::size_t pos = 0;
      for (std::uint32_t k = 0; k < n.input_count; ++k) {
        auto gp = grad_of(in[k]);
        for (std::size_t e = 0; e < gp.size(); ++e) gp[e] += g[pos + e];
        pos += gp.size();
      }
      break;
    }
    case Primitive::kSum: {
      auto ga = grad_of(in[0]);
      for (double& x : ga) x += g[0];
      break;
    }
    case Primitive::kDot: {
      auto a = values_of(in[0]);
      auto b = values_of(in[1]);
      auto ga = grad_of(in[0]);
      for (std::size_t k = 0; k < a.size(); ++k) ga[k] += g[0] * b[k];
      auto gb = grad_of(in[1]);
      for (std::size_t k = 0; k < a.size(); ++k) gb[k] += g[0] * a[k];
      break;
    }
    case Primitive::kSigmoid: {
      auto ga = grad_of(in[0]);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * out[k] * (1.0 - out[k]);
      break;
    }
    case Primitive::kTanh: {
      auto ga = grad_of(in[0]);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * (1.0 - out[k] * out[k]);
      break;
    }
    case Primitive::kRelu: {
      auto a = values_of(in[0]);
      auto ga = grad_of(in[0]);
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (a[k] > 0.0) ga[k] += g[k];
      }
      break;
    }
    case Primitive::kBceWithLogit: {
      const double x = values_of(in[0])[0];
      grad_of(in[0])[0] += g[0] * (sigmoid_of(x) - n.aux);
      break;
    }
    case Primitive::kParameter:
    case Primitive::kConstant:
      break;
  }
}

GradientCheckResult gradient_check(const TrackedFunction& forward, std::span<Parameter* const> params,
                                   double step) {
  if (!(step > 0.0)) throw ConfigError("gradient_check: step must be positive");
  auto evaluate = [&forward]() {
    Tape tape;
    const double f = forward(tape).scalar();
    if (!std::isfinite(f)) throw NumericError("gradient_check: forward value is not finite");
    return f;
  };

  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var out = forward(tape);
    if (!std::isfinite(out.scalar())) throw NumericError("gradient_check: forward value is not finite");
    tape.backward(out);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.emplace_back(p->grad().begin(), p->grad().end());

  GradientCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto values = params[pi]->values();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + step;
      const double plus = evaluate();
      values[k] = saved - step;
      const double minus = evaluate();
      values[k] = saved;

      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[pi][k];
      const double scale = std::max(std::abs(a), std::abs(numeric));
      const double err = scale == 0.0 ? 0.0 : std::abs(a - numeric) / scale;
      ++result.entries_checked;
      if (result.entries_checked == 1 || err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = pi;
        result.worst_entry = k;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace gmcf
