#include "navmr/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "navmr/error.hpp"

namespace navmr::ad {

Tensor::Tensor(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) throw ShapeError("tensor payload does not match its shape");
}

Tensor Tensor::column(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(n, 1, std::move(values));
}

Tensor Tensor::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(1, n, std::move(values));
}

const Tensor& Var::value() const { return tape_->nodes_[id_].value; }
const Tensor& Var::grad() const { return tape_->nodes_[id_].grad; }

double Var::scalar() const {
  const Tensor& v = value();
  if (v.size() != 1) throw ShapeError("scalar() on a non-scalar node");
  return v.data[0];
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.op = Op::kLeaf;
  n.needs_grad = true;
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.op = Op::kConstant;
  return push(std::move(n));
}

Var Tape::push(Node node) {
  for (int p = 0; p < node.n_parents; ++p) node.needs_grad = node.needs_grad || nodes_[node.parents[p]].needs_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.rows, n.value.cols);
  return n.grad;
}

namespace {

Tape& same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw ShapeError("operands live on different tapes");
  return a.tape();
}

void require_same_shape(Var a, Var b, const char* op) {
  if (!a.value().same_shape(b.value()))
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

Tape::Node unary(Var a, Op op, Tensor value) {
  Tape::Node n;
  n.op = op;
  n.value = std::move(value);
  n.parents[0] = a.id();
  n.n_parents = 1;
  return n;
}

Tape::Node binary(Var a, Var b, Op op, Tensor value) {
  Tape::Node n = unary(a, op, std::move(value));
  n.parents[1] = b.id();
  n.n_parents = 2;
  return n;
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_scalar(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double norm_of(const double* v, std::size_t n) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += v[k] * v[k];
  return std::sqrt(acc);
}

double dot_of(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += a[k] * b[k];
  return acc;
}

// d cos(a, b) / d a, scaled by g, accumulated into out.
void cosine_grad(const double* a, const double* b, std::size_t n, double na, double nb, double c, double g,
                 double* out) {
  const double inv = 1.0 / (na * nb);
  const double self = c / (na * na);
  for (std::size_t k = 0; k < n; ++k) out[k] += g * (b[k] * inv - a[k] * self);
}

}  // namespace

// ---------------------------------------------------------------------------
// Forward ops

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a, b, "add");
  Tensor v = a.value();
  for (std::size_t i = 0; i < v.size(); ++i) v.data[i] += b.value().data[i];
  return t.push(binary(a, b, Op::kAdd, std::move(v)));
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a, b, "sub");
  Tensor v = a.value();
  for (std::size_t i = 0; i < v.size(); ++i) v.data[i] -= b.value().data[i];
  return t.push(binary(a, b, Op::kSub, std::move(v)));
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a, b, "mul");
  Tensor v = a.value();
  for (std::size_t i = 0; i < v.size(); ++i) v.data[i] *= b.value().data[i];
  return t.push(binary(a, b, Op::kMul, std::move(v)));
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.cols != y.rows)
    throw ShapeError("matmul: inner dimensions differ (" + std::to_string(x.cols) + " vs " +
                     std::to_string(y.rows) + ")");
  Tensor v(x.rows, y.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t k = 0; k < x.cols; ++k) {
      const double xik = x(i, k);
      if (xik == 0.0) continue;
      const double* yrow = &y.data[k * y.cols];
      double* vrow = &v.data[i * v.cols];
      for (std::size_t j = 0; j < y.cols; ++j) vrow[j] += xik * yrow[j];
    }
  }
  return t.push(binary(a, b, Op::kMatmul, std::move(v)));
}

Var concat(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (a.cols() != b.cols()) throw ShapeError("concat: column counts differ");
  Tensor v(a.rows() + b.rows(), a.cols());
  std::copy(a.value().data.begin(), a.value().data.end(), v.data.begin());
  std::copy(b.value().data.begin(), b.value().data.end(), v.data.begin() + static_cast<std::ptrdiff_t>(a.value().size()));
  return t.push(binary(a, b, Op::kConcat, std::move(v)));
}

Var sum(Var a) {
  double acc = 0.0;
  for (double x : a.value().data) acc += x;
  return a.tape().push(unary(a, Op::kSum, Tensor::scalar(acc)));
}

Var mean(Var a) {
  if (a.value().size() == 0) throw ShapeError("mean of an empty tensor");
  double acc = 0.0;
  for (double x : a.value().data) acc += x;
  return a.tape().push(unary(a, Op::kMean, Tensor::scalar(acc / static_cast<double>(a.value().size()))));
}

Var sigmoid(Var a) {
  Tensor v = a.value();
  for (double& x : v.data) x = sigmoid_scalar(x);
  return a.tape().push(unary(a, Op::kSigmoid, std::move(v)));
}

Var tanh(Var a) {
  Tensor v = a.value();
  for (double& x : v.data) x = std::tanh(x);
  return a.tape().push(unary(a, Op::kTanh, std::move(v)));
}

Var log(Var a) {
  Tensor v = a.value();
  for (double& x : v.data) {
    if (!(x > 0.0)) throw NumericError("log of a non-positive value");
    x = std::log(x);
  }
  return a.tape().push(unary(a, Op::kLog, std::move(v)));
}

Var l1(Var a) {
  double acc = 0.0;
  for (double x : a.value().data) acc += std::abs(x);
  return a.tape().push(unary(a, Op::kL1, Tensor::scalar(acc)));
}

Var cosine_similarity(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (a.value().size() != b.value().size() || (a.rows() != 1 && a.cols() != 1))
    throw ShapeError("cosine_similarity: operands must be vectors of equal length");
  const std::size_t n = a.value().size();
  const double na = norm_of(a.value().data.data(), n);
  const double nb = norm_of(b.value().data.data(), n);
  if (!(na > 0.0) || !(nb > 0.0)) throw NumericError("cosine similarity of a zero-norm vector");
  const double c = dot_of(a.value().data.data(), b.value().data.data(), n) / (na * nb);
  return t.push(binary(a, b, Op::kCosine, Tensor::scalar(c)));
}

Var rowwise_cosine(Var m, Var r, ZeroNorm zero_norm) {
  Tape& t = same_tape(m, r);
  if (r.rows() != 1 || r.cols() != m.cols()) throw ShapeError("rowwise_cosine: reference must be 1 x cols");
  const std::size_t h = m.cols();
  const double nr = norm_of(r.value().data.data(), h);
  Tensor v(m.rows(), 1);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* row = &m.value().data[i * h];
    const double ni = norm_of(row, h);
    if (!(ni > 0.0) || !(nr > 0.0)) {
      if (zero_norm == ZeroNorm::kThrow) throw NumericError("cosine similarity of a zero-norm vector");
      v.data[i] = 0.0;
      continue;
    }
    v.data[i] = dot_of(row, r.value().data.data(), h) / (ni * nr);
  }
  Tape::Node n = binary(m, r, Op::kRowCosine, std::move(v));
  n.zero_norm = zero_norm;
  return t.push(std::move(n));
}

Var scale(Var a, double factor) {
  Tensor v = a.value();
  for (double& x : v.data) x *= factor;
  Tape::Node n = unary(a, Op::kScale, std::move(v));
  n.aux = factor;
  return a.tape().push(std::move(n));
}

Var add_scalar(Var a, double offset) {
  Tensor v = a.value();
  for (double& x : v.data) x += offset;
  Tape::Node n = unary(a, Op::kAddScalar, std::move(v));
  n.aux = offset;
  return a.tape().push(std::move(n));
}

Var add_row(Var m, Var r) {
  Tape& t = same_tape(m, r);
  if (r.rows() != 1 || r.cols() != m.cols()) throw ShapeError("add_row: row must be 1 x cols");
  Tensor v = m.value();
  const std::size_t h = m.cols();
  for (std::size_t i = 0; i < v.rows; ++i) {
    for (std::size_t j = 0; j < h; ++j) v.data[i * h + j] += r.value().data[j];
  }
  return t.push(binary(m, r, Op::kAddRow, std::move(v)));
}

Var softplus(Var a) {
  Tensor v = a.value();
  for (double& x : v.data) x = softplus_scalar(x);
  return a.tape().push(unary(a, Op::kSoftplus, std::move(v)));
}

Var clamp_min(Var a, double floor) {
  Tensor v = a.value();
  for (double& x : v.data) x = std::max(x, floor);
  Tape::Node n = unary(a, Op::kClampMin, std::move(v));
  n.aux = floor;
  return a.tape().push(std::move(n));
}

Var slice(Var a, std::size_t offset, std::size_t rows, std::size_t cols) {
  if (offset + rows * cols > a.value().size()) throw ShapeError("slice runs past the end of its source");
  const auto begin = a.value().data.begin() + static_cast<std::ptrdiff_t>(offset);
  Tensor v(rows, cols, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(rows * cols)));
  Tape::Node n = unary(a, Op::kSlice, std::move(v));
  n.aux_index = offset;
  return a.tape().push(std::move(n));
}

Var element(Var a, std::size_t index) {
  if (index >= a.value().size()) throw ShapeError("element index out of range");
  Tape::Node n = unary(a, Op::kElement, Tensor::scalar(a.value().data[index]));
  n.aux_index = index;
  return a.tape().push(std::move(n));
}

// ---------------------------------------------------------------------------
// Backward

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ShapeError("loss node belongs to another tape");
  if (loss.value().size() != 1) throw ShapeError("backward needs a scalar loss");
  for (auto& n : nodes_) {
    if (n.needs_grad) {
      n.grad.rows = n.value.rows;
      n.grad.cols = n.value.cols;
      n.grad.data.assign(n.value.size(), 0.0);
    } else {
      n.grad = Tensor();
    }
  }
  if (!nodes_[loss.id_].needs_grad) return;
  nodes_[loss.id_].grad.data[0] = 1.0;
  for (std::size_t id = loss.id_ + 1; id-- > 0;) {
    if (nodes_[id].needs_grad && nodes_[id].n_parents > 0) propagate(id);
  }
}

void Tape::propagate(std::size_t id) {
  // Parent grads are written through grad_of(), which never reallocates the
  // node vector, so references into `self` stay valid.
  const Node& self = nodes_[id];
  const Tensor& g = self.grad;
  const std::size_t pa = self.parents[0];
  const std::size_t pb = self.parents[1];
  auto wants = [&](std::size_t p) { return nodes_[p].needs_grad; };

  switch (self.op) {
    case Op::kLeaf:
    case Op::kConstant:
      break;
    case Op::kAdd:
    case Op::kSub: {
      const double sign = self.op == Op::kAdd ? 1.0 : -1.0;
      if (wants(pa)) {
        Tensor& ga = grad_of(pa);
        for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
      }
      if (wants(pb)) {
        Tensor& gb = grad_of(pb);
        for (std::size_t i = 0; i < g.size(); ++i) gb.data[i] += sign * g.data[i];
      }
      break;
    }
    case Op::kMul: {
      const Tensor& a = nodes_[pa].value;
      const Tensor& b = nodes_[pb].value;
      if (wants(pa)) {
        Tensor& ga = grad_of(pa);
        for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * b.data[i];
      }
      if (wants(pb)) {
        Tensor& gb = grad_of(pb);
        for (std::size_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i] * a.data[i];
      }
      break;
    }
    case Op::kMatmul: {
      const Tensor& a = nodes_[pa].value;  // n x k
      const Tensor& b = nodes_[pb].value;  // k x m
      const std::size_t n = a.rows, k = a.cols, m = b.cols;
      if (wants(pa)) {
        Tensor& ga = grad_of(pa);  // G (n x m) * B^T
        for (std::size_t i = 0; i < n; ++i) {
          const double* grow = &g.data[i * m];
          for (std::size_t q = 0; q < k; ++q) {
            const double* brow = &b.data[q * m];
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
            ga.data[i * k + q] += acc;
          }
        }
      }
      if (wants(pb)) {
        Tensor& gb = grad_of(pb);  // A^T * G
        for (std::size_t i = 0; i < n; ++i) {
          const double* grow = &g.data[i * m];
          for (std::size_t q = 0; q < k; ++q) {
            const double aiq = a.data[i * k + q];
            if (aiq == 0.0) continue;
            double* gbrow = &gb.data[q * m];
            for (std::size_t j = 0; j < m; ++j) gbrow[j] += aiq * grow[j];
          }
        }
      }
      break;
    }
    case Op::kConcat: {
      const std::size_t split = nodes_[pa].value.size();
      if (wants(pa)) {
        Tensor& ga = grad_of(pa);
        for (std::size_t i = 0; i < split; ++i) ga.data[i] += g.data[i];
      }
      if (wants(pb)) {
        Tensor& gb = grad_of(pb);
        for (std::size_t i = split; i < g.size(); ++i) gb.data[i - split] += g.data[i];
      }
      break;
    }
    case Op::kSum:
    case Op::kMean: {
      Tensor& ga = grad_of(pa);
      const double share =
          self.op == Op::kSum ? g.data[0] : g.data[0] / static_cast<double>(nodes_[pa].value.size());
      for (double& x : ga.data) x += share;
      break;
    }
    case Op::kSigmoid: {
      Tensor& ga = grad_of(pa);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double y = self.value.data[i];
        ga.data[i] += g.data[i] * y * (1.0 - y);
      }
      break;
    }
    case Op::kTanh: {
      Tensor& ga = grad_of(pa);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double y = self.value.data[i];
        ga.data[i] += g.data[i] * (1.0 - y * y);
      }
      break;
    }
    case Op::kLog: {
      Tensor& ga = grad_of(pa);
      const Tensor& a = nodes_[pa].value;
      for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] / a.data[i];
      break;
    }
    case Op::kL1: {
      Tensor& ga = grad_of(pa);
      const Tensor& a = nodes_[pa].value;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a.data[i];
        ga.data[i] += g.data[0] * (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0));
      }
      break;
    }
    case Op::kCosine: {
      const Tensor& a = nodes_[pa].value;
      const Tensor& b = nodes_[pb].value;
      const std::size_t n = a.size();
      const double na = norm_of(a.data.data(), n);
      const double nb = norm_of(b.data.data(), n);
      const double c = self.value.data[0];
      if (wants(pa)) cosine_grad(a.data.data(), b.data.data(), n, na, nb, c, g.data[0], grad_of(pa).data.data());
      if (wants(pb)) cosine_grad(b.data.data(), a.data.data(), n, nb, na, c, g.data[0], grad_of(pb).data.data());
      break;
    }
    case Op::kRowCosine: {
      const Tensor& m = nodes_[pa].value;
      const Tensor& r = nodes_[pb].value;
      const std::size_t h = m.cols;
      const double nr = norm_of(r.data.data(), h);
      const bool want_m = wants(pa);
      const bool want_r = wants(pb);
      for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = &m.data[i * h];
        const double ni = norm_of(row, h);
        if (!(ni > 0.0) || !(nr > 0.0)) continue;  // guarded entries are constant 0
        const double c = self.value.data[i];
        if (want_m) cosine_grad(row, r.data.data(), h, ni, nr, c, g.data[i], &grad_of(pa).data[i * h]);
        if (want_r) cosine_grad(r.data.data(), row, h, nr, ni, c, g.data[i], grad_of(pb).data.data());
      }
      break;
    }
    case Op::kScale: {
      Tensor& ga = grad_of(pa);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += self.aux * g.data[i];
      break;
    }
    case Op::kAddScalar: {
      Tensor& ga = grad_of(pa);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
      break;
    }
    case Op::kAddRow: {
      const std::size_t h = self.value.cols;
      if (wants(pa)) {
        Tensor& ga = grad_of(pa);
        for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
      }
      if (wants(pb)) {
        Tensor& gb = grad_of(pb);
        for (std::size_t i = 0; i < self.value.rows; ++i) {
          for (std::size_t j = 0; j < h; ++j) gb.data[j] += g.data[i * h + j];
        }
      }
      break;
    }
    case Op::kSoftplus: {
      Tensor& ga = grad_of(pa);
      const Tensor& a = nodes_[pa].value;
      for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * sigmoid_scalar(a.data[i]);
      break;
    }
    case Op::kClampMin: {
      Tensor& ga = grad_of(pa);
      const Tensor& a = nodes_[pa].value;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (a.data[i] >= self.aux) ga.data[i] += g.data[i];
      }
      break;
    }
    case Op::kSlice: {
      Tensor& ga = grad_of(pa);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data[self.aux_index + i] += g.data[i];
      break;
    }
    case Op::kElement: {
      grad_of(pa).data[self.aux_index] += g.data[0];
      break;
    }
  }
}

// ---------------------------------------------------------------------------

GradCheckReport grad_check(const ScalarGraph& f, const Tensor& point, double eps, double tol) {
  if (!(eps > 0.0)) throw ConfigError("grad_check needs eps > 0");
  GradCheckReport report;

  std::vector<double> analytic;
  {
    Tape tape;
    Var x = tape.leaf(point);
    Var y = f(tape, x);
    tape.backward(y);
    analytic = x.grad().data;
    if (analytic.empty()) analytic.assign(point.size(), 0.0);
  }
  auto eval_at = [&](const Tensor& p) {
    Tape tape;
    Var x = tape.leaf(p);
    return f(tape, x).scalar();
  };

  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double original = probe.data[i];
    probe.data[i] = original + eps;
    const double up = eval_at(probe);
    probe.data[i] = original - eps;
    const double down = eval_at(probe);
    probe.data[i] = original;

    CoordinateCheck c;
    c.index = i;
    c.analytic = analytic[i];
    c.numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({1.0, std::abs(c.analytic), std::abs(c.numeric)});
    c.rel_error = std::abs(c.analytic - c.numeric) / denom;
    c.pass = c.rel_error <= tol;
    report.passed = report.passed && c.pass;
    report.max_rel_error = std::max(report.max_rel_error, c.rel_error);
    report.coords.push_back(c);
  }
  return report;
}

}  // namespace navmr::ad
