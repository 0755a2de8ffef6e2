#pragma once

// Minimal reverse-mode differentiation over dense 1-D/2-D double arrays.
//
// A Tape records nodes in creation order, which is a valid topological order
// because an op can only consume nodes that already exist. Var is a cheap
// handle (tape pointer + node index) and is only valid while its tape lives.
// Column vectors are n x 1, row vectors 1 x n, scalars 1 x 1.

#include <cstddef>
#include <functional>
#include <vector>

namespace navmr::ad {

struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Tensor(std::size_t r, std::size_t c, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(1, 1, v); }
  static Tensor column(std::vector<double> values);
  static Tensor row(std::vector<double> values);

  std::size_t size() const { return data.size(); }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

enum class Op {
  kLeaf,
  kConstant,
  kAdd,
  kSub,
  kMul,
  kMatmul,
  kConcat,
  kSum,
  kMean,
  kSigmoid,
  kTanh,
  kLog,
  kL1,
  kCosine,
  kRowCosine,
  kScale,
  kAddScalar,
  kAddRow,
  kSoftplus,
  kClampMin,
  kSlice,
  kElement,
};

// What rowwise_cosine does when a row or the reference has zero norm.
enum class ZeroNorm { kThrow, kZero };

class Tape;

class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
  double scalar() const;  // value of a 1 x 1 node
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value);
  Var constant(Tensor value);
  Var constant(double value) { return constant(Tensor::scalar(value)); }

  // Fills grad() of every node reachable from `loss`. Requires a 1 x 1 loss.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  Op op(Var v) const { return nodes_[v.id_].op; }

  // Used by the op functions below; not intended for direct use.
  struct Node {
    Tensor value;
    Tensor grad;
    Op op = Op::kConstant;
    std::size_t parents[2] = {0, 0};
    int n_parents = 0;
    bool needs_grad = false;
    double aux = 0.0;
    std::size_t aux_index = 0;
    ZeroNorm zero_norm = ZeroNorm::kThrow;
  };
  Var push(Node node);
  const Node& node(std::size_t id) const { return nodes_[id]; }

 private:
  void propagate(std::size_t id);
  Tensor& grad_of(std::size_t id);

  std::vector<Node> nodes_;
  friend class Var;
};

// Elementwise ops require identical shapes; there is no implicit broadcasting.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var matmul(Var a, Var b);
// Stacks rows: (n x c) and (m x c) -> (n + m) x c.
Var concat(Var a, Var b);
Var sum(Var a);
Var mean(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
// Natural log; throws NumericError on any non-positive entry.
Var log(Var a);
// Sum of absolute values.
Var l1(Var a);
// Cosine similarity of two same-shape vectors; throws on zero norm.
Var cosine_similarity(Var a, Var b);
// Cosine of every row of m (n x h) with the row vector r (1 x h) -> n x 1.
Var rowwise_cosine(Var m, Var r, ZeroNorm zero_norm = ZeroNorm::kThrow);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
// m (n x h) + r (1 x h) broadcast over rows.
Var add_row(Var m, Var r);
Var softplus(Var a);
// max(a, floor) elementwise; gradient passes where a >= floor.
Var clamp_min(Var a, double floor);
// Contiguous block of a's storage, reshaped to rows x cols.
Var slice(Var a, std::size_t offset, std::size_t rows, std::size_t cols);
// Single entry (flat index) as a 1 x 1 node.
Var element(Var a, std::size_t index);

struct CoordinateCheck {
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<CoordinateCheck> coords;
  bool passed = true;
  double max_rel_error = 0.0;
};

// Builds a scalar graph from the leaf x.
using ScalarGraph = std::function<Var(Tape&, Var)>;

// Central differences against backward(); relative error uses
// max(1, |analytic|, |numeric|) as denominator.
GradCheckReport grad_check(const ScalarGraph& f, const Tensor& point, double eps, double tol);

}  // namespace navmr::ad
