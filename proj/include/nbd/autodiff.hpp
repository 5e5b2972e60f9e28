#pragma once

// Reverse-mode automatic differentiation over matrix-valued nodes, with
// forward-mode tangents that are themselves recorded on the tape. Rows are
// samples and columns are features throughout; a scalar is a 1x1 node.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace nbd::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class Op : std::uint8_t {
  constant,
  variable,
  add,
  sub,
  mul,
  div,
  neg,
  exp,
  log,
  softplus,
  sigmoid,
  square,
  sqrt,
  scale,
  shift,
  max_const,
  dot_rows,
  sum_rows,
  sum,
  mean,
  matmul,
  matmul_nt,
  affine,
  broadcast_add,
  transpose,
  gather,
  gather_rows,
};

std::string_view op_name(Op op);

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  /// Gradient of the last backward() root with respect to this node.
  /// Zero-filled when no gradient reached it.
  Matrix grad() const;
  double scalar() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Op op() const;
  bool requires_grad() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// A recorded computation graph. Single-writer; one tape per training step.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var constant(double value);
  /// A differentiable leaf (a parameter or an input we want gradients for).
  Var variable(Matrix value);

  /// Records a primitive by name. Throws std::invalid_argument for names
  /// outside the supported set or for the wrong number of arguments.
  Var record(std::string_view op, std::span<const Var> args);

  /// Reverse sweep from a 1x1 root. Previous gradients are cleared.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

  // Internal node access for primitives.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;
  Var push(Matrix value, Op op, bool requires_grad, BackwardFn fn);
  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad_ref(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  Op op(std::size_t id) const { return nodes_[id].op; }

  template <class Derived>
  void accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Op op;
    bool requires_grad;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;
};

/// Forward-mode pair; both components are tape nodes, so anything computed
/// from the tangent stays differentiable in reverse mode.
struct Dual {
  Var primal;
  Var tangent;
};

// Primitives. Shapes must match exactly unless noted; 1x1 operands
// broadcast for add/sub/mul/div.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var a);
Var exp(Var a);
Var log(Var a);
Var softplus(Var a);
Var sigmoid(Var a);
Var square(Var a);
/// Square root whose gradient is taken as zero at an exact zero.
Var sqrt(Var a);
Var scale(Var a, double c);
Var shift(Var a, double c);
Var max_const(Var a, double c);
/// Row-wise inner product: (n x d, n x d) -> n x 1.
Var dot_rows(Var a, Var b);
/// n x d -> n x 1.
Var sum_rows(Var a);
/// Sum of all entries -> 1x1.
Var sum(Var a);
Var mean(Var a);
Var matmul(Var a, Var b);
/// a * b^T.
Var matmul_nt(Var a, Var b);
/// x * w^T + bias, with bias a 1 x out row broadcast over samples.
Var affine(Var x, Var w, Var bias);
/// Adds an n x 1 column to every column, or a 1 x m row to every row.
Var broadcast_add(Var m, Var v);
Var transpose(Var a);
/// Picks m(rows[k], cols[k]) into a k x 1 column.
Var gather(Var m, std::vector<Index> rows, std::vector<Index> cols);
Var gather_rows(Var m, std::vector<Index> rows);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return neg(a); }

// Forward-mode rules on duals.
Dual add(const Dual& a, const Dual& b);
Dual sub(const Dual& a, const Dual& b);
Dual mul(const Dual& a, const Dual& b);
Dual exp(const Dual& a);
Dual log(const Dual& a);
Dual softplus(const Dual& a);
Dual sigmoid(const Dual& a);
Dual square(const Dual& a);
Dual scale(const Dual& a, double c);
Dual shift(const Dual& a, double c);
Dual sum_rows(const Dual& a);
Dual dot_rows(const Dual& a, const Dual& b);
/// Dual input through a non-dual linear map: x * w^T (+ bias).
Dual matmul_nt(const Dual& x, Var w);
Dual affine(const Dual& x, Var w, Var bias);
Dual add(const Dual& a, Var b);

/// <grad f(point_i), direction_i> for each row i, computed by one tangent
/// evaluation of f. f must map an n x d dual to an n x 1 dual.
Var directional_derivative(const std::function<Dual(const Dual&)>& f, Var point, Var direction);

/// Runs backward from `loss` and returns d loss / d p for each p. Every p
/// must be a variable leaf of the same tape.
std::vector<Matrix> parameter_gradients(Var loss, std::span<const Var> params);

}  // namespace nbd::ad
