#include "nbd/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nbd::ad {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Tape& same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || !b.valid()) throw std::invalid_argument(std::string(op) + ": invalid operand");
  if (a.tape() != b.tape()) throw std::invalid_argument(std::string(op) + ": operands live on different tapes");
  return *a.tape();
}

Tape& tape_of(Var a, const char* op) {
  if (!a.valid()) throw std::invalid_argument(std::string(op) + ": invalid operand");
  return *a.tape();
}

bool is_scalar(const Matrix& m) { return m.rows() == 1 && m.cols() == 1; }

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
  }
}

// Shape rule for elementwise binaries: equal shapes, or one side 1x1.
void require_elementwise(const Matrix& a, const Matrix& b, const char* op) {
  if (is_scalar(a) || is_scalar(b)) return;
  require_same_shape(a, b, op);
}

// Accumulates g into node id, summing it down when the operand was a
// broadcast 1x1.
template <class Derived>
void accumulate_reduced(Tape& tp, std::size_t id, const Eigen::MatrixBase<Derived>& g) {
  if (!tp.requires_grad(id)) return;
  if (is_scalar(tp.value(id)) && !(g.rows() == 1 && g.cols() == 1)) {
    tp.accumulate(id, Matrix::Constant(1, 1, g.sum()));
  } else {
    tp.accumulate(id, g);
  }
}

// m itself when it already has the target shape, else a 1x1 expanded into
// storage.
const Matrix& full(const Matrix& m, Index rows, Index cols, Matrix& storage) {
  if (m.rows() == rows && m.cols() == cols) return m;
  storage = Matrix::Constant(rows, cols, m(0, 0));
  return storage;
}

// Elementwise over whole matrices so the transcendental calls vectorise.
// log1p(e) uses log(u) e / (u - 1) with u = 1 + e, exact to rounding.
Matrix stable_softplus(const Matrix& x) {
  const Eigen::ArrayXXd e = (-x.array().abs()).exp();
  const Eigen::ArrayXXd u = 1.0 + e;
  const Eigen::ArrayXXd log1p_e = (u == 1.0).select(e, u.log() * e / (u - 1.0));
  return (x.array().max(0.0) + log1p_e).matrix();
}

Matrix stable_sigmoid(const Matrix& x) {
  const Eigen::ArrayXXd e = (-x.array().abs()).exp();
  const Eigen::ArrayXXd r = 1.0 / (1.0 + e);
  return (x.array() >= 0.0).select(r, e * r).matrix();
}

template <class F>
Var unary(Var a, Op op, F forward, Tape::BackwardFn fn) {
  Tape& t = tape_of(a, op_name(op).data());
  Matrix out = a.value().unaryExpr(forward);
  return t.push(std::move(out), op, a.requires_grad(), std::move(fn));
}

template <class F>
Var unary_matrix(Var a, Op op, F forward, Tape::BackwardFn fn) {
  Tape& t = tape_of(a, op_name(op).data());
  Matrix out = forward(a.value());
  return t.push(std::move(out), op, a.requires_grad(), std::move(fn));
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::constant: return "constant";
    case Op::variable: return "variable";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::div: return "div";
    case Op::neg: return "neg";
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::softplus: return "softplus";
    case Op::sigmoid: return "sigmoid";
    case Op::square: return "square";
    case Op::sqrt: return "sqrt";
    case Op::scale: return "scale";
    case Op::shift: return "shift";
    case Op::max_const: return "max_const";
    case Op::dot_rows: return "dot_rows";
    case Op::sum_rows: return "sum_rows";
    case Op::sum: return "sum";
    case Op::mean: return "mean";
    case Op::matmul: return "matmul";
    case Op::matmul_nt: return "matmul_nt";
    case Op::affine: return "affine";
    case Op::broadcast_add: return "broadcast_add";
    case Op::transpose: return "transpose";
    case Op::gather: return "gather";
    case Op::gather_rows: return "gather_rows";
  }
  return "unknown";
}

// ---------------------------------------------------------------- Var / Tape

const Matrix& Var::value() const { return tape_->value(id_); }

Matrix Var::grad() const {
  const Matrix& g = tape_->grad_ref(id_);
  if (g.size() == 0) return Matrix::Zero(rows(), cols());
  return g;
}

double Var::scalar() const {
  const Matrix& v = value();
  if (!is_scalar(v)) throw std::logic_error("Var::scalar on a " + shape(v) + " node");
  return v(0, 0);
}

Op Var::op() const { return tape_->op(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::push(Matrix value, Op op, bool requires_grad, BackwardFn fn) {
  nodes_.push_back(Node{std::move(value), Matrix(), op, requires_grad, requires_grad ? std::move(fn) : BackwardFn()});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) { return push(std::move(value), Op::constant, false, nullptr); }

Var Tape::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::variable(Matrix value) { return push(std::move(value), Op::variable, true, nullptr); }

void Tape::backward(Var root) {
  if (root.tape() != this) throw std::invalid_argument("backward: root is not on this tape");
  if (!is_scalar(root.value())) throw std::invalid_argument("backward: root must be scalar, got " + shape(root.value()));
  for (Node& n : nodes_) n.grad.resize(0, 0);
  if (!nodes_[root.id()].requires_grad) return;
  nodes_[root.id()].grad = Matrix::Ones(1, 1);
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && n.grad.size() != 0) n.backward(*this, i);
  }
}

Var Tape::record(std::string_view name, std::span<const Var> args) {
  auto want = [&](std::size_t n) {
    if (args.size() != n) {
      throw std::invalid_argument("record: primitive '" + std::string(name) + "' takes " + std::to_string(n) +
                                  " arguments, got " + std::to_string(args.size()));
    }
  };
  if (name == "add") return want(2), add(args[0], args[1]);
  if (name == "sub") return want(2), sub(args[0], args[1]);
  if (name == "mul") return want(2), mul(args[0], args[1]);
  if (name == "div") return want(2), div(args[0], args[1]);
  if (name == "neg") return want(1), neg(args[0]);
  if (name == "exp") return want(1), exp(args[0]);
  if (name == "log") return want(1), log(args[0]);
  if (name == "softplus") return want(1), softplus(args[0]);
  if (name == "sigmoid") return want(1), sigmoid(args[0]);
  if (name == "square") return want(1), square(args[0]);
  if (name == "sqrt") return want(1), sqrt(args[0]);
  if (name == "dot" || name == "dot_rows") return want(2), dot_rows(args[0], args[1]);
  if (name == "affine") return want(3), affine(args[0], args[1], args[2]);
  if (name == "matmul") return want(2), matmul(args[0], args[1]);
  if (name == "sum") return want(1), sum(args[0]);
  if (name == "sum_rows") return want(1), sum_rows(args[0]);
  if (name == "mean") return want(1), mean(args[0]);
  if (name == "max") {
    // max-with-constant: the second operand must be a 1x1 constant.
    want(2);
    if (args[1].op() != Op::constant || !is_scalar(args[1].value())) {
      throw std::invalid_argument("record: 'max' needs a 1x1 constant bound");
    }
    return max_const(args[0], args[1].scalar());
  }
  throw std::invalid_argument("record: unsupported primitive '" + std::string(name) + "'");
}

// ---------------------------------------------------------------- binaries

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require_elementwise(av, bv, "add");
  const Index r = std::max(av.rows(), bv.rows());
  const Index c = std::max(av.cols(), bv.cols());
  Matrix sa, sb;
  Matrix out = full(av, r, c, sa) + full(bv, r, c, sb);
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(std::move(out), Op::add, a.requires_grad() || b.requires_grad(), [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_ref(self);
    accumulate_reduced(tp, ia, g);
    accumulate_reduced(tp, ib, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b, "sub");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require_elementwise(av, bv, "sub");
  const Index r = std::max(av.rows(), bv.rows());
  const Index c = std::max(av.cols(), bv.cols());
  Matrix sa, sb;
  Matrix out = full(av, r, c, sa) - full(bv, r, c, sb);
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(std::move(out), Op::sub, a.requires_grad() || b.requires_grad(), [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_ref(self);
    accumulate_reduced(tp, ia, g);
    accumulate_reduced(tp, ib, -g);
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b, "mul");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require_elementwise(av, bv, "mul");
  const Index r = std::max(av.rows(), bv.rows());
  const Index c = std::max(av.cols(), bv.cols());
  Matrix sa, sb;
  Matrix out = full(av, r, c, sa).cwiseProduct(full(bv, r, c, sb));
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(std::move(out), Op::mul, a.requires_grad() || b.requires_grad(), [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_ref(self);
    Matrix sa, sb;
    if (tp.requires_grad(ia)) accumulate_reduced(tp, ia, g.cwiseProduct(full(tp.value(ib), g.rows(), g.cols(), sb)));
    if (tp.requires_grad(ib)) accumulate_reduced(tp, ib, g.cwiseProduct(full(tp.value(ia), g.rows(), g.cols(), sa)));
  });
}

Var div(Var a, Var b) {
  Tape& t = same_tape(a, b, "div");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require_elementwise(av, bv, "div");
  const Index r = std::max(av.rows(), bv.rows());
  const Index c = std::max(av.cols(), bv.cols());
  Matrix sa, sb;
  Matrix out = full(av, r, c, sa).cwiseQuotient(full(bv, r, c, sb));
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(std::move(out), Op::div, a.requires_grad() || b.requires_grad(), [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_ref(self);
    Matrix sb;
    const Matrix& b_full = full(tp.value(ib), g.rows(), g.cols(), sb);
    if (tp.requires_grad(ia)) accumulate_reduced(tp, ia, g.cwiseQuotient(b_full));
    if (tp.requires_grad(ib)) {
      accumulate_reduced(tp, ib, -g.cwiseProduct(tp.value(self)).cwiseQuotient(b_full));
    }
  });
}

// ---------------------------------------------------------------- unaries

Var neg(Var a) {
  const std::size_t ia = a.id();
  return unary(a, Op::neg, [](double x) { return -x; },
               [ia](Tape& tp, std::size_t self) { tp.accumulate(ia, -tp.grad_ref(self)); });
}

Var exp(Var a) {
  const std::size_t ia = a.id();
  return unary_matrix(
      a, Op::exp, [](const Matrix& x) -> Matrix { return x.array().exp().matrix(); },
      [ia](Tape& tp, std::size_t self) { tp.accumulate(ia, tp.grad_ref(self).cwiseProduct(tp.value(self))); });
}

Var log(Var a) {
  const std::size_t ia = a.id();
  return unary_matrix(
      a, Op::log, [](const Matrix& x) -> Matrix { return x.array().log().matrix(); },
      [ia](Tape& tp, std::size_t self) { tp.accumulate(ia, tp.grad_ref(self).cwiseQuotient(tp.value(ia))); });
}

Var softplus(Var a) {
  const std::size_t ia = a.id();
  return unary_matrix(a, Op::softplus, stable_softplus, [ia](Tape& tp, std::size_t self) {
    tp.accumulate(ia, tp.grad_ref(self).cwiseProduct(stable_sigmoid(tp.value(ia))));
  });
}

Var sigmoid(Var a) {
  const std::size_t ia = a.id();
  return unary_matrix(a, Op::sigmoid, stable_sigmoid, [ia](Tape& tp, std::size_t self) {
    const Matrix& s = tp.value(self);
    tp.accumulate(ia, (tp.grad_ref(self).array() * s.array() * (1.0 - s.array())).matrix());
  });
}

Var square(Var a) {
  const std::size_t ia = a.id();
  return unary(a, Op::square, [](double x) { return x * x; }, [ia](Tape& tp, std::size_t self) {
    tp.accumulate(ia, (2.0 * tp.grad_ref(self).array() * tp.value(ia).array()).matrix());
  });
}

Var sqrt(Var a) {
  const std::size_t ia = a.id();
  return unary(a, Op::sqrt, [](double x) { return std::sqrt(x); }, [ia](Tape& tp, std::size_t self) {
    const Matrix& out = tp.value(self);
    const Matrix& g = tp.grad_ref(self);
    Matrix ga(g.rows(), g.cols());
    for (Index j = 0; j < g.cols(); ++j) {
      for (Index i = 0; i < g.rows(); ++i) ga(i, j) = out(i, j) > 0.0 ? g(i, j) / (2.0 * out(i, j)) : 0.0;
    }
    tp.accumulate(ia, ga);
  });
}

Var scale(Var a, double c) {
  const std::size_t ia = a.id();
  return unary(a, Op::scale, [c](double x) { return c * x; },
               [ia, c](Tape& tp, std::size_t self) { tp.accumulate(ia, c * tp.grad_ref(self)); });
}

Var shift(Var a, double c) {
  const std::size_t ia = a.id();
  return unary(a, Op::shift, [c](double x) { return x + c; },
               [ia](Tape& tp, std::size_t self) { tp.accumulate(ia, tp.grad_ref(self)); });
}

Var max_const(Var a, double c) {
  const std::size_t ia = a.id();
  return unary(a, Op::max_const, [c](double x) { return std::max(x, c); }, [ia, c](Tape& tp, std::size_t self) {
    const Matrix& x = tp.value(ia);
    tp.accumulate(ia, (x.array() > c).select(tp.grad_ref(self), 0.0).matrix());
  });
}

// ---------------------------------------------------------------- reductions

Var dot_rows(Var a, Var b) {
  Tape& t = same_tape(a, b, "dot_rows");
  require_same_shape(a.value(), b.value(), "dot_rows");
  Matrix out = a.value().cwiseProduct(b.value()).rowwise().sum();
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(std::move(out), Op::dot_rows, a.requires_grad() || b.requires_grad(),
                [ia, ib](Tape& tp, std::size_t self) {
                  const auto g = tp.grad_ref(self).col(0).array();
                  if (tp.requires_grad(ia)) tp.accumulate(ia, (tp.value(ib).array().colwise() * g).matrix());
                  if (tp.requires_grad(ib)) tp.accumulate(ib, (tp.value(ia).array().colwise() * g).matrix());
                });
}

Var sum_rows(Var a) {
  Tape& t = tape_of(a, "sum_rows");
  Matrix out = a.value().rowwise().sum();
  const std::size_t ia = a.id();
  const Index cols = a.cols();
  return t.push(std::move(out), Op::sum_rows, a.requires_grad(), [ia, cols](Tape& tp, std::size_t self) {
    tp.accumulate(ia, tp.grad_ref(self).replicate(1, cols));
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a, "sum");
  Matrix out = Matrix::Constant(1, 1, a.value().sum());
  const std::size_t ia = a.id();
  const Index r = a.rows(), c = a.cols();
  return t.push(std::move(out), Op::sum, a.requires_grad(), [ia, r, c](Tape& tp, std::size_t self) {
    tp.accumulate(ia, Matrix::Constant(r, c, tp.grad_ref(self)(0, 0)));
  });
}

Var mean(Var a) {
  Tape& t = tape_of(a, "mean");
  if (a.value().size() == 0) throw std::invalid_argument("mean: empty operand");
  const double n = static_cast<double>(a.value().size());
  Matrix out = Matrix::Constant(1, 1, a.value().sum() / n);
  const std::size_t ia = a.id();
  const Index r = a.rows(), c = a.cols();
  return t.push(std::move(out), Op::mean, a.requires_grad(), [ia, r, c, n](Tape& tp, std::size_t self) {
    tp.accumulate(ia, Matrix::Constant(r, c, tp.grad_ref(self)(0, 0) / n));
  });
}

// ---------------------------------------------------------------- linear maps

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions differ " + shape(a.value()) + " * " + shape(b.value()));
  }
  Matrix out = a.value() * b.value();
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(std::move(out), Op::matmul, a.requires_grad() || b.requires_grad(),
                [ia, ib](Tape& tp, std::size_t self) {
                  const Matrix& g = tp.grad_ref(self);
                  if (tp.requires_grad(ia)) tp.accumulate(ia, g * tp.value(ib).transpose());
                  if (tp.requires_grad(ib)) tp.accumulate(ib, tp.value(ia).transpose() * g);
                });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul_nt");
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("matmul_nt: inner dimensions differ " + shape(a.value()) + " * " + shape(b.value()) +
                                "^T");
  }
  Matrix out = a.value() * b.value().transpose();
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(std::move(out), Op::matmul_nt, a.requires_grad() || b.requires_grad(),
                [ia, ib](Tape& tp, std::size_t self) {
                  const Matrix& g = tp.grad_ref(self);
                  if (tp.requires_grad(ia)) tp.accumulate(ia, g * tp.value(ib));
                  if (tp.requires_grad(ib)) tp.accumulate(ib, g.transpose() * tp.value(ia));
                });
}

Var affine(Var x, Var w, Var bias) {
  Tape& t = same_tape(x, w, "affine");
  same_tape(x, bias, "affine");
  if (x.cols() != w.cols()) {
    throw std::invalid_argument("affine: input " + shape(x.value()) + " does not match weight " + shape(w.value()));
  }
  if (bias.rows() != 1 || bias.cols() != w.rows()) {
    throw std::invalid_argument("affine: bias " + shape(bias.value()) + " does not match weight " + shape(w.value()));
  }
  Matrix out = x.value() * w.value().transpose();
  out.rowwise() += bias.value().row(0);
  const std::size_t ix = x.id(), iw = w.id(), ib = bias.id();
  return t.push(std::move(out), Op::affine, x.requires_grad() || w.requires_grad() || bias.requires_grad(),
                [ix, iw, ib](Tape& tp, std::size_t self) {
                  const Matrix& g = tp.grad_ref(self);
                  if (tp.requires_grad(ix)) tp.accumulate(ix, g * tp.value(iw));
                  if (tp.requires_grad(iw)) tp.accumulate(iw, g.transpose() * tp.value(ix));
                  if (tp.requires_grad(ib)) tp.accumulate(ib, g.colwise().sum());
                });
}

Var broadcast_add(Var m, Var v) {
  Tape& t = same_tape(m, v, "broadcast_add");
  const Matrix& mv = m.value();
  const Matrix& vv = v.value();
  Matrix out = mv;
  bool column;
  if (vv.cols() == 1 && vv.rows() == mv.rows()) {
    out.colwise() += vv.col(0);
    column = true;
  } else if (vv.rows() == 1 && vv.cols() == mv.cols()) {
    out.rowwise() += vv.row(0);
    column = false;
  } else {
    throw std::invalid_argument("broadcast_add: cannot broadcast " + shape(vv) + " over " + shape(mv));
  }
  const std::size_t im = m.id(), iv = v.id();
  return t.push(std::move(out), Op::broadcast_add, m.requires_grad() || v.requires_grad(),
                [im, iv, column](Tape& tp, std::size_t self) {
                  const Matrix& g = tp.grad_ref(self);
                  tp.accumulate(im, g);
                  if (!tp.requires_grad(iv)) return;
                  if (column) {
                    tp.accumulate(iv, g.rowwise().sum());
                  } else {
                    tp.accumulate(iv, g.colwise().sum());
                  }
                });
}

Var transpose(Var a) {
  Tape& t = tape_of(a, "transpose");
  Matrix out = a.value().transpose();
  const std::size_t ia = a.id();
  return t.push(std::move(out), Op::transpose, a.requires_grad(),
                [ia](Tape& tp, std::size_t self) { tp.accumulate(ia, tp.grad_ref(self).transpose()); });
}

Var gather(Var m, std::vector<Index> rows, std::vector<Index> cols) {
  Tape& t = tape_of(m, "gather");
  if (rows.size() != cols.size()) throw std::invalid_argument("gather: index lists differ in length");
  const Matrix& mv = m.value();
  Matrix out(static_cast<Index>(rows.size()), 1);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= mv.rows() || cols[k] < 0 || cols[k] >= mv.cols()) {
      throw std::out_of_range("gather: index outside " + shape(mv));
    }
    out(static_cast<Index>(k), 0) = mv(rows[k], cols[k]);
  }
  const std::size_t im = m.id();
  const Index r = mv.rows(), c = mv.cols();
  return t.push(std::move(out), Op::gather, m.requires_grad(),
                [im, r, c, rows = std::move(rows), cols = std::move(cols)](Tape& tp, std::size_t self) {
                  const Matrix& g = tp.grad_ref(self);
                  Matrix gm = Matrix::Zero(r, c);
                  for (std::size_t k = 0; k < rows.size(); ++k) gm(rows[k], cols[k]) += g(static_cast<Index>(k), 0);
                  tp.accumulate(im, gm);
                });
}

Var gather_rows(Var m, std::vector<Index> rows) {
  Tape& t = tape_of(m, "gather_rows");
  const Matrix& mv = m.value();
  Matrix out(static_cast<Index>(rows.size()), mv.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= mv.rows()) throw std::out_of_range("gather_rows: row outside " + shape(mv));
    out.row(static_cast<Index>(k)) = mv.row(rows[k]);
  }
  const std::size_t im = m.id();
  const Index r = mv.rows(), c = mv.cols();
  return t.push(std::move(out), Op::gather_rows, m.requires_grad(),
                [im, r, c, rows = std::move(rows)](Tape& tp, std::size_t self) {
                  const Matrix& g = tp.grad_ref(self);
                  Matrix gm = Matrix::Zero(r, c);
                  for (std::size_t k = 0; k < rows.size(); ++k) gm.row(rows[k]) += g.row(static_cast<Index>(k));
                  tp.accumulate(im, gm);
                });
}

// ---------------------------------------------------------------- duals

Dual add(const Dual& a, const Dual& b) { return {add(a.primal, b.primal), add(a.tangent, b.tangent)}; }

Dual sub(const Dual& a, const Dual& b) { return {sub(a.primal, b.primal), sub(a.tangent, b.tangent)}; }

Dual mul(const Dual& a, const Dual& b) {
  return {mul(a.primal, b.primal), add(mul(a.tangent, b.primal), mul(a.primal, b.tangent))};
}

Dual exp(const Dual& a) {
  Var e = exp(a.primal);
  return {e, mul(e, a.tangent)};
}

Dual log(const Dual& a) { return {log(a.primal), div(a.tangent, a.primal)}; }

Dual softplus(const Dual& a) { return {softplus(a.primal), mul(sigmoid(a.primal), a.tangent)}; }

Dual sigmoid(const Dual& a) {
  Var s = sigmoid(a.primal);
  Var ds = mul(s, shift(neg(s), 1.0));
  return {s, mul(ds, a.tangent)};
}

Dual square(const Dual& a) { return {square(a.primal), scale(mul(a.primal, a.tangent), 2.0)}; }

Dual scale(const Dual& a, double c) { return {scale(a.primal, c), scale(a.tangent, c)}; }

Dual shift(const Dual& a, double c) { return {shift(a.primal, c), a.tangent}; }

Dual sum_rows(const Dual& a) { return {sum_rows(a.primal), sum_rows(a.tangent)}; }

Dual dot_rows(const Dual& a, const Dual& b) {
  return {dot_rows(a.primal, b.primal), add(dot_rows(a.tangent, b.primal), dot_rows(a.primal, b.tangent))};
}

Dual matmul_nt(const Dual& x, Var w) { return {matmul_nt(x.primal, w), matmul_nt(x.tangent, w)}; }

Dual affine(const Dual& x, Var w, Var bias) { return {affine(x.primal, w, bias), matmul_nt(x.tangent, w)}; }

Dual add(const Dual& a, Var b) { return {add(a.primal, b), a.tangent}; }

// ---------------------------------------------------------------- drivers

Var directional_derivative(const std::function<Dual(const Dual&)>& f, Var point, Var direction) {
  same_tape(point, direction, "directional_derivative");
  if (point.rows() != direction.rows() || point.cols() != direction.cols()) {
    throw std::invalid_argument("directional_derivative: point " + shape(point.value()) + " and direction " +
                                shape(direction.value()) + " differ in dimension");
  }
  Dual out = f(Dual{point, direction});
  if (out.tangent.cols() != 1 || out.tangent.rows() != point.rows()) {
    throw std::invalid_argument("directional_derivative: f must be scalar per row, got " +
                                shape(out.tangent.value()));
  }
  return out.tangent;
}

std::vector<Matrix> parameter_gradients(Var loss, std::span<const Var> params) {
  Tape& t = tape_of(loss, "parameter_gradients");
  for (const Var& p : params) {
    if (p.tape() != &t) throw std::invalid_argument("parameter_gradients: parameter is not on the loss tape");
    if (p.op() != Op::variable) {
      throw std::invalid_argument("parameter_gradients: node is not a registered variable leaf");
    }
  }
  t.backward(loss);
  std::vector<Matrix> grads;
  grads.reserve(params.size());
  for (const Var& p : params) grads.push_back(p.grad());
  return grads;
}

}  // namespace nbd::ad
