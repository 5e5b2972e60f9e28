#pragma once

#include "nbd/autodiff.hpp"

#include <string>

namespace nbd {

using ad::Dual;
using ad::Matrix;
using ad::Var;

/// A named handle onto a trainable matrix owned by some model.
struct NamedParam {
  std::string name;
  Matrix* value;
};

/// A convex, differentiable scalar function phi evaluated row-wise on tape
/// nodes. value() maps n x d to n x 1; gradient() maps n x d to n x d.
class Generator {
 public:
  virtual ~Generator() = default;

  virtual Var value(Var x) const = 0;
  /// Forward-mode evaluation; the tangent is <grad phi(x.primal), x.tangent>.
  virtual Dual value(const Dual& x) const = 0;
  virtual Var gradient(Var x) const = 0;
  /// Throws std::domain_error when some row of x lies outside the domain.
  virtual void check_domain(const Matrix& x) const { (void)x; }
};

}  // namespace nbd
