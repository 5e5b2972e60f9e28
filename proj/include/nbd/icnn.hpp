#pragma once

// Fully input-convex network for the generating function phi:
//
//   z_1     = softplus(U_0 x + b_0)
//   z_{i+1} = softplus(W+_i z_i + U_i x + b_i)       1 <= i < L
//   phi(x)  = W+_L z_L + U_L x + b_L + alpha |x|^2
//
// with W+_i = softplus(raw_i) elementwise, so every effective weight on a
// hidden path is strictly positive. The output layer is affine.

#include "nbd/generator.hpp"

#include <cstdint>
#include <vector>

namespace nbd {

struct IcnnConfig {
  int input_dim = 0;
  std::vector<int> hidden = {128, 128};
  double strictness = 1e-3;

  void validate() const;
};

struct IcnnLayer {
  Matrix raw_w;  // out x previous width; empty for the first layer
  Matrix u;      // out x input_dim
  Matrix b;      // 1 x out
};

struct IcnnParams {
  IcnnConfig config;
  std::vector<IcnnLayer> layers;

  std::vector<NamedParam> parameters();
  std::size_t parameter_count() const;
};

IcnnParams init_icnn(const IcnnConfig& config, std::uint64_t seed);

/// Binds a set of parameters to one tape. When `trainable`, every parameter
/// matrix becomes a variable leaf, listed by leaves() in parameters() order.
class IcnnGraph final : public Generator {
 public:
  IcnnGraph(ad::Tape& tape, const IcnnParams& params, bool trainable);

  Var value(Var x) const override;
  Dual value(const Dual& x) const override;
  Var gradient(Var x) const override;

  const std::vector<Var>& leaves() const { return leaves_; }
  int input_dim() const { return input_dim_; }

 private:
  struct Layer {
    Var w_pos;  // invalid for the first layer
    Var u;
    Var b;
  };
  void check_input(const Matrix& x) const;

  std::vector<Layer> layers_;
  std::vector<Var> leaves_;
  int input_dim_;
  double strictness_;
};

/// Plain evaluation of phi on each row of x.
Matrix phi_forward(const IcnnParams& params, const Matrix& x);

}  // namespace nbd
