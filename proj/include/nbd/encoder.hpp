#pragma once

#include "nbd/generator.hpp"

#include <cstdint>
#include <vector>

namespace nbd {

struct EncoderConfig {
  int input_dim = 0;
  std::vector<int> hidden = {256, 256};
  int embed_dim = 128;

  void validate() const;
};

struct EncoderLayer {
  Matrix w;  // out x in
  Matrix b;  // 1 x out
};

/// Multilayer perceptron f_theta: softplus on hidden layers, affine output.
struct EncoderParams {
  EncoderConfig config;
  std::vector<EncoderLayer> layers;

  std::vector<NamedParam> parameters();
};

EncoderParams init_encoder(const EncoderConfig& config, std::uint64_t seed);

/// A single square linear layer with w = I and zero bias.
EncoderParams identity_encoder(int dim);

class EncoderGraph {
 public:
  EncoderGraph(ad::Tape& tape, const EncoderParams& params, bool trainable);

  Var encode(Var a) const;
  const std::vector<Var>& leaves() const { return leaves_; }

 private:
  std::vector<std::pair<Var, Var>> layers_;
  std::vector<Var> leaves_;
  int input_dim_;
};

Matrix encode(const EncoderParams& params, const Matrix& a);

}  // namespace nbd
