#include "nbd/encoder.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace nbd {

void EncoderConfig::validate() const {
  if (input_dim <= 0) throw std::invalid_argument("encoder: input_dim must be positive");
  if (embed_dim <= 0) throw std::invalid_argument("encoder: embed_dim must be positive");
  for (int w : hidden) {
    if (w <= 0) throw std::invalid_argument("encoder: hidden widths must be positive");
  }
}

std::vector<NamedParam> EncoderParams::parameters() {
  std::vector<NamedParam> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string prefix = "encoder." + std::to_string(i) + ".";
    out.push_back({prefix + "w", &layers[i].w});
    out.push_back({prefix + "b", &layers[i].b});
  }
  return out;
}

EncoderParams init_encoder(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  EncoderParams params;
  params.config = config;
  std::vector<int> widths = config.hidden;
  widths.push_back(config.embed_dim);
  int prev = config.input_dim;
  for (int out : widths) {
    EncoderLayer layer;
    const double s = 1.0 / std::sqrt(static_cast<double>(prev));
    layer.w.resize(out, prev);
    for (Eigen::Index k = 0; k < layer.w.size(); ++k) layer.w.data()[k] = s * normal(rng);
    layer.b = Matrix::Zero(1, out);
    params.layers.push_back(std::move(layer));
    prev = out;
  }
  return params;
}

EncoderParams identity_encoder(int dim) {
  EncoderParams params;
  params.config = EncoderConfig{dim, {}, dim};
  params.layers.push_back({Matrix::Identity(dim, dim), Matrix::Zero(1, dim)});
  return params;
}

EncoderGraph::EncoderGraph(ad::Tape& tape, const EncoderParams& params, bool trainable)
    : input_dim_(params.config.input_dim) {
  for (const auto& l : params.layers) {
    Var w = trainable ? tape.variable(l.w) : tape.constant(l.w);
    Var b = trainable ? tape.variable(l.b) : tape.constant(l.b);
    if (trainable) {
      leaves_.push_back(w);
      leaves_.push_back(b);
    }
    layers_.emplace_back(w, b);
  }
}

Var EncoderGraph::encode(Var a) const {
  if (a.cols() != input_dim_) {
    throw std::invalid_argument("encoder: expected " + std::to_string(input_dim_) + " input features, got " +
                                std::to_string(a.cols()));
  }
  Var h = a;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = ad::affine(h, layers_[i].first, layers_[i].second);
    if (i + 1 < layers_.size()) h = ad::softplus(h);
  }
  return h;
}

Matrix encode(const EncoderParams& params, const Matrix& a) {
  ad::Tape tape;
  EncoderGraph graph(tape, params, false);
  return graph.encode(tape.constant(a)).value();
}

}  // namespace nbd
