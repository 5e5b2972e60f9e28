#include "nbd/icnn.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace nbd {

void IcnnConfig::validate() const {
  if (input_dim <= 0) throw std::invalid_argument("icnn: input_dim must be positive");
  if (hidden.empty()) throw std::invalid_argument("icnn: at least one hidden layer is required");
  for (int w : hidden) {
    if (w <= 0) throw std::invalid_argument("icnn: hidden widths must be positive");
  }
  if (!(strictness >= 0.0) || !std::isfinite(strictness)) {
    throw std::invalid_argument("icnn: strictness must be finite and non-negative");
  }
}

std::vector<NamedParam> IcnnParams::parameters() {
  std::vector<NamedParam> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string prefix = "phi." + std::to_string(i) + ".";
    if (layers[i].raw_w.size() != 0) out.push_back({prefix + "w", &layers[i].raw_w});
    out.push_back({prefix + "u", &layers[i].u});
    out.push_back({prefix + "b", &layers[i].b});
  }
  return out;
}

std::size_t IcnnParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.raw_w.size() + l.u.size() + l.b.size());
  return n;
}

IcnnParams init_icnn(const IcnnConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  IcnnParams params;
  params.config = config;
  const int d = config.input_dim;
  std::vector<int> widths = config.hidden;
  widths.push_back(1);

  int prev = 0;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const int out = widths[i];
    IcnnLayer layer;
    if (i > 0) {
      // softplus(raw) centred on 1 / fan-in.
      const double centre = std::log(std::expm1(1.0 / prev));
      layer.raw_w.resize(out, prev);
      for (Eigen::Index k = 0; k < layer.raw_w.size(); ++k) layer.raw_w.data()[k] = centre + 0.1 * normal(rng);
    }
    const double u_scale = 1.0 / std::sqrt(static_cast<double>(d));
    layer.u.resize(out, d);
    for (Eigen::Index k = 0; k < layer.u.size(); ++k) layer.u.data()[k] = u_scale * normal(rng);
    layer.b = Matrix::Zero(1, out);
    params.layers.push_back(std::move(layer));
    prev = out;
  }
  return params;
}

IcnnGraph::IcnnGraph(ad::Tape& tape, const IcnnParams& params, bool trainable)
    : input_dim_(params.config.input_dim), strictness_(params.config.strictness) {
  auto bind = [&](const Matrix& m) {
    Var v = trainable ? tape.variable(m) : tape.constant(m);
    if (trainable) leaves_.push_back(v);
    return v;
  };
  for (const auto& l : params.layers) {
    Layer layer;
    if (l.raw_w.size() != 0) layer.w_pos = ad::softplus(bind(l.raw_w));
    layer.u = bind(l.u);
    layer.b = bind(l.b);
    layers_.push_back(layer);
  }
}

void IcnnGraph::check_input(const Matrix& x) const {
  if (x.cols() != input_dim_) {
    throw std::invalid_argument("icnn: expected " + std::to_string(input_dim_) + " input features, got " +
                                std::to_string(x.cols()));
  }
}

Var IcnnGraph::value(Var x) const {
  check_input(x.value());
  Var z = ad::softplus(ad::affine(x, layers_[0].u, layers_[0].b));
  for (std::size_t i = 1; i + 1 < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    z = ad::softplus(ad::add(ad::affine(x, l.u, l.b), ad::matmul_nt(z, l.w_pos)));
  }
  const Layer& last = layers_.back();
  Var out = ad::add(ad::affine(x, last.u, last.b), ad::matmul_nt(z, last.w_pos));
  if (strictness_ > 0.0) out = ad::add(out, ad::scale(ad::sum_rows(ad::square(x)), strictness_));
  return out;
}

Dual IcnnGraph::value(const Dual& x) const {
  check_input(x.primal.value());
  Dual z = ad::softplus(ad::affine(x, layers_[0].u, layers_[0].b));
  for (std::size_t i = 1; i + 1 < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    z = ad::softplus(ad::add(ad::affine(x, l.u, l.b), ad::matmul_nt(z, l.w_pos)));
  }
  const Layer& last = layers_.back();
  Dual out = ad::add(ad::affine(x, last.u, last.b), ad::matmul_nt(z, last.w_pos));
  if (strictness_ > 0.0) out = ad::add(out, ad::scale(ad::sum_rows(ad::square(x)), strictness_));
  return out;
}

Var IcnnGraph::gradient(Var x) const {
  check_input(x.value());
  // Forward pass keeping pre-activations, then the input gradient spelled
  // out as tape operations so it can itself be differentiated.
  std::vector<Var> pre;
  pre.push_back(ad::affine(x, layers_[0].u, layers_[0].b));
  Var z = ad::softplus(pre.back());
  for (std::size_t i = 1; i + 1 < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    pre.push_back(ad::add(ad::affine(x, l.u, l.b), ad::matmul_nt(z, l.w_pos)));
    z = ad::softplus(pre.back());
  }

  ad::Tape& tape = *x.tape();
  Var ones = tape.constant(Matrix::Ones(x.rows(), 1));
  const Layer& last = layers_.back();
  Var grad_x = ad::matmul(ones, last.u);
  Var grad_z = ad::matmul(ones, last.w_pos);
  for (std::size_t i = pre.size(); i-- > 0;) {
    Var grad_pre = ad::mul(grad_z, ad::sigmoid(pre[i]));
    grad_x = ad::add(grad_x, ad::matmul(grad_pre, layers_[i].u));
    if (i > 0) grad_z = ad::matmul(grad_pre, layers_[i].w_pos);
  }
  if (strictness_ > 0.0) grad_x = ad::add(grad_x, ad::scale(x, 2.0 * strictness_));
  return grad_x;
}

Matrix phi_forward(const IcnnParams& params, const Matrix& x) {
  ad::Tape tape;
  IcnnGraph graph(tape, params, false);
  return graph.value(tape.constant(x)).value();
}

}  // namespace nbd
