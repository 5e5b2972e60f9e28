#include "nbd/divergence.hpp"

#include "nbd/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nbd {

namespace {

void require_same_dims(const Matrix& x, const Matrix& y, const char* what) {
  if (x.cols() != y.cols()) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" + std::to_string(x.cols()) + " vs " +
                                std::to_string(y.cols()) + ")");
  }
}

bool log_based(GeneratorKind k) {
  return k == GeneratorKind::xlogx || k == GeneratorKind::kl_positive || k == GeneratorKind::shifted_xlogx;
}

}  // namespace

std::string_view to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::sq_euclidean: return "sq-euclidean";
    case GeneratorKind::mahalanobis: return "mahalanobis";
    case GeneratorKind::xlogx: return "xlogx";
    case GeneratorKind::shifted_xlogx: return "shifted-xlogx";
    case GeneratorKind::kl_positive: return "kl-positive";
  }
  return "unknown";
}

GeneratorKind parse_generator_kind(std::string_view name) {
  if (name == "sq-euclidean" || name == "euclidean") return GeneratorKind::sq_euclidean;
  if (name == "mahalanobis") return GeneratorKind::mahalanobis;
  if (name == "xlogx") return GeneratorKind::xlogx;
  if (name == "shifted-xlogx") return GeneratorKind::shifted_xlogx;
  if (name == "kl-positive" || name == "kl") return GeneratorKind::kl_positive;
  throw std::invalid_argument("unknown generator kind '" + std::string(name) + "'");
}

// ------------------------------------------------------------ closed form

ClosedFormGenerator::ClosedFormGenerator(GeneratorKind kind, Matrix a) : kind_(kind), a_(std::move(a)) {}

ClosedFormGenerator closed_form_generator(GeneratorKind kind, const Matrix& a) {
  if (kind != GeneratorKind::mahalanobis) return ClosedFormGenerator(kind);
  if (a.rows() == 0 || a.rows() != a.cols()) throw std::invalid_argument("mahalanobis: A must be square");
  if (!a.isApprox(a.transpose(), 1e-12)) throw std::invalid_argument("mahalanobis: A must be symmetric");
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("mahalanobis: A must be positive definite");
  return ClosedFormGenerator(kind, a);
}

void ClosedFormGenerator::check_domain(const Matrix& x) const {
  if (kind_ == GeneratorKind::mahalanobis && x.cols() != a_.rows()) {
    throw std::invalid_argument("mahalanobis: expected " + std::to_string(a_.rows()) + " features, got " +
                                std::to_string(x.cols()));
  }
  if (!log_based(kind_)) return;
  const double offset = kind_ == GeneratorKind::shifted_xlogx ? 1.0 : 0.0;
  if ((x.array() + offset <= kLogDomainFloor).any()) {
    throw std::domain_error(std::string(to_string(kind_)) + ": input outside the positive domain");
  }
}

Var ClosedFormGenerator::value(Var x) const {
  switch (kind_) {
    case GeneratorKind::sq_euclidean: return ad::sum_rows(ad::square(x));
    case GeneratorKind::mahalanobis: {
      Var a = x.tape()->constant(a_);
      return ad::dot_rows(ad::matmul(x, a), x);
    }
    case GeneratorKind::xlogx:
    case GeneratorKind::kl_positive: return ad::sum_rows(ad::mul(x, ad::log(x)));
    case GeneratorKind::shifted_xlogx: {
      Var s = ad::shift(x, 1.0);
      return ad::sum_rows(ad::mul(s, ad::log(s)));
    }
  }
  throw std::logic_error("unreachable");
}

Dual ClosedFormGenerator::value(const Dual& x) const {
  switch (kind_) {
    case GeneratorKind::sq_euclidean: return ad::sum_rows(ad::square(x));
    case GeneratorKind::mahalanobis: {
      Var ax = ad::matmul(x.primal, x.primal.tape()->constant(a_));
      return {ad::dot_rows(ax, x.primal), ad::scale(ad::dot_rows(ax, x.tangent), 2.0)};
    }
    case GeneratorKind::xlogx:
    case GeneratorKind::kl_positive: return ad::sum_rows(ad::mul(x, ad::log(x)));
    case GeneratorKind::shifted_xlogx: {
      Dual s = ad::shift(x, 1.0);
      return ad::sum_rows(ad::mul(s, ad::log(s)));
    }
  }
  throw std::logic_error("unreachable");
}

Var ClosedFormGenerator::gradient(Var x) const {
  switch (kind_) {
    case GeneratorKind::sq_euclidean: return ad::scale(x, 2.0);
    case GeneratorKind::mahalanobis: return ad::scale(ad::matmul(x, x.tape()->constant(a_)), 2.0);
    case GeneratorKind::xlogx:
    case GeneratorKind::kl_positive: return ad::shift(ad::log(x), 1.0);
    case GeneratorKind::shifted_xlogx: return ad::shift(ad::log(ad::shift(x, 1.0)), 1.0);
  }
  throw std::logic_error("unreachable");
}

Matrix analytic_divergence(const ClosedFormGenerator& gen, const Matrix& x, const Matrix& y) {
  require_same_dims(x, y, "analytic_divergence");
  gen.check_domain(x);
  gen.check_domain(y);
  const Matrix diff = x - y;
  switch (gen.kind()) {
    case GeneratorKind::sq_euclidean: return diff.rowwise().squaredNorm();
    case GeneratorKind::mahalanobis: return (diff * gen.matrix()).cwiseProduct(diff).rowwise().sum();
    case GeneratorKind::xlogx:
    case GeneratorKind::kl_positive:
      return (x.array() * (x.array() / y.array()).log() - x.array() + y.array()).matrix().rowwise().sum();
    case GeneratorKind::shifted_xlogx: {
      const auto xs = x.array() + 1.0;
      const auto ys = y.array() + 1.0;
      return (xs * (xs / ys).log() - x.array() + y.array()).matrix().rowwise().sum();
    }
  }
  throw std::logic_error("unreachable");
}

// ------------------------------------------------------------ Bregman

Var bregman(const Generator& gen, Var x, Var y) {
  require_same_dims(x.value(), y.value(), "bregman");
  if (x.rows() != y.rows()) throw std::invalid_argument("bregman: row counts differ");
  gen.check_domain(x.value());
  gen.check_domain(y.value());
  Var phi_x = gen.value(x);
  Dual at_y = gen.value(Dual{y, ad::sub(x, y)});
  return ad::sub(ad::sub(phi_x, at_y.primal), at_y.tangent);
}

Var bregman_pairwise(const Generator& gen, Var x, Var y) {
  require_same_dims(x.value(), y.value(), "bregman_pairwise");
  gen.check_domain(x.value());
  gen.check_domain(y.value());
  Var phi_x = gen.value(x);
  Var phi_y = gen.value(y);
  Var grad_y = gen.gradient(y);
  Var cross = ad::matmul_nt(x, grad_y);
  Var row = ad::transpose(ad::sub(ad::dot_rows(grad_y, y), phi_y));
  return ad::broadcast_add(ad::broadcast_add(ad::neg(cross), phi_x), row);
}

GeneratorBinder bind(const ClosedFormGenerator& gen) {
  return [gen](ad::Tape&) -> std::unique_ptr<Generator> { return std::make_unique<ClosedFormGenerator>(gen); };
}

GeneratorBinder bind(const IcnnParams& params) {
  auto owned = std::make_shared<const IcnnParams>(params);
  return [owned](ad::Tape& tape) -> std::unique_ptr<Generator> {
    return std::make_unique<IcnnGraph>(tape, *owned, false);
  };
}

Matrix bregman(const GeneratorBinder& binder, const Matrix& x, const Matrix& y) {
  ad::Tape tape;
  auto gen = binder(tape);
  return bregman(*gen, tape.constant(x), tape.constant(y)).value();
}

Matrix bregman_pairwise(const GeneratorBinder& binder, const Matrix& x, const Matrix& y) {
  ad::Tape tape;
  auto gen = binder(tape);
  return bregman_pairwise(*gen, tape.constant(x), tape.constant(y)).value();
}

// ------------------------------------------------------------ learned models

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::plain: return "plain";
    case Variant::sqrt: return "sqrt";
    case Variant::gsb: return "gsb";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  if (name == "plain" || name == "nbd") return Variant::plain;
  if (name == "sqrt") return Variant::sqrt;
  if (name == "gsb") return Variant::gsb;
  throw std::invalid_argument("unknown divergence variant '" + std::string(name) + "'");
}

namespace {

constexpr double kSqrtFloor = 1e-12;

Var squared_distance_pairwise(Var x, Var y) {
  Var cross = ad::scale(ad::matmul_nt(x, y), -2.0);
  Var xx = ad::sum_rows(ad::square(x));
  Var yy = ad::transpose(ad::sum_rows(ad::square(y)));
  return ad::broadcast_add(ad::broadcast_add(cross, xx), yy);
}

class BoundNbd final : public BoundDivergence {
 public:
  BoundNbd(ad::Tape& tape, const DivergenceModel& model, bool trainable)
      : variant_(model.variant), phi_(tape, model.phi, trainable) {
    if (model.encoder) {
      encoder_.emplace(tape, *model.encoder, trainable);
      leaves_ = encoder_->leaves();
    }
    leaves_.insert(leaves_.end(), phi_.leaves().begin(), phi_.leaves().end());
  }

  Var embed(Var a) const override { return encoder_ ? encoder_->encode(a) : a; }

  Var pairs(Var x, Var y) const override {
    Var plain = bregman(phi_, x, y);
    switch (variant_) {
      case Variant::plain: return plain;
      case Variant::sqrt: return ad::sqrt(ad::shift(plain, kSqrtFloor));
      case Variant::gsb: {
        Var sym = ad::add(plain, bregman(phi_, y, x));
        Var dx = ad::scale(ad::sum_rows(ad::square(ad::sub(x, y))), 0.5);
        Var dg = ad::scale(ad::sum_rows(ad::square(ad::sub(phi_.gradient(x), phi_.gradient(y)))), 0.5);
        return ad::sqrt(ad::max_const(ad::add(ad::add(sym, dx), dg), 0.0));
      }
    }
    throw std::logic_error("unreachable");
  }

  Var pairwise(Var x, Var y) const override {
    Var plain = bregman_pairwise(phi_, x, y);
    switch (variant_) {
      case Variant::plain: return plain;
      case Variant::sqrt: return ad::sqrt(ad::shift(plain, kSqrtFloor));
      case Variant::gsb: {
        Var sym = ad::add(plain, ad::transpose(bregman_pairwise(phi_, y, x)));
        Var dx = ad::scale(squared_distance_pairwise(x, y), 0.5);
        Var dg = ad::scale(squared_distance_pairwise(phi_.gradient(x), phi_.gradient(y)), 0.5);
        return ad::sqrt(ad::max_const(ad::add(ad::add(sym, dx), dg), 0.0));
      }
    }
    throw std::logic_error("unreachable");
  }

  const std::vector<Var>& leaves() const override { return leaves_; }

 private:
  Variant variant_;
  std::optional<EncoderGraph> encoder_;
  IcnnGraph phi_;
  std::vector<Var> leaves_;
};

class BoundMahalanobis final : public BoundDivergence {
 public:
  BoundMahalanobis(ad::Tape& tape, const MahalanobisModel& model, bool trainable) {
    l_ = trainable ? tape.variable(model.l) : tape.constant(model.l);
    if (trainable) leaves_.push_back(l_);
  }

  Var embed(Var a) const override { return ad::matmul_nt(a, l_); }
  Var pairs(Var x, Var y) const override { return ad::sum_rows(ad::square(ad::sub(x, y))); }
  Var pairwise(Var x, Var y) const override { return squared_distance_pairwise(x, y); }
  const std::vector<Var>& leaves() const override { return leaves_; }

 private:
  Var l_;
  std::vector<Var> leaves_;
};

// Rows per evaluation chunk; keeps tape memory bounded for large inputs.
constexpr Eigen::Index kChunkRows = 2048;

}  // namespace

std::vector<NamedParam> DivergenceModel::parameters() {
  std::vector<NamedParam> out;
  if (encoder) out = encoder->parameters();
  auto p = phi.parameters();
  out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::unique_ptr<BoundDivergence> DivergenceModel::bind(ad::Tape& tape, bool trainable) const {
  return std::make_unique<BoundNbd>(tape, *this, trainable);
}

int DivergenceModel::input_dim() const { return encoder ? encoder->config.input_dim : phi.config.input_dim; }

DivergenceModel make_model(const ModelConfig& config, std::uint64_t seed) {
  DivergenceModel model;
  model.variant = config.variant;
  int phi_dim = config.input_dim;
  if (config.use_encoder) {
    model.encoder = init_encoder(EncoderConfig{config.input_dim, config.encoder_hidden, config.embed_dim}, seed + 1);
    phi_dim = config.embed_dim;
  }
  model.phi = init_icnn(IcnnConfig{phi_dim, config.phi_hidden, config.strictness}, seed);
  return model;
}

std::vector<NamedParam> MahalanobisModel::parameters() { return {{"mahalanobis.l", &l}}; }

std::unique_ptr<BoundDivergence> MahalanobisModel::bind(ad::Tape& tape, bool trainable) const {
  return std::make_unique<BoundMahalanobis>(tape, *this, trainable);
}

MahalanobisModel euclidean_model(int dim) {
  MahalanobisModel m;
  m.l = Matrix::Identity(dim, dim);
  return m;
}

Matrix embed(const DivergenceLearner& model, const Matrix& a) {
  if (a.cols() != model.input_dim()) {
    throw std::invalid_argument("embed: expected " + std::to_string(model.input_dim()) + " features, got " +
                                std::to_string(a.cols()));
  }
  const Eigen::Index n = a.rows();
  const std::size_t chunks = static_cast<std::size_t>((n + kChunkRows - 1) / kChunkRows);
  std::vector<Matrix> parts(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    const Eigen::Index start = static_cast<Eigen::Index>(c) * kChunkRows;
    const Eigen::Index len = std::min(kChunkRows, n - start);
    ad::Tape tape;
    auto bound = model.bind(tape, false);
    parts[c] = bound->embed(tape.constant(a.middleRows(start, len))).value();
  });
  if (chunks == 0) {
    ad::Tape tape;
    auto bound = model.bind(tape, false);
    return bound->embed(tape.constant(a)).value();
  }
  Matrix out(n, parts[0].cols());
  for (std::size_t c = 0; c < chunks; ++c) {
    out.middleRows(static_cast<Eigen::Index>(c) * kChunkRows, parts[c].rows()) = parts[c];
  }
  return out;
}

Matrix learned_divergence(const DivergenceLearner& model, const Matrix& a, const Matrix& b) {
  require_same_dims(a, b, "learned_divergence");
  if (a.rows() != b.rows()) throw std::invalid_argument("learned_divergence: row counts differ");
  if (a.cols() != model.input_dim()) {
    throw std::invalid_argument("learned_divergence: expected " + std::to_string(model.input_dim()) +
                                " features, got " + std::to_string(a.cols()));
  }
  const Eigen::Index n = a.rows();
  Matrix out(n, 1);
  const std::size_t chunks = static_cast<std::size_t>((n + kChunkRows - 1) / kChunkRows);
  parallel_for(chunks, [&](std::size_t c) {
    const Eigen::Index start = static_cast<Eigen::Index>(c) * kChunkRows;
    const Eigen::Index len = std::min(kChunkRows, n - start);
    ad::Tape tape;
    auto bound = model.bind(tape, false);
    Var x = bound->embed(tape.constant(a.middleRows(start, len)));
    Var y = bound->embed(tape.constant(b.middleRows(start, len)));
    out.middleRows(start, len) = bound->pairs(x, y).value();
  });
  return out;
}

Matrix embedded_pairwise(const DivergenceLearner& model, const Matrix& x, const Matrix& y) {
  require_same_dims(x, y, "embedded_pairwise");
  const Eigen::Index n = x.rows();
  Matrix out(n, y.rows());
  const Eigen::Index rows_per_chunk = std::max<Eigen::Index>(1, (1 << 20) / std::max<Eigen::Index>(1, y.rows()));
  const std::size_t chunks = static_cast<std::size_t>((n + rows_per_chunk - 1) / rows_per_chunk);
  parallel_for(chunks, [&](std::size_t c) {
    const Eigen::Index start = static_cast<Eigen::Index>(c) * rows_per_chunk;
    const Eigen::Index len = std::min(rows_per_chunk, n - start);
    ad::Tape tape;
    auto bound = model.bind(tape, false);
    out.middleRows(start, len) = bound->pairwise(tape.constant(x.middleRows(start, len)), tape.constant(y)).value();
  });
  return out;
}

Matrix learned_pairwise(const DivergenceLearner& model, const Matrix& a, const Matrix& b) {
  return embedded_pairwise(model, embed(model, a), embed(model, b));
}

}  // namespace nbd
