#pragma once

#include "nbd/encoder.hpp"
#include "nbd/generator.hpp"
#include "nbd/icnn.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace nbd {

// ------------------------------------------------------------ generators

enum class GeneratorKind { sq_euclidean, mahalanobis, xlogx, shifted_xlogx, kl_positive };

std::string_view to_string(GeneratorKind kind);
GeneratorKind parse_generator_kind(std::string_view name);

/// Closed-form generators with analytic gradients:
///   sq_euclidean   |x|^2                 -> 2x
///   mahalanobis    x^T A x               -> 2Ax
///   xlogx          sum t log t           -> 1 + log t
///   shifted_xlogx  sum (t+1) log(t+1)    -> 1 + log(t+1)
///   kl_positive    <x, log x>            -> 1 + log x   (KL on the simplex)
class ClosedFormGenerator final : public Generator {
 public:
  explicit ClosedFormGenerator(GeneratorKind kind, Matrix a = {});

  Var value(Var x) const override;
  Dual value(const Dual& x) const override;
  Var gradient(Var x) const override;
  void check_domain(const Matrix& x) const override;

  GeneratorKind kind() const { return kind_; }
  const Matrix& matrix() const { return a_; }

 private:
  GeneratorKind kind_;
  Matrix a_;
};

/// Throws std::invalid_argument when a mahalanobis matrix is not symmetric
/// positive definite.
ClosedFormGenerator closed_form_generator(GeneratorKind kind, const Matrix& a = {});

/// Entries at or below this are outside the domain of log-based generators.
inline constexpr double kLogDomainFloor = 1e-12;

// ------------------------------------------------------------ Bregman

/// phi(x) - phi(y) - <grad phi(y), x - y> per row; the inner product is the
/// tangent of phi evaluated at y in direction x - y. n x d, n x d -> n x 1.
Var bregman(const Generator& gen, Var x, Var y);

/// Entry (i, j) = D(x_i, y_j), using phi(x_i) - phi(y_j) - <grad phi(y_j), x_i>
/// + <grad phi(y_j), y_j>. n x d, m x d -> n x m.
Var bregman_pairwise(const Generator& gen, Var x, Var y);

/// Binds a generator onto a tape; closed-form generators ignore the tape.
/// Binders hold their own copy of the parameters.
using GeneratorBinder = std::function<std::unique_ptr<Generator>(ad::Tape&)>;
GeneratorBinder bind(const ClosedFormGenerator& gen);
GeneratorBinder bind(const IcnnParams& params);

Matrix bregman(const GeneratorBinder& gen, const Matrix& x, const Matrix& y);
Matrix bregman_pairwise(const GeneratorBinder& gen, const Matrix& x, const Matrix& y);

/// Hand-derived divergence of a closed-form generator (no autodiff).
Matrix analytic_divergence(const ClosedFormGenerator& gen, const Matrix& x, const Matrix& y);

// ------------------------------------------------------------ learned models

enum class Variant { plain, sqrt, gsb };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

/// A divergence bound to one tape. Inputs to pairs()/pairwise() are already
/// embedded; embed() maps raw inputs into that space.
class BoundDivergence {
 public:
  virtual ~BoundDivergence() = default;
  virtual Var embed(Var a) const = 0;
  virtual Var pairs(Var x, Var y) const = 0;
  virtual Var pairwise(Var x, Var y) const = 0;
  /// Variable leaves in parameters() order (empty when not trainable).
  virtual const std::vector<Var>& leaves() const = 0;
};

/// Anything trainable by the regression / triplet loops.
class DivergenceLearner {
 public:
  virtual ~DivergenceLearner() = default;
  virtual std::vector<NamedParam> parameters() = 0;
  virtual std::unique_ptr<BoundDivergence> bind(ad::Tape& tape, bool trainable) const = 0;
  virtual int input_dim() const = 0;
};

/// Neural Bregman divergence: optional encoder f_theta followed by an ICNN phi.
struct DivergenceModel final : DivergenceLearner {
  Variant variant = Variant::plain;
  std::optional<EncoderParams> encoder;
  IcnnParams phi;

  std::vector<NamedParam> parameters() override;
  std::unique_ptr<BoundDivergence> bind(ad::Tape& tape, bool trainable) const override;
  int input_dim() const override;
};

struct ModelConfig {
  int input_dim = 0;
  Variant variant = Variant::plain;
  bool use_encoder = false;
  std::vector<int> encoder_hidden = {256, 256};
  int embed_dim = 128;
  std::vector<int> phi_hidden = {128, 128};
  double strictness = 1e-3;
};

DivergenceModel make_model(const ModelConfig& config, std::uint64_t seed);

/// Squared Mahalanobis baseline |L (a - b)|^2 with L learned.
struct MahalanobisModel final : DivergenceLearner {
  Matrix l;

  std::vector<NamedParam> parameters() override;
  std::unique_ptr<BoundDivergence> bind(ad::Tape& tape, bool trainable) const override;
  int input_dim() const override { return static_cast<int>(l.cols()); }
};

/// L = I, i.e. plain squared Euclidean distance.
MahalanobisModel euclidean_model(int dim);

/// Row-wise divergence D(a_i, b_i) between raw inputs.
Matrix learned_divergence(const DivergenceLearner& model, const Matrix& a, const Matrix& b);
/// D(a_i, b_j) between raw inputs.
Matrix learned_pairwise(const DivergenceLearner& model, const Matrix& a, const Matrix& b);
/// Raw inputs to the space the divergence acts on.
Matrix embed(const DivergenceLearner& model, const Matrix& a);
/// D(x_i, y_j) between already-embedded points (e.g. points vs centroids).
Matrix embedded_pairwise(const DivergenceLearner& model, const Matrix& x, const Matrix& y);

}  // namespace nbd
