#pragma once

#include "nbd/data.hpp"
#include "nbd/divergence.hpp"
#include "nbd/graph.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace nbd {

// ------------------------------------------------------------ mixtures

enum class MixtureFamily { gaussian, exponential, multinomial };

std::string_view to_string(MixtureFamily f);
MixtureFamily parse_mixture_family(std::string_view name);

struct MixtureSpec {
  MixtureFamily family = MixtureFamily::gaussian;
  int n = 1000;
  int d = 10;
  int k = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Mixture {
  LabeledPoints points;
  /// Per-cluster parameters, k x d: means (gaussian), rates (exponential) or
  /// category probabilities (multinomial).
  Matrix params;
  /// Per-cluster covariance (gaussian only).
  std::vector<Matrix> covariances;
};

/// Cluster parameters are drawn first, then the n points; a point's cluster
/// is uniform over k. Drawing more points with the same seed extends the
/// sequence, so gen with n = 2000 starts with the n = 1000 sample.
Mixture gen_mixture(const MixtureSpec& spec);

/// Random SPD matrix U diag(1 + u) U^T with U a random orthogonal basis and
/// u uniform on [0, 1).
Matrix random_spd(int d, std::mt19937_64& rng);

// ------------------------------------------------------------ regression

enum class Correlation { none, med, high };

std::string_view to_string(Correlation c);
Correlation parse_correlation(std::string_view name);

struct RegressionSpec {
  int pairs = 50000;
  int test_pairs = 10000;
  int informative = 10;
  int distractors = 10;
  GeneratorKind target = GeneratorKind::sq_euclidean;
  Correlation correlation = Correlation::none;
  std::uint64_t seed = 0;

  int dims() const { return informative + distractors; }
  void validate() const;
};

struct RegressionData {
  PairSet train;
  PairSet test;
  /// Feature covariance (a correlation matrix).
  Matrix covariance;
  /// Matrix of the mahalanobis target (empty otherwise).
  Matrix target_matrix;
};

/// Raw features are N(0, covariance); the target only sees the informative
/// block, passed through softplus (xlogx, shifted-xlogx) or softmax
/// (kl-positive) before the divergence.
RegressionData gen_regression_pairs(const RegressionSpec& spec);

/// Correlation matrix of size d with condition number in [lo, hi].
/// Throws std::runtime_error when no draw lands in the band.
Matrix controlled_correlation(int d, double lo, double hi, std::mt19937_64& rng);

double condition_number(const Matrix& symmetric);

/// The positivity map applied to informative features for a target kind.
Matrix target_support(GeneratorKind kind, const Matrix& informative);

// ------------------------------------------------------------ shortest path

struct GraphSpec {
  GraphKind dataset = GraphKind::grid3d;
  /// Nodes per axis; 0 picks the desk-scale default of the dataset.
  int side = 0;
  bool unit_weights = false;
  int landmarks = 32;
  int distractors = 96;
  double noise = 0.2;
  int train_pairs = 20000;
  int test_pairs = 4000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GraphTask {
  Graph graph;
  /// One feature row per node.
  Matrix features;
  std::vector<int> landmark_nodes;
  PairSet train;
  PairSet test;
  /// Node ids behind each train/test pair.
  std::vector<std::pair<int, int>> train_nodes;
  std::vector<std::pair<int, int>> test_nodes;
  /// Raw shortest-path lengths are divided by this.
  double scale = 1.0;
};

GraphTask gen_graph_task(const GraphSpec& spec);

// ------------------------------------------------------------ co-learning

enum class ColearnTarget { shifted_xlogx, xlogx, squared };

std::string_view to_string(ColearnTarget t);
ColearnTarget parse_colearn_target(std::string_view name);

struct ColearnSpec {
  int classes = 10;
  int dim = 32;
  double noise = 0.5;
  int train_per_class = 100;
  int test_per_class = 50;
  int train_pairs = 10000;
  int test_pairs = 2000;
  ColearnTarget target = ColearnTarget::shifted_xlogx;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ColearnData {
  Matrix prototypes;  // classes x dim
  LabeledPoints train_samples;
  LabeledPoints test_samples;
  PairSet train;
  PairSet test;
};

/// Scalar divergence between two digits under the chosen target.
double colearn_target(ColearnTarget target, double digit_a, double digit_b);

/// Samples are prototype + N(0, noise^2); class c stands for digit c. Pairs
/// draw two samples independently. Under the xlogx target digit 0 lies
/// outside the domain, so pairs touching class 0 are redrawn.
ColearnData gen_colearn(const ColearnSpec& spec);

}  // namespace nbd
