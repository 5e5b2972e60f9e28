#pragma once

#include "nbd/divergence.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace nbd {

/// D(points_i, centroids_c) as an n x k matrix.
using PairwiseDivergence = std::function<Matrix(const Matrix& points, const Matrix& centroids)>;

PairwiseDivergence divergence_fn(const ClosedFormGenerator& gen);
/// Acts on already-embedded points (see embed()).
PairwiseDivergence divergence_fn(const DivergenceLearner& model);

struct ClusteringResult {
  std::vector<int> assignments;
  Matrix centroids;
  int iterations = 0;
  double objective = 0.0;
  /// Objective after every assignment step, starting with the initial one.
  std::vector<double> objective_trace;
  /// Assignments after every assignment step, starting with the initial one.
  std::vector<std::vector<int>> history;
};

/// k-means++ seeding where the chance of picking a point is proportional to
/// its smallest divergence D(point, centroid) to the centroids so far.
Matrix kmeanspp_init(const Matrix& points, int k, const PairwiseDivergence& d, std::mt19937_64& rng);

/// Lloyd iterations from the given centroids: assign by argmin_c D(x, mu_c)
/// (lowest index on ties), move each centroid to the mean of its points.
/// An empty cluster is re-seeded at the point farthest from its current
/// centroid. Stops when assignments repeat or after max_iter updates.
ClusteringResult bregman_kmeans(const Matrix& points, Matrix centroids, const PairwiseDivergence& d, int max_iter = 100);

/// Seeds with kmeanspp_init, then runs Lloyd iterations.
ClusteringResult bregman_kmeans(const Matrix& points, int k, const PairwiseDivergence& d, std::uint64_t seed,
                                int max_iter = 100);

/// Best of `restarts` k-means++ runs by objective.
ClusteringResult bregman_kmeans_restarts(const Matrix& points, int k, const PairwiseDivergence& d,
                                         std::uint64_t seed, int restarts, int max_iter = 100);

/// Sum over points of D(x_i, mu_a(i)).
double clustering_objective(const Matrix& points, const Matrix& centroids, const std::vector<int>& assignments,
                            const PairwiseDivergence& d);

double purity(const std::vector<int>& assignments, const std::vector<int>& labels);
double rand_index(const std::vector<int>& assignments, const std::vector<int>& labels);

struct RankMetrics {
  double map = 0.0;
  double auc = 0.0;
  /// Queries whose class never occurs in the corpus.
  int skipped = 0;
  /// Queries whose whole corpus is relevant; they count for MAP only.
  int auc_undefined = 0;
};

/// Ranks the corpus for each query by increasing divergence(q, item), ties
/// by corpus index. MAP and AUC are macro averages over queries.
RankMetrics rank_map_auc(const Matrix& divergence, const std::vector<int>& query_labels,
                         const std::vector<int>& corpus_labels);

struct MetricsRow {
  std::string dataset;
  std::string model;
  std::optional<double> map;
  std::optional<double> auc;
  std::optional<double> purity;
  std::optional<double> rand;
  std::uint64_t seed = 0;
  std::optional<double> mae;
  std::optional<double> mse;
};

/// Header "dataset,model,map,auc,purity,rand,seed,mae,mse"; absent values
/// are empty.
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);

}  // namespace nbd
