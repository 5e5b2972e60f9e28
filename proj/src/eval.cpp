#include "nbd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace nbd {

PairwiseDivergence divergence_fn(const ClosedFormGenerator& gen) {
  return [binder = bind(gen)](const Matrix& x, const Matrix& c) { return bregman_pairwise(binder, x, c); };
}

PairwiseDivergence divergence_fn(const DivergenceLearner& model) {
  return [&model](const Matrix& x, const Matrix& c) { return embedded_pairwise(model, x, c); };
}

namespace {

std::vector<int> assign(const Matrix& d) {
  std::vector<int> out(static_cast<std::size_t>(d.rows()));
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < d.cols(); ++c) {
      if (d(i, c) < d(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

double objective_of(const Matrix& d, const std::vector<int>& a) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) total += d(i, a[static_cast<std::size_t>(i)]);
  return total;
}

void check_divergence_shape(const Matrix& d, Eigen::Index n, Eigen::Index k) {
  if (d.rows() != n || d.cols() != k) throw std::logic_error("kmeans: divergence callable returned the wrong shape");
  if (!d.allFinite()) throw std::domain_error("kmeans: divergence is not finite on these points");
}

}  // namespace

Matrix kmeanspp_init(const Matrix& points, int k, const PairwiseDivergence& d, std::mt19937_64& rng) {
  const Eigen::Index n = points.rows();
  if (k < 1 || n < k) throw std::invalid_argument("kmeans: need 1 <= k <= number of points");
  Matrix centroids(k, points.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centroids.row(0) = points.row(first(rng));
  Eigen::VectorXd closest = d(points, centroids.topRows(1)).col(0).cwiseMax(0.0);
  for (int c = 1; c < k; ++c) {
    const double total = closest.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      const double target = u(rng);
      double run = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        run += closest(i);
        if (run > target && closest(i) > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = first(rng);
    }
    centroids.row(c) = points.row(pick);
    closest = closest.cwiseMin(d(points, centroids.row(c)).col(0).cwiseMax(0.0));
  }
  return centroids;
}

double clustering_objective(const Matrix& points, const Matrix& centroids, const std::vector<int>& assignments,
                            const PairwiseDivergence& d) {
  const Matrix dm = d(points, centroids);
  check_divergence_shape(dm, points.rows(), centroids.rows());
  return objective_of(dm, assignments);
}

ClusteringResult bregman_kmeans(const Matrix& points, Matrix centroids, const PairwiseDivergence& d, int max_iter) {
  const Eigen::Index n = points.rows();
  const auto k = static_cast<int>(centroids.rows());
  if (k < 1 || n < k) throw std::invalid_argument("kmeans: need 1 <= k <= number of points");
  if (centroids.cols() != points.cols()) throw std::invalid_argument("kmeans: centroid dimension mismatch");
  if (max_iter < 0) throw std::invalid_argument("kmeans: max_iter must be non-negative");

  ClusteringResult r;
  Matrix dm = d(points, centroids);
  check_divergence_shape(dm, n, k);
  r.assignments = assign(dm);
  r.history.push_back(r.assignments);
  r.objective_trace.push_back(objective_of(dm, r.assignments));

  for (int it = 0; it < max_iter; ++it) {
    Matrix sums = Matrix::Zero(k, points.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = r.assignments[static_cast<std::size_t>(i)];
      sums.row(c) += points.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    std::vector<double> gap(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) gap[static_cast<std::size_t>(i)] = dm(i, r.assignments[static_cast<std::size_t>(i)]);
    std::vector<char> taken(static_cast<std::size_t>(n), 0);
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centroids.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
        continue;
      }
      Eigen::Index far = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (taken[static_cast<std::size_t>(i)]) continue;
        if (far < 0 || gap[static_cast<std::size_t>(i)] > gap[static_cast<std::size_t>(far)]) far = i;
      }
      taken[static_cast<std::size_t>(far)] = 1;
      centroids.row(c) = points.row(far);
    }

    dm = d(points, centroids);
    check_divergence_shape(dm, n, k);
    std::vector<int> next = assign(dm);
    r.iterations = it + 1;
    r.history.push_back(next);
    r.objective_trace.push_back(objective_of(dm, next));
    const bool stable = next == r.assignments;
    r.assignments = std::move(next);
    if (stable) break;
  }
  r.centroids = std::move(centroids);
  r.objective = r.objective_trace.back();
  return r;
}

ClusteringResult bregman_kmeans(const Matrix& points, int k, const PairwiseDivergence& d, std::uint64_t seed,
                                int max_iter) {
  std::mt19937_64 rng(seed);
  return bregman_kmeans(points, kmeanspp_init(points, k, d, rng), d, max_iter);
}

ClusteringResult bregman_kmeans_restarts(const Matrix& points, int k, const PairwiseDivergence& d,
                                         std::uint64_t seed, int restarts, int max_iter) {
  if (restarts < 1) throw std::invalid_argument("kmeans: restarts must be positive");
  std::mt19937_64 rng(seed);
  ClusteringResult best;
  for (int r = 0; r < restarts; ++r) {
    auto result = bregman_kmeans(points, kmeanspp_init(points, k, d, rng), d, max_iter);
    if (r == 0 || result.objective < best.objective) best = std::move(result);
  }
  return best;
}

// ------------------------------------------------------------ metrics

namespace {

void require_same_length(const std::vector<int>& a, const std::vector<int>& b, const char* what) {
  if (a.size() != b.size()) throw std::invalid_argument(std::string(what) + ": length mismatch");
  if (a.empty()) throw std::invalid_argument(std::string(what) + ": empty input");
}

}  // namespace

double purity(const std::vector<int>& assignments, const std::vector<int>& labels) {
  require_same_length(assignments, labels, "purity");
  std::vector<int> clusters = assignments;
  std::sort(clusters.begin(), clusters.end());
  clusters.erase(std::unique(clusters.begin(), clusters.end()), clusters.end());
  std::vector<int> classes = labels;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  auto index = [](const std::vector<int>& v, int x) {
    return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
  };
  std::vector<std::vector<int>> table(clusters.size(), std::vector<int>(classes.size(), 0));
  for (std::size_t i = 0; i < labels.size(); ++i) ++table[index(clusters, assignments[i])][index(classes, labels[i])];
  long total = 0;
  for (const auto& row : table) total += *std::max_element(row.begin(), row.end());
  return static_cast<double>(total) / static_cast<double>(labels.size());
}

double rand_index(const std::vector<int>& assignments, const std::vector<int>& labels) {
  require_same_length(assignments, labels, "rand_index");
  const std::size_t n = labels.size();
  if (n < 2) return 1.0;
  long agree = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if ((assignments[i] == assignments[j]) == (labels[i] == labels[j])) ++agree;
    }
  }
  return static_cast<double>(agree) / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

RankMetrics rank_map_auc(const Matrix& divergence, const std::vector<int>& query_labels,
                         const std::vector<int>& corpus_labels) {
  if (divergence.rows() != static_cast<Eigen::Index>(query_labels.size()) ||
      divergence.cols() != static_cast<Eigen::Index>(corpus_labels.size())) {
    throw std::invalid_argument("rank_map_auc: divergence matrix does not match label counts");
  }
  RankMetrics out;
  double ap_total = 0.0, auc_total = 0.0;
  int ap_count = 0, auc_count = 0;
  const auto m = static_cast<Eigen::Index>(corpus_labels.size());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  for (Eigen::Index q = 0; q < divergence.rows(); ++q) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return divergence(q, a) < divergence(q, b); });
    const int label = query_labels[static_cast<std::size_t>(q)];
    long relevant = 0;
    for (int c : corpus_labels) relevant += c == label;
    if (relevant == 0) {
      ++out.skipped;
      continue;
    }
    const long irrelevant = m - relevant;
    double precision_sum = 0.0;
    long hits = 0, irrelevant_seen = 0, above = 0;
    for (Eigen::Index r = 0; r < m; ++r) {
      if (corpus_labels[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] == label) {
        ++hits;
        precision_sum += static_cast<double>(hits) / static_cast<double>(r + 1);
        above += irrelevant - irrelevant_seen;
      } else {
        ++irrelevant_seen;
      }
    }
    ap_total += precision_sum / static_cast<double>(relevant);
    ++ap_count;
    if (irrelevant == 0) {
      ++out.auc_undefined;
    } else {
      auc_total += static_cast<double>(above) / (static_cast<double>(relevant) * static_cast<double>(irrelevant));
      ++auc_count;
    }
  }
  out.map = ap_count > 0 ? ap_total / ap_count : 0.0;
  out.auc = auc_count > 0 ? auc_total / auc_count : 0.0;
  return out;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  const auto old = out.precision(17);
  auto cell = [&](const std::optional<double>& v) {
    if (v) out << *v;
  };
  out << "dataset,model,map,auc,purity,rand,seed,mae,mse\n";
  for (const auto& r : rows) {
    out << r.dataset << ',' << r.model << ',';
    cell(r.map);
    out << ',';
    cell(r.auc);
    out << ',';
    cell(r.purity);
    out << ',';
    cell(r.rand);
    out << ',' << r.seed << ',';
    cell(r.mae);
    out << ',';
    cell(r.mse);
    out << '\n';
  }
  out.precision(old);
}

}  // namespace nbd
