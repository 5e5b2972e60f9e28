#include "nbd/datagen.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

namespace nbd {

namespace {

Matrix standard_normal(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
  }
  return m;
}

Matrix random_orthogonal(int d, std::mt19937_64& rng) {
  const Matrix g = standard_normal(rng, d, d);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  // Sign fix so the basis is uniformly distributed.
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  return q;
}

}  // namespace

// ------------------------------------------------------------ mixtures

std::string_view to_string(MixtureFamily f) {
  switch (f) {
    case MixtureFamily::gaussian: return "gaussian";
    case MixtureFamily::exponential: return "exponential";
    case MixtureFamily::multinomial: return "multinomial";
  }
  return "unknown";
}

MixtureFamily parse_mixture_family(std::string_view name) {
  if (name == "gaussian") return MixtureFamily::gaussian;
  if (name == "exponential") return MixtureFamily::exponential;
  if (name == "multinomial") return MixtureFamily::multinomial;
  throw std::invalid_argument("unknown mixture family '" + std::string(name) + "'");
}

void MixtureSpec::validate() const {
  if (k < 2) throw std::invalid_argument("mixture: need at least 2 clusters");
  if (n < k) throw std::invalid_argument("mixture: need at least as many points as clusters");
  if (d < 1) throw std::invalid_argument("mixture: dimension must be positive");
  if (family == MixtureFamily::multinomial && d < 2) throw std::invalid_argument("mixture: multinomial needs d >= 2");
}

Matrix random_spd(int d, std::mt19937_64& rng) {
  const Matrix u = random_orthogonal(d, rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd eig(d);
  for (int i = 0; i < d; ++i) eig(i) = 1.0 + unit(rng);
  return u * eig.asDiagonal() * u.transpose();
}

Mixture gen_mixture(const MixtureSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const int d = spec.d, k = spec.k;
  Mixture out;
  out.params.resize(k, d);
  std::vector<Eigen::LLT<Matrix>> factors;

  switch (spec.family) {
    case MixtureFamily::gaussian: {
      std::uniform_real_distribution<double> box(-4.0, 4.0);
      for (int c = 0; c < k; ++c) {
        for (int j = 0; j < d; ++j) out.params(c, j) = box(rng);
        Matrix cov = random_spd(d, rng) + 5.0 * Matrix::Identity(d, d);
        factors.emplace_back(cov);
        out.covariances.push_back(std::move(cov));
      }
      break;
    }
    case MixtureFamily::exponential: {
      std::uniform_real_distribution<double> rate(0.1, 10.0);
      for (int c = 0; c < k; ++c) {
        for (int j = 0; j < d; ++j) out.params(c, j) = rate(rng);
      }
      break;
    }
    case MixtureFamily::multinomial: {
      std::gamma_distribution<double> gamma(10.0, 1.0);
      for (int c = 0; c < k; ++c) {
        for (int j = 0; j < d; ++j) out.params(c, j) = gamma(rng);
        out.params.row(c) /= out.params.row(c).sum();
      }
      break;
    }
  }

  std::uniform_int_distribution<int> cluster(0, k - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  out.points.x.resize(spec.n, d);
  out.points.labels.resize(static_cast<std::size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) {
    const int c = cluster(rng);
    out.points.labels[static_cast<std::size_t>(i)] = c;
    switch (spec.family) {
      case MixtureFamily::gaussian: {
        Eigen::VectorXd z(d);
        for (int j = 0; j < d; ++j) z(j) = normal(rng);
        out.points.x.row(i) = out.params.row(c) + (factors[static_cast<std::size_t>(c)].matrixL() * z).transpose();
        break;
      }
      case MixtureFamily::exponential:
        for (int j = 0; j < d; ++j) {
          std::exponential_distribution<double> e(out.params(c, j));
          out.points.x(i, j) = e(rng);
        }
        break;
      case MixtureFamily::multinomial: {
        // Sequential conditional binomials.
        int left = 100;
        double mass = 1.0;
        for (int j = 0; j < d; ++j) {
          int draw = left;
          if (j + 1 < d) {
            const double p = std::clamp(out.params(c, j) / mass, 0.0, 1.0);
            std::binomial_distribution<int> b(left, p);
            draw = b(rng);
          }
          out.points.x(i, j) = draw;
          left -= draw;
          mass -= out.params(c, j);
        }
        break;
      }
    }
  }
  return out;
}

// ------------------------------------------------------------ regression

std::string_view to_string(Correlation c) {
  switch (c) {
    case Correlation::none: return "none";
    case Correlation::med: return "med";
    case Correlation::high: return "high";
  }
  return "unknown";
}

Correlation parse_correlation(std::string_view name) {
  if (name == "none") return Correlation::none;
  if (name == "med") return Correlation::med;
  if (name == "high") return Correlation::high;
  throw std::invalid_argument("unknown correlation level '" + std::string(name) + "'");
}

void RegressionSpec::validate() const {
  if (pairs <= 0) throw std::invalid_argument("regression: need at least one training pair");
  if (test_pairs < 0) throw std::invalid_argument("regression: test pair count must be non-negative");
  if (informative <= 0 || distractors < 0) throw std::invalid_argument("regression: invalid feature split");
}

double condition_number(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  if (ev.minCoeff() <= 0.0) return std::numeric_limits<double>::infinity();
  return ev.maxCoeff() / ev.minCoeff();
}

Matrix controlled_correlation(int d, double lo, double hi, std::mt19937_64& rng) {
  if (d < 2) throw std::runtime_error("controlled_correlation: need d >= 2 for a non-trivial condition number");
  if (!(lo >= 1.0 && hi >= lo)) throw std::invalid_argument("controlled_correlation: invalid band");
  // Rescaling to unit diagonal shrinks the spread, so overshoot the target.
  std::uniform_real_distribution<double> log_kappa(std::log(lo), std::log(hi) + std::log(8.0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int attempt = 0; attempt < 2000; ++attempt) {
    const double kappa = std::exp(log_kappa(rng));
    Eigen::VectorXd eig(d);
    eig(0) = 1.0;
    eig(d - 1) = kappa;
    for (int i = 1; i + 1 < d; ++i) eig(i) = std::exp(unit(rng) * std::log(kappa));
    const Matrix q = random_orthogonal(d, rng);
    const Matrix sigma = q * eig.asDiagonal() * q.transpose();
    const Eigen::VectorXd inv_sd = sigma.diagonal().cwiseSqrt().cwiseInverse();
    Matrix corr = inv_sd.asDiagonal() * sigma * inv_sd.asDiagonal();
    corr = 0.5 * (corr + corr.transpose());
    corr.diagonal().setOnes();
    const double k = condition_number(corr);
    if (k >= lo && k <= hi) return corr;
  }
  throw std::runtime_error("controlled_correlation: condition number band [" + std::to_string(lo) + ", " +
                           std::to_string(hi) + "] unachievable for d = " + std::to_string(d));
}

Matrix target_support(GeneratorKind kind, const Matrix& informative) {
  switch (kind) {
    case GeneratorKind::xlogx:
    case GeneratorKind::shifted_xlogx:
      return informative.unaryExpr([](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); });
    case GeneratorKind::kl_positive: {
      Matrix out(informative.rows(), informative.cols());
      for (Eigen::Index i = 0; i < informative.rows(); ++i) {
        const double m = informative.row(i).maxCoeff();
        const Eigen::RowVectorXd e = (informative.row(i).array() - m).exp().matrix();
        out.row(i) = e / e.sum();
      }
      return out;
    }
    case GeneratorKind::sq_euclidean:
    case GeneratorKind::mahalanobis: return informative;
  }
  throw std::logic_error("unreachable");
}

RegressionData gen_regression_pairs(const RegressionSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const int d = spec.dims();
  RegressionData out;
  switch (spec.correlation) {
    case Correlation::none: out.covariance = Matrix::Identity(d, d); break;
    case Correlation::med: out.covariance = controlled_correlation(d, 10.0, 100.0 - 1e-9, rng); break;
    case Correlation::high: out.covariance = controlled_correlation(d, 250.0, 500.0, rng); break;
  }
  if (spec.target == GeneratorKind::mahalanobis) out.target_matrix = random_spd(spec.informative, rng);
  const ClosedFormGenerator gen = closed_form_generator(spec.target, out.target_matrix);
  const Matrix chol = Eigen::LLT<Matrix>(out.covariance).matrixL();

  auto draw = [&](int count) {
    PairSet p;
    p.a = standard_normal(rng, count, d) * chol.transpose();
    p.b = standard_normal(rng, count, d) * chol.transpose();
    const Matrix sa = target_support(spec.target, p.a.leftCols(spec.informative));
    const Matrix sb = target_support(spec.target, p.b.leftCols(spec.informative));
    p.target = analytic_divergence(gen, sa, sb).cwiseMax(0.0);
    return p;
  };
  out.train = draw(spec.pairs);
  out.test = draw(spec.test_pairs);
  return out;
}

// ------------------------------------------------------------ shortest path

namespace {

int default_side(GraphKind k) {
  switch (k) {
    case GraphKind::grid3d:
    case GraphKind::grid3d_directed: return 10;
    case GraphKind::taxi: return 6;
    case GraphKind::traffic:
    case GraphKind::octagon: return 20;
  }
  return 10;
}

}  // namespace

void GraphSpec::validate() const {
  if (side < 0) throw std::invalid_argument("graph task: side must be non-negative");
  if (landmarks < 1) throw std::invalid_argument("graph task: need at least one landmark");
  if (distractors < 0) throw std::invalid_argument("graph task: distractor count must be non-negative");
  if (!(noise >= 0.0)) throw std::invalid_argument("graph task: noise must be non-negative");
  if (train_pairs < 1 || test_pairs < 0) throw std::invalid_argument("graph task: invalid pair counts");
}

GraphTask gen_graph_task(const GraphSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  GraphTask task;
  const int side = spec.side > 0 ? spec.side : default_side(spec.dataset);
  task.graph = build_graph(spec.dataset, side, spec.unit_weights, rng);
  const int n = task.graph.nodes();
  if (spec.landmarks > n) throw std::invalid_argument("graph task: more landmarks than nodes");

  std::vector<int> nodes(static_cast<std::size_t>(n));
  std::iota(nodes.begin(), nodes.end(), 0);
  std::shuffle(nodes.begin(), nodes.end(), rng);
  task.landmark_nodes.assign(nodes.begin(), nodes.begin() + spec.landmarks);

  const bool symmetric = is_symmetric(spec.dataset);
  const Graph reverse = task.graph.reversed();
  const int per_landmark = symmetric ? 1 : 2;
  const int signal = spec.landmarks * per_landmark;
  Matrix feats(n, signal + spec.distractors);
  for (int l = 0; l < spec.landmarks; ++l) {
    const int node = task.landmark_nodes[static_cast<std::size_t>(l)];
    // From the landmark, and (directed graphs) to the landmark.
    const auto from = dijkstra(task.graph, node);
    for (int v = 0; v < n; ++v) feats(v, l * per_landmark) = from[static_cast<std::size_t>(v)];
    if (!symmetric) {
      const auto to = dijkstra(reverse, node);
      for (int v = 0; v < n; ++v) feats(v, l * per_landmark + 1) = to[static_cast<std::size_t>(v)];
    }
  }
  if (!feats.leftCols(signal).allFinite()) throw std::runtime_error("graph task: graph is not strongly connected");
  std::normal_distribution<double> noise(0.0, spec.noise);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (int j = 0; j < signal; ++j) {
    const double mean = feats.col(j).mean();
    const double sd = std::sqrt((feats.col(j).array() - mean).square().mean());
    for (int v = 0; v < n; ++v) feats(v, j) = (feats(v, j) - mean) / (sd > 0 ? sd : 1.0) + noise(rng);
  }
  for (int j = signal; j < signal + spec.distractors; ++j) {
    for (int v = 0; v < n; ++v) feats(v, j) = unit(rng);
  }
  task.features = std::move(feats);

  const int total = spec.train_pairs + spec.test_pairs;
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(total));
  while (static_cast<int>(pairs.size()) < total) {
    const int u = pick(rng), v = pick(rng);
    if (u != v) pairs.emplace_back(u, v);
  }
  std::map<int, std::vector<double>> from_source;
  std::vector<double> raw(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto it = from_source.find(pairs[i].first);
    if (it == from_source.end()) it = from_source.emplace(pairs[i].first, dijkstra(task.graph, pairs[i].first)).first;
    raw[i] = it->second[static_cast<std::size_t>(pairs[i].second)];
    if (!std::isfinite(raw[i])) throw std::runtime_error("graph task: disconnected pair");
  }
  double sum = 0.0;
  for (double r : raw) sum += r;
  task.scale = sum / static_cast<double>(raw.size());

  auto fill = [&](PairSet& set, std::vector<std::pair<int, int>>& ids, int start, int count) {
    set.a.resize(count, task.features.cols());
    set.b.resize(count, task.features.cols());
    set.target.resize(count, 1);
    for (int i = 0; i < count; ++i) {
      const auto [u, v] = pairs[static_cast<std::size_t>(start + i)];
      set.a.row(i) = task.features.row(u);
      set.b.row(i) = task.features.row(v);
      set.target(i, 0) = raw[static_cast<std::size_t>(start + i)] / task.scale;
      ids.emplace_back(u, v);
    }
  };
  fill(task.train, task.train_nodes, 0, spec.train_pairs);
  fill(task.test, task.test_nodes, spec.train_pairs, spec.test_pairs);
  return task;
}

// ------------------------------------------------------------ co-learning

std::string_view to_string(ColearnTarget t) {
  switch (t) {
    case ColearnTarget::shifted_xlogx: return "shifted-xlogx";
    case ColearnTarget::xlogx: return "xlogx";
    case ColearnTarget::squared: return "squared";
  }
  return "unknown";
}

ColearnTarget parse_colearn_target(std::string_view name) {
  if (name == "shifted-xlogx") return ColearnTarget::shifted_xlogx;
  if (name == "xlogx") return ColearnTarget::xlogx;
  if (name == "squared") return ColearnTarget::squared;
  throw std::invalid_argument("unknown co-learning target '" + std::string(name) + "'");
}

void ColearnSpec::validate() const {
  if (classes < 2) throw std::invalid_argument("colearn: need at least 2 classes");
  if (target == ColearnTarget::xlogx && classes < 3) {
    throw std::invalid_argument("colearn: the xlogx target needs at least 3 classes");
  }
  if (dim < 1 || train_per_class < 1 || test_per_class < 1) throw std::invalid_argument("colearn: invalid sizes");
  if (train_pairs < 1 || test_pairs < 0) throw std::invalid_argument("colearn: invalid pair counts");
  if (!(noise >= 0.0)) throw std::invalid_argument("colearn: noise must be non-negative");
}

double colearn_target(ColearnTarget target, double a, double b) {
  switch (target) {
    case ColearnTarget::shifted_xlogx: return (a + 1) * std::log((a + 1) / (b + 1)) - a + b;
    case ColearnTarget::xlogx: return a * std::log(a / b) - a + b;
    case ColearnTarget::squared: return (a - b) * (a - b);
  }
  throw std::logic_error("unreachable");
}

ColearnData gen_colearn(const ColearnSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  ColearnData out;
  out.prototypes = standard_normal(rng, spec.classes, spec.dim);
  std::normal_distribution<double> noise(0.0, spec.noise);

  auto samples = [&](int per_class) {
    LabeledPoints p;
    p.x.resize(static_cast<Eigen::Index>(spec.classes) * per_class, spec.dim);
    Eigen::Index row = 0;
    for (int c = 0; c < spec.classes; ++c) {
      for (int s = 0; s < per_class; ++s, ++row) {
        for (int j = 0; j < spec.dim; ++j) p.x(row, j) = out.prototypes(c, j) + noise(rng);
        p.labels.push_back(c);
      }
    }
    return p;
  };
  out.train_samples = samples(spec.train_per_class);
  out.test_samples = samples(spec.test_per_class);

  auto pairs = [&](const LabeledPoints& pool, int count) {
    PairSet p;
    p.a.resize(count, spec.dim);
    p.b.resize(count, spec.dim);
    p.target.resize(count, 1);
    std::uniform_int_distribution<Eigen::Index> pick(0, pool.size() - 1);
    for (int i = 0; i < count; ++i) {
      Eigen::Index u, v;
      do {
        u = pick(rng);
        v = pick(rng);
      } while (spec.target == ColearnTarget::xlogx && (pool.labels[u] == 0 || pool.labels[v] == 0));
      p.a.row(i) = pool.x.row(u);
      p.b.row(i) = pool.x.row(v);
      p.target(i, 0) = colearn_target(spec.target, pool.labels[u], pool.labels[v]);
    }
    return p;
  };
  out.train = pairs(out.train_samples, spec.train_pairs);
  out.test = pairs(out.test_samples, spec.test_pairs);
  return out;
}

}  // namespace nbd
