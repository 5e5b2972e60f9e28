#include "nbd/datagen.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

using namespace nbd;

TEST_SUITE("datagen") {
  TEST_CASE("gaussian mixture has the requested shape, labels and cluster means") {
    MixtureSpec spec;
    spec.n = 4000;
    spec.seed = 3;
    const Mixture m = gen_mixture(spec);
    REQUIRE(m.points.x.rows() == 4000);
    REQUIRE(m.points.x.cols() == 10);
    REQUIRE(m.params.rows() == 5);
    std::map<int, int> counts;
    for (int l : m.points.labels) ++counts[l];
    CHECK(counts.size() == 5);
    for (const auto& [label, c] : counts) {
      CHECK(label >= 0);
      CHECK(label < 5);
      CHECK(c > 600);
    }
    for (int c = 0; c < 5; ++c) {
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(10);
      for (int i = 0; i < spec.n; ++i) {
        if (m.points.labels[static_cast<std::size_t>(i)] == c) mean += m.points.x.row(i);
      }
      mean /= counts[c];
      CHECK((mean - m.params.row(c)).cwiseAbs().maxCoeff() < 0.5);
      CHECK(m.params.row(c).cwiseAbs().maxCoeff() <= 4.0);
    }
    for (const auto& cov : m.covariances) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
      CHECK(es.eigenvalues().minCoeff() >= 6.0 - 1e-9);
      CHECK(es.eigenvalues().maxCoeff() <= 7.0 + 1e-9);
    }
  }

  TEST_CASE("exponential mixture is positive with rates in range") {
    MixtureSpec spec;
    spec.family = MixtureFamily::exponential;
    spec.seed = 4;
    const Mixture m = gen_mixture(spec);
    CHECK(m.points.x.minCoeff() > 0.0);
    CHECK(m.params.minCoeff() >= 0.1);
    CHECK(m.params.maxCoeff() <= 10.0);
  }

  TEST_CASE("multinomial counts sum to 100") {
    MixtureSpec spec;
    spec.family = MixtureFamily::multinomial;
    spec.seed = 5;
    const Mixture m = gen_mixture(spec);
    for (Eigen::Index i = 0; i < m.points.x.rows(); ++i) {
      CHECK(m.points.x.row(i).sum() == doctest::Approx(100.0));
      CHECK(m.points.x.row(i).minCoeff() >= 0.0);
    }
    for (Eigen::Index c = 0; c < m.params.rows(); ++c) CHECK(m.params.row(c).sum() == doctest::Approx(1.0));
  }

  TEST_CASE("generation is deterministic per seed") {
    MixtureSpec spec;
    spec.seed = 9;
    CHECK(gen_mixture(spec).points.x == gen_mixture(spec).points.x);
    MixtureSpec other = spec;
    other.seed = 10;
    CHECK(gen_mixture(spec).points.x != gen_mixture(other).points.x);

    RegressionSpec r;
    r.pairs = 200;
    r.test_pairs = 50;
    r.seed = 2;
    const auto a = gen_regression_pairs(r), b = gen_regression_pairs(r);
    CHECK(a.train.a == b.train.a);
    CHECK(a.train.target == b.train.target);
  }

  TEST_CASE("random_spd eigenvalues lie in [1, 2]") {
    std::mt19937_64 rng(1);
    const Matrix s = random_spd(8, rng);
    CHECK((s - s.transpose()).norm() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    CHECK(es.eigenvalues().minCoeff() >= 1.0 - 1e-9);
    CHECK(es.eigenvalues().maxCoeff() <= 2.0 + 1e-9);
  }

  TEST_CASE("uncorrelated regression features have small sample correlations") {
    RegressionSpec spec;
    spec.pairs = 20000;
    spec.test_pairs = 10;
    spec.seed = 1;
    const auto data = gen_regression_pairs(spec);
    REQUIRE(data.train.a.cols() == 20);
    const Matrix x = data.train.a;
    const Matrix centred = x.rowwise() - x.colwise().mean();
    const Matrix cov = centred.transpose() * centred / static_cast<double>(x.rows() - 1);
    const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      for (int j = 0; j < 20; ++j) {
        if (i != j) worst = std::max(worst, std::abs(cov(i, j) / (sd(i) * sd(j))));
      }
    }
    CHECK(worst < 0.05);
    CHECK(data.covariance.isIdentity(1e-12));
  }

  TEST_CASE("controlled correlation lands in its condition band with unit marginals") {
    for (auto [c, lo, hi] : {std::tuple{Correlation::med, 10.0, 100.0}, std::tuple{Correlation::high, 250.0, 500.0}}) {
      RegressionSpec spec;
      spec.pairs = 10;
      spec.test_pairs = 10;
      spec.correlation = c;
      spec.seed = 17;
      const auto data = gen_regression_pairs(spec);
      const double kappa = condition_number(data.covariance);
      CHECK(kappa >= lo);
      CHECK(kappa <= hi);
      CHECK((data.covariance.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
      CHECK((data.covariance - data.covariance.transpose()).norm() < 1e-12);
    }
  }

  TEST_CASE("kl-positive targets see points on the simplex") {
    std::mt19937_64 rng(4);
    const Matrix s = target_support(GeneratorKind::kl_positive, testing::gaussian(rng, 30, 10));
    for (Eigen::Index i = 0; i < s.rows(); ++i) CHECK(s.row(i).sum() == doctest::Approx(1.0));
    CHECK(s.minCoeff() > 0.0);
    CHECK(target_support(GeneratorKind::xlogx, testing::gaussian(rng, 30, 10)).minCoeff() > 0.0);
  }

  TEST_CASE("regression targets match the analytic divergence on informative features") {
    for (auto kind : {GeneratorKind::sq_euclidean, GeneratorKind::mahalanobis, GeneratorKind::xlogx,
                      GeneratorKind::shifted_xlogx, GeneratorKind::kl_positive}) {
      RegressionSpec spec;
      spec.pairs = 100;
      spec.test_pairs = 10;
      spec.target = kind;
      spec.seed = 8;
      const auto data = gen_regression_pairs(spec);
      const Matrix a = target_support(kind, data.train.a.leftCols(10));
      const Matrix b = target_support(kind, data.train.b.leftCols(10));
      const auto gen = closed_form_generator(kind, data.target_matrix);
      const Matrix expected = analytic_divergence(gen, a, b).cwiseMax(0.0);
      CHECK((expected - data.train.target).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(data.train.target.minCoeff() >= 0.0);

      const Matrix self = analytic_divergence(gen, a, a);
      CHECK(self.cwiseAbs().maxCoeff() < 1e-9);
    }
  }

  TEST_CASE("distractor columns do not change the target") {
    RegressionSpec spec;
    spec.pairs = 50;
    spec.test_pairs = 10;
    spec.seed = 6;
    const auto data = gen_regression_pairs(spec);
    const Matrix diff = data.train.a.leftCols(10) - data.train.b.leftCols(10);
    CHECK((diff.rowwise().squaredNorm() - data.train.target).cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("co-learning targets follow the digit divergence") {
    CHECK(colearn_target(ColearnTarget::xlogx, 4, 6) == doctest::Approx(4 * std::log(4.0 / 6.0) + 2).epsilon(1e-12));
    CHECK(colearn_target(ColearnTarget::xlogx, 4, 6) == doctest::Approx(0.378).epsilon(1e-3));
    CHECK(colearn_target(ColearnTarget::shifted_xlogx, 0, 0) == 0.0);
    CHECK(colearn_target(ColearnTarget::squared, 3, 7) == 16.0);
    CHECK(colearn_target(ColearnTarget::shifted_xlogx, 2, 5) != colearn_target(ColearnTarget::shifted_xlogx, 5, 2));

    ColearnSpec spec;
    spec.train_pairs = 500;
    spec.test_pairs = 100;
    spec.seed = 12;
    const auto data = gen_colearn(spec);
    CHECK(data.train_samples.x.rows() == 1000);
    CHECK(data.test_samples.x.rows() == 500);
    CHECK(data.train.size() == 500);
    CHECK(data.train.target.minCoeff() >= 0.0);

    spec.target = ColearnTarget::xlogx;
    const auto positive = gen_colearn(spec);
    CHECK(std::isfinite(positive.train.target.sum()));
  }
}

TEST_SUITE("graph") {
  TEST_CASE("unit 3d torus distances are wrapped manhattan distances") {
    std::mt19937_64 rng(0);
    const Graph g = build_graph(GraphKind::grid3d, 10, true, rng);
    CHECK(g.nodes() == 1000);
    CHECK(g.edges() == 6000);
    const auto d = dijkstra(g, grid_node({0, 0, 0}, 10));
    CHECK(d[static_cast<std::size_t>(grid_node({5, 5, 5}, 10))] == 15.0);
    CHECK(d[static_cast<std::size_t>(grid_node({9, 9, 9}, 10))] == 3.0);
    CHECK(d[static_cast<std::size_t>(grid_node({2, 7, 0}, 10))] == 5.0);
  }

  TEST_CASE("topologies have the expected sizes") {
    std::mt19937_64 rng(1);
    CHECK(build_graph(GraphKind::taxi, 4, false, rng).nodes() == 256);
    const Graph dd = build_graph(GraphKind::grid3d_directed, 5, false, rng);
    CHECK(dd.edges() == 3u * 125u);
    const Graph t = build_graph(GraphKind::traffic, 6, false, rng);
    CHECK(t.edges() == 2u * 2u * 6u * 5u);
    const Graph o = build_graph(GraphKind::octagon, 6, false, rng);
    CHECK(o.edges() == t.edges() + 2u * 2u * 5u * 5u);
    CHECK_THROWS(build_graph(GraphKind::grid3d, 2, false, rng));
  }

  TEST_CASE("symmetric datasets give symmetric distances") {
    for (auto kind : {GraphKind::grid3d, GraphKind::taxi}) {
      std::mt19937_64 rng(2);
      const Graph g = build_graph(kind, kind == GraphKind::taxi ? 4 : 5, false, rng);
      const auto from0 = dijkstra(g, 0);
      for (int v = 1; v < g.nodes(); v += 7) CHECK(dijkstra(g, v)[0] == doctest::Approx(from0[static_cast<std::size_t>(v)]));
    }
  }

  TEST_CASE("asymmetric datasets contain asymmetric pairs") {
    for (auto kind : {GraphKind::grid3d_directed, GraphKind::traffic, GraphKind::octagon}) {
      CAPTURE(to_string(kind));
      std::mt19937_64 rng(3);
      const Graph g = build_graph(kind, 6, false, rng);
      const auto from0 = dijkstra(g, 0);
      bool witnessed = false;
      for (int v = 1; v < g.nodes() && !witnessed; ++v) {
        witnessed = std::abs(dijkstra(g, v)[0] - from0[static_cast<std::size_t>(v)]) > 1e-9;
      }
      CHECK(witnessed);
    }
  }

  TEST_CASE("A* agrees with Dijkstra on 100 random pairs") {
    std::mt19937_64 rng(4);
    const Graph g = build_graph(GraphKind::octagon, 12, false, rng);
    std::uniform_int_distribution<int> node(0, g.nodes() - 1);
    for (int k = 0; k < 100; ++k) {
      const int s = node(rng), t = node(rng);
      const double dj = dijkstra(g, s)[static_cast<std::size_t>(t)];
      CHECK(astar(g, s, t, [](int) { return 0.0; }) == doctest::Approx(dj).epsilon(1e-12));
      // Octile distance times the smallest weight is admissible.
      const int ty = t / 12, tx = t % 12;
      const auto h = [&](int v) {
        const int dy = std::abs(v / 12 - ty), dx = std::abs(v % 12 - tx);
        return 0.01 * std::max(dx, dy);
      };
      CHECK(astar(g, s, t, h) == doctest::Approx(dj).epsilon(1e-12));
    }
  }

  TEST_CASE("graph task pairs carry normalized shortest-path targets") {
    GraphSpec spec;
    spec.dataset = GraphKind::traffic;
    spec.side = 8;
    spec.landmarks = 6;
    spec.distractors = 5;
    spec.train_pairs = 300;
    spec.test_pairs = 100;
    spec.seed = 5;
    const GraphTask task = gen_graph_task(spec);
    CHECK(task.features.rows() == 64);
    CHECK(task.features.cols() == 2 * 6 + 5);
    CHECK(task.train.a.cols() == task.features.cols());
    double total = 0.0;
    for (Eigen::Index i = 0; i < task.train.size(); ++i) {
      const auto [u, v] = task.train_nodes[static_cast<std::size_t>(i)];
      CHECK(u != v);
      CHECK(task.train.a.row(i) == task.features.row(u));
      CHECK(task.train.b.row(i) == task.features.row(v));
      const double raw = dijkstra(task.graph, u)[static_cast<std::size_t>(v)];
      CHECK(task.train.target(i, 0) == doctest::Approx(raw / task.scale).epsilon(1e-12));
      total += task.train.target(i, 0);
    }
    for (Eigen::Index i = 0; i < task.test.size(); ++i) total += task.test.target(i, 0);
    CHECK(total / static_cast<double>(task.train.size() + task.test.size()) == doctest::Approx(1.0).epsilon(1e-9));

    spec.dataset = GraphKind::grid3d;
    spec.side = 4;
    CHECK(gen_graph_task(spec).features.cols() == 6 + 5);
  }
}
